//! Declarative network architecture and its text format.
//!
//! A config file has one entry per line. `#` starts a comment. The header
//! lines `input C H W` and `classes K` may appear anywhere; every other
//! line is a layer:
//!
//! ```text
//! input 1 60 60
//! classes 6
//! conv out=16 kernel=5 stride=1 pad=2
//! relu
//! maxpool window=2 stride=2
//! fc out=6
//! softmax
//! ```
//!
//! `kernel=KHxKW` gives a rectangular kernel. `stride` defaults to 1 and
//! `pad` to 0 for convolutions; pooling `stride` defaults to the window.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::conv::output_extent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool {
        window: usize,
        stride: usize,
    },
    AvgPool {
        window: usize,
        stride: usize,
    },
    Flatten,
    FullyConnected {
        out_units: usize,
    },
    /// Parameter-free softmax over the flattened input; must be last.
    SoftmaxOutput,
}

impl LayerSpec {
    pub fn conv(out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        LayerSpec::Conv {
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride,
            padding,
        }
    }

    pub fn max_pool(window: usize, stride: usize) -> Self {
        LayerSpec::MaxPool { window, stride }
    }

    pub fn avg_pool(window: usize, stride: usize) -> Self {
        LayerSpec::AvgPool { window, stride }
    }

    pub fn fc(out_units: usize) -> Self {
        LayerSpec::FullyConnected { out_units }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::FullyConnected { .. })
    }

    /// Whether the layer counts towards the architecture's depth.
    ///
    /// Convolutions, pooling and fully connected layers count; activations,
    /// reshapes and the softmax head do not.
    pub fn is_counted(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv { .. }
                | LayerSpec::MaxPool { .. }
                | LayerSpec::AvgPool { .. }
                | LayerSpec::FullyConnected { .. }
        )
    }

    /// Output `(channels, height, width)` for input `shape`.
    pub fn output_shape(&self, [c, h, w]: [usize; 3]) -> Result<[usize; 3]> {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel_h,
                kernel_w,
                stride,
                padding,
            } => {
                if out_channels == 0 {
                    return Err(Error::config("convolution needs at least one output channel"));
                }
                Ok([
                    out_channels,
                    output_extent(h, kernel_h, stride, padding)?,
                    output_extent(w, kernel_w, stride, padding)?,
                ])
            }
            LayerSpec::Relu | LayerSpec::SoftmaxOutput => Ok([c, h, w]),
            LayerSpec::MaxPool { window, stride } | LayerSpec::AvgPool { window, stride } => Ok([
                c,
                output_extent(h, window, stride, 0)?,
                output_extent(w, window, stride, 0)?,
            ]),
            LayerSpec::Flatten => Ok([c * h * w, 1, 1]),
            LayerSpec::FullyConnected { out_units } => {
                if out_units == 0 {
                    return Err(Error::config("fully connected layer needs at least one unit"));
                }
                Ok([out_units, 1, 1])
            }
        }
    }

    /// Weight dims `(out, in, kh, kw)` and bias length for input `shape`.
    pub fn param_shape(&self, [c, h, w]: [usize; 3]) -> Option<([usize; 4], usize)> {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel_h,
                kernel_w,
                ..
            } => Some(([out_channels, c, kernel_h, kernel_w], out_channels)),
            LayerSpec::FullyConnected { out_units } => Some(([out_units, c * h * w, 1, 1], out_units)),
            _ => None,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel_h,
                kernel_w,
                stride,
                padding,
            } => {
                write!(f, "conv out={out_channels} kernel=")?;
                if kernel_h == kernel_w {
                    write!(f, "{kernel_h}")?;
                } else {
                    write!(f, "{kernel_h}x{kernel_w}")?;
                }
                write!(f, " stride={stride} pad={padding}")
            }
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::MaxPool { window, stride } => write!(f, "maxpool window={window} stride={stride}"),
            LayerSpec::AvgPool { window, stride } => write!(f, "avgpool window={window} stride={stride}"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::FullyConnected { out_units } => write!(f, "fc out={out_units}"),
            LayerSpec::SoftmaxOutput => f.write_str("softmax"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// `(channels, height, width)` of one input image.
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
}

impl NetworkConfig {
    /// The shipped 60x60 six-class architecture.
    ///
    /// Ten counted layers (see [`LayerSpec::is_counted`]): three stages of
    /// convolution with 1x1 convolutions stacked in the middle and late
    /// stages, ReLU after every convolution, max pooling between stages,
    /// average pooling before the fully connected head.
    ///
    /// ```text
    ///  #  layer                      output
    ///  1  conv 5x5, 16, pad 2        16 x 60 x 60
    ///  2  maxpool 2/2                16 x 30 x 30
    ///  3  conv 3x3, 32, pad 1        32 x 30 x 30
    ///  4  conv 1x1, 32               32 x 30 x 30
    ///  5  maxpool 2/2                32 x 15 x 15
    ///  6  conv 3x3, 64, pad 1        64 x 15 x 15
    ///  7  conv 1x1, 64               64 x 15 x 15
    ///  8  conv 1x1, 64               64 x 15 x 15
    ///  9  avgpool 3/3                64 x 5 x 5
    /// 10  fc 6                       6
    ///     softmax
    /// ```
    pub fn hep2_default() -> Self {
        use LayerSpec::*;
        NetworkConfig {
            input_shape: [1, 60, 60],
            layers: vec![
                LayerSpec::conv(16, 5, 1, 2),
                Relu,
                LayerSpec::max_pool(2, 2),
                LayerSpec::conv(32, 3, 1, 1),
                Relu,
                LayerSpec::conv(32, 1, 1, 0),
                Relu,
                LayerSpec::max_pool(2, 2),
                LayerSpec::conv(64, 3, 1, 1),
                Relu,
                LayerSpec::conv(64, 1, 1, 0),
                Relu,
                LayerSpec::conv(64, 1, 1, 0),
                Relu,
                LayerSpec::avg_pool(3, 3),
                LayerSpec::fc(6),
                SoftmaxOutput,
            ],
            num_classes: 6,
        }
    }

    /// A compact network that trains in seconds on 60x60 inputs.
    ///
    /// Used for desk-scale protocol experiments where dozens of folds are
    /// trained from scratch.
    pub fn compact(num_classes: usize) -> Self {
        use LayerSpec::*;
        NetworkConfig {
            input_shape: [1, 60, 60],
            layers: vec![
                LayerSpec::avg_pool(2, 2),
                LayerSpec::conv(8, 5, 1, 2),
                Relu,
                LayerSpec::max_pool(2, 2),
                LayerSpec::conv(16, 3, 1, 1),
                Relu,
                LayerSpec::conv(16, 1, 1, 0),
                Relu,
                LayerSpec::max_pool(3, 3),
                LayerSpec::fc(num_classes),
                SoftmaxOutput,
            ],
            num_classes,
        }
    }

    /// Number of layers counted by [`LayerSpec::is_counted`].
    pub fn depth(&self) -> usize {
        self.layers.iter().filter(|l| l.is_counted()).count()
    }

    /// Propagate the input shape through every layer.
    ///
    /// Returns `layers.len() + 1` shapes: the input followed by each layer's
    /// output. Errors carry the index of the first inconsistent layer.
    pub fn shapes(&self) -> Result<Vec<[usize; 3]>> {
        if self.input_shape.iter().any(|&d| d == 0) {
            return Err(Error::config(format!(
                "input shape {:?} must be positive",
                self.input_shape
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::config("num_classes must be positive"));
        }
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        shapes.push(self.input_shape);
        for (i, layer) in self.layers.iter().enumerate() {
            let prev = *shapes.last().unwrap();
            if let LayerSpec::SoftmaxOutput = layer {
                if i + 1 != self.layers.len() {
                    return Err(Error::layer(i, "softmax output must be the final layer"));
                }
                let features = prev.iter().product::<usize>();
                if features != self.num_classes {
                    return Err(Error::layer(
                        i,
                        format!(
                            "softmax output sees {features} features, expected {} classes",
                            self.num_classes
                        ),
                    ));
                }
            }
            shapes.push(layer.output_shape(prev).map_err(|e| e.at_layer(i))?);
        }
        match self.layers.last() {
            Some(LayerSpec::SoftmaxOutput) => Ok(shapes),
            _ => Err(Error::config("final layer must be a softmax output")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    /// Canonical text form; parsing it yields an identical config.
    pub fn to_text(&self) -> String {
        let [c, h, w] = self.input_shape;
        let mut s = format!("input {c} {h} {w}\nclasses {}\n", self.num_classes);
        for layer in &self.layers {
            s.push_str(&layer.to_string());
            s.push('\n');
        }
        s
    }

    /// SHA-256 of the canonical text, identifying compatible checkpoints.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        text.parse()
    }

    /// Parse and validate the text format described in the module docs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut input_shape = None;
        let mut num_classes = None;
        let mut layers = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let kind = words.next().unwrap();
            let rest: Vec<&str> = words.collect();
            let err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            match kind {
                "input" => {
                    let dims = rest
                        .iter()
                        .map(|w| w.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| err(format!("bad input dims: {e}")))?;
                    let [c, h, w] = dims[..] else {
                        return Err(err("input needs exactly three dims: C H W".into()));
                    };
                    input_shape = Some([c, h, w]);
                }
                "classes" => {
                    let [k] = rest[..] else {
                        return Err(err("classes needs one value".into()));
                    };
                    num_classes = Some(k.parse().map_err(|e| err(format!("bad class count: {e}")))?);
                }
                _ => layers.push(parse_layer(kind, &rest).map_err(err)?),
            }
        }
        let config = NetworkConfig {
            input_shape: input_shape.ok_or_else(|| Error::Parse {
                line: 0,
                message: "missing `input C H W` line".into(),
            })?,
            layers,
            num_classes: num_classes.ok_or_else(|| Error::Parse {
                line: 0,
                message: "missing `classes K` line".into(),
            })?,
        };
        config.validate()?;
        Ok(config)
    }
}

impl std::str::FromStr for NetworkConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NetworkConfig::parse(s)
    }
}

fn parse_layer(kind: &str, args: &[&str]) -> std::result::Result<LayerSpec, String> {
    let mut kv = BTreeMap::new();
    for arg in args {
        let (k, v) = arg
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{arg}`"))?;
        if kv.insert(k, v).is_some() {
            return Err(format!("duplicate key `{k}`"));
        }
    }
    let allowed: &[&str] = match kind {
        "conv" => &["out", "kernel", "stride", "pad"],
        "maxpool" | "avgpool" => &["window", "stride"],
        "fc" => &["out"],
        "relu" | "flatten" | "softmax" => &[],
        other => return Err(format!("unknown layer kind `{other}`")),
    };
    if let Some(k) = kv.keys().find(|k| !allowed.contains(k)) {
        return Err(format!("unknown key `{k}` for {kind}"));
    }
    let num = |key: &str, default: Option<usize>| -> std::result::Result<usize, String> {
        match kv.get(key) {
            Some(v) => v.parse().map_err(|_| format!("`{key}` must be a nonnegative integer")),
            None => default.ok_or_else(|| format!("{kind} requires `{key}`")),
        }
    };
    let positive = |key: &str, v: usize| {
        if v == 0 {
            Err(format!("`{key}` must be positive"))
        } else {
            Ok(v)
        }
    };
    Ok(match kind {
        "conv" => {
            let (kernel_h, kernel_w) = match kv.get("kernel") {
                None => return Err("conv requires `kernel`".into()),
                Some(v) => match v.split_once('x') {
                    Some((a, b)) => (
                        a.parse().map_err(|_| "bad kernel height".to_string())?,
                        b.parse().map_err(|_| "bad kernel width".to_string())?,
                    ),
                    None => {
                        let k = v.parse().map_err(|_| "bad kernel size".to_string())?;
                        (k, k)
                    }
                },
            };
            LayerSpec::Conv {
                out_channels: positive("out", num("out", None)?)?,
                kernel_h: positive("kernel", kernel_h)?,
                kernel_w: positive("kernel", kernel_w)?,
                stride: positive("stride", num("stride", Some(1))?)?,
                padding: num("pad", Some(0))?,
            }
        }
        "maxpool" | "avgpool" => {
            let window = positive("window", num("window", None)?)?;
            let stride = positive("stride", num("stride", Some(window))?)?;
            if kind == "maxpool" {
                LayerSpec::MaxPool { window, stride }
            } else {
                LayerSpec::AvgPool { window, stride }
            }
        }
        "fc" => LayerSpec::FullyConnected {
            out_units: positive("out", num("out", None)?)?,
        },
        "relu" => LayerSpec::Relu,
        "flatten" => LayerSpec::Flatten,
        _ => LayerSpec::SoftmaxOutput,
    })
}
