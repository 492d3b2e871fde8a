//! Procedural specimens with a tunable amount of shared per-specimen style.
//!
//! Every cell mixes two textures: one drawn fresh for the cell from its
//! class's family, and one drawn once per specimen from a random family (the
//! specimen's "style"). `intra_specimen_correlation` sets the weight of the
//! style; at 0 cells carry no trace of their specimen, at 1 (without noise)
//! all cells of a specimen are the same image up to position and rotation.

use std::f32::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::image::GrayImage;
use crate::data::record::{class_name, CellRecord};
use crate::data::transform::INPUT_SIDE;
use crate::error::{Error, Result};

/// Number of distinct texture families, hence the maximum class count.
pub const FAMILIES: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub num_specimens_per_class: usize,
    pub cells_per_specimen: usize,
    pub classes: usize,
    pub intra_specimen_correlation: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_specimens_per_class: 8,
            cells_per_specimen: 40,
            classes: 6,
            intra_specimen_correlation: 0.8,
            noise_std: 0.05,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_specimens_per_class == 0 || self.cells_per_specimen == 0 || self.classes == 0 {
            return Err(Error::config("specimen, cell and class counts must be positive"));
        }
        if self.classes > FAMILIES {
            return Err(Error::config(format!(
                "at most {FAMILIES} classes are supported, got {}",
                self.classes
            )));
        }
        if !(0.0..=1.0).contains(&self.intra_specimen_correlation) {
            return Err(Error::config("intra_specimen_correlation must lie in [0, 1]"));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(Error::config("noise_std must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn total_records(&self) -> usize {
        self.classes * self.num_specimens_per_class * self.cells_per_specimen
    }
}

#[derive(Clone, Copy, Debug)]
enum Primitive {
    /// Uniform disc around the cell centre.
    Fill { radius: f32, amp: f32 },
    /// Annulus around the cell centre with a Gaussian profile.
    Ring { radius: f32, width: f32, amp: f32 },
    /// Isotropic Gaussian spot at an offset from the cell centre.
    Dot { x: f32, y: f32, sigma: f32, amp: f32 },
}

impl Primitive {
    fn scaled(self, k: f32) -> Self {
        match self {
            Primitive::Fill { radius, amp } => Primitive::Fill { radius, amp: amp * k },
            Primitive::Ring { radius, width, amp } => Primitive::Ring { radius, width, amp: amp * k },
            Primitive::Dot { x, y, sigma, amp } => Primitive::Dot { x, y, sigma, amp: amp * k },
        }
    }
}

/// Texture of family `family` for a cell body of radius `r`, in cell-centred coordinates.
fn texture(family: usize, r: f32, rng: &mut ChaCha8Rng) -> Vec<Primitive> {
    let dots_in = |rng: &mut ChaCha8Rng, n: usize, within: f32, sigma: (f32, f32), amp: (f32, f32)| {
        (0..n)
            .map(|_| {
                let rho = within * rng.random::<f32>().sqrt();
                let phi = rng.random_range(0.0..TAU);
                Primitive::Dot {
                    x: rho * phi.cos(),
                    y: rho * phi.sin(),
                    sigma: rng.random_range(sigma.0..sigma.1),
                    amp: rng.random_range(amp.0..amp.1),
                }
            })
            .collect::<Vec<_>>()
    };
    let mut out = Vec::new();
    match family {
        // homogeneous
        0 => out.push(Primitive::Fill {
            radius: 0.95 * r,
            amp: rng.random_range(0.7..0.9),
        }),
        // speckled: dense fine grain
        1 => {
            out.push(Primitive::Fill { radius: 0.9 * r, amp: 0.25 });
            let n = rng.random_range(60..90);
            out.extend(dots_in(rng, n, 0.85 * r, (0.9, 1.3), (0.4, 0.7)));
        }
        // nucleolar: a few large blobs
        2 => {
            out.push(Primitive::Fill { radius: 0.9 * r, amp: 0.15 });
            let n = rng.random_range(2..6);
            out.extend(dots_in(rng, n, 0.55 * r, (2.5, 3.5), (0.8, 1.0)));
        }
        // centromere: sparse crisp points
        3 => {
            out.push(Primitive::Fill { radius: 0.9 * r, amp: 0.08 });
            let n = rng.random_range(25..45);
            out.extend(dots_in(rng, n, 0.8 * r, (0.6, 0.8), (0.9, 1.2)));
        }
        // nuclear membrane
        4 => {
            out.push(Primitive::Fill { radius: 0.8 * r, amp: 0.15 });
            out.push(Primitive::Ring {
                radius: 0.85 * r,
                width: rng.random_range(1.5..2.2),
                amp: rng.random_range(0.8..1.0),
            });
        }
        // golgi: one perinuclear patch
        _ => {
            out.push(Primitive::Fill { radius: 0.9 * r, amp: 0.1 });
            let phi = rng.random_range(0.0..TAU);
            let (cx, cy) = (0.55 * r * phi.cos(), 0.55 * r * phi.sin());
            let n = rng.random_range(6..11);
            for _ in 0..n {
                out.push(Primitive::Dot {
                    x: cx + rng.random_range(-4.0..4.0),
                    y: cy + rng.random_range(-4.0..4.0),
                    sigma: rng.random_range(1.5..2.5),
                    amp: rng.random_range(0.6..0.9),
                });
            }
        }
    }
    out
}

/// Render primitives rotated by `theta` about a centre at (`cx`, `cy`),
/// masked to a cell body of radius `body`.
fn render(prims: &[Primitive], side: usize, cx: f32, cy: f32, theta: f32, body: f32) -> Vec<f32> {
    let mut canvas = vec![0.0f32; side * side];
    let (s, c) = theta.sin_cos();
    for p in prims {
        match *p {
            Primitive::Fill { radius, amp } => {
                for (i, v) in canvas.iter_mut().enumerate() {
                    let d = ((i / side) as f32 - cy).hypot((i % side) as f32 - cx);
                    *v += amp * (radius - d + 0.5).clamp(0.0, 1.0);
                }
            }
            Primitive::Ring { radius, width, amp } => {
                for (i, v) in canvas.iter_mut().enumerate() {
                    let d = ((i / side) as f32 - cy).hypot((i % side) as f32 - cx);
                    *v += amp * (-(d - radius).powi(2) / (2.0 * width * width)).exp();
                }
            }
            Primitive::Dot { x, y, sigma, amp } => {
                let px = cx + c * x - s * y;
                let py = cy + s * x + c * y;
                let reach = 3.0 * sigma;
                let lo = |v: f32| (v - reach).floor().clamp(0.0, side as f32) as usize;
                let hi = |v: f32| ((v + reach).ceil() + 1.0).clamp(0.0, side as f32) as usize;
                for row in lo(py)..hi(py) {
                    for col in lo(px)..hi(px) {
                        let d2 = (row as f32 - py).powi(2) + (col as f32 - px).powi(2);
                        canvas[row * side + col] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
        }
    }
    for (i, v) in canvas.iter_mut().enumerate() {
        let d = ((i / side) as f32 - cy).hypot((i % side) as f32 - cx);
        *v *= (body - d + 0.5).clamp(0.0, 1.0);
    }
    canvas
}

const MIN_BODY: f32 = 17.0;
const MAX_BODY: f32 = 24.0;
const MAX_SHIFT: f32 = 6.0;

fn specimen_cells(spec: &SynthSpec, label: usize, index: usize) -> Vec<CellRecord> {
    let rho = spec.intra_specimen_correlation as f32;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let style_family = rng.random_range(0..spec.classes);
    let style_body = rng.random_range(MIN_BODY..MAX_BODY);
    let style = texture(style_family, style_body, &mut rng);
    let brightness = rng.random_range(0.6f32..1.4);
    let noise = Normal::new(0.0, spec.noise_std as f32).expect("validated noise std");
    let specimen_id = format!("{}-{index:03}", class_name(label));
    let side = INPUT_SIDE;
    let centre = (side as f32 - 1.0) / 2.0;

    (0..spec.cells_per_specimen)
        .map(|_| {
            let own_body = rng.random_range(MIN_BODY..MAX_BODY);
            let body = (1.0 - rho) * own_body + rho * style_body;
            let mut prims: Vec<Primitive> = texture(label, own_body, &mut rng)
                .into_iter()
                .map(|p| p.scaled(1.0 - rho))
                .collect();
            prims.extend(style.iter().map(|p| p.scaled(rho)));
            let gain = 1.0 + rho * (brightness - 1.0);
            let cx = centre + rng.random_range(-MAX_SHIFT..MAX_SHIFT);
            let cy = centre + rng.random_range(-MAX_SHIFT..MAX_SHIFT);
            let theta = rng.random_range(0.0..TAU);
            let mut pixels = render(&prims, side, cx, cy, theta, body);
            for v in &mut pixels {
                let n = if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                *v = (gain * *v + n).clamp(0.0, 1.0);
            }
            let image = GrayImage::new(side, side, pixels).expect("canvas matches its side");
            CellRecord::new(image, label, specimen_id.clone()).expect("square canvas and nonempty id")
        })
        .collect()
}

/// Generate `classes × num_specimens_per_class × cells_per_specimen` cells of
/// 60×60, ordered by class, then specimen, then cell.
///
/// Specimens draw from independent random streams derived from the seed, so
/// the output does not depend on how generation is scheduled.
pub fn generate(spec: &SynthSpec) -> Result<Vec<CellRecord>> {
    spec.validate()?;
    let n = spec.num_specimens_per_class;
    let per_specimen: Vec<Vec<CellRecord>> = (0..spec.classes * n)
        .into_par_iter()
        .map(|index| specimen_cells(spec, index / n, index))
        .collect();
    Ok(per_specimen.into_iter().flatten().collect())
}
