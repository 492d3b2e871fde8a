use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::image::GrayImage;
use crate::error::{Error, Result};

/// The six staining patterns, in the order used by every report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternClass {
    Homogeneous,
    Speckled,
    Nucleolar,
    Centromere,
    NuMem,
    Golgi,
}

impl PatternClass {
    pub const ALL: [PatternClass; 6] = [
        PatternClass::Homogeneous,
        PatternClass::Speckled,
        PatternClass::Nucleolar,
        PatternClass::Centromere,
        PatternClass::NuMem,
        PatternClass::Golgi,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternClass::Homogeneous => "Homogeneous",
            PatternClass::Speckled => "Speckled",
            PatternClass::Nucleolar => "Nucleolar",
            PatternClass::Centromere => "Centromere",
            PatternClass::NuMem => "NuMem",
            PatternClass::Golgi => "Golgi",
        }
    }
}

impl fmt::Display for PatternClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['_', '-', ' '], "").as_str() {
            "homogeneous" | "homogenous" => Ok(PatternClass::Homogeneous),
            "speckled" => Ok(PatternClass::Speckled),
            "nucleolar" => Ok(PatternClass::Nucleolar),
            "centromere" => Ok(PatternClass::Centromere),
            "numem" | "nuclearmembrane" => Ok(PatternClass::NuMem),
            "golgi" => Ok(PatternClass::Golgi),
            _ => Err(Error::Data(format!("unknown pattern class `{s}`"))),
        }
    }
}

/// Display name for class id `id`; ids past the six patterns get `class<id>`.
pub fn class_name(id: usize) -> String {
    PatternClass::from_id(id).map_or_else(|| format!("class{id}"), |c| c.name().to_string())
}

/// Parse a class name (or a `class<id>` / bare numeric id) into a class id.
pub fn parse_class(s: &str) -> Result<usize> {
    if let Ok(c) = s.parse::<PatternClass>() {
        return Ok(c.id());
    }
    let digits = s.trim().strip_prefix("class").unwrap_or(s.trim());
    digits
        .parse()
        .map_err(|_| Error::Data(format!("unknown pattern class `{s}`")))
}

/// Orientation of a cell relative to its source crop: an element of the
/// dihedral group of the square.
///
/// The pixels equal `mirror^m(rotate^t(original))`, where rotation is a
/// counter-clockwise quarter turn and mirroring flips left-right.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    quarter_turns: u8,
    mirrored: bool,
}

impl Provenance {
    pub const ORIGINAL: Provenance = Provenance {
        quarter_turns: 0,
        mirrored: false,
    };

    pub fn new(quarter_turns: u8, mirrored: bool) -> Self {
        Provenance {
            quarter_turns: quarter_turns % 4,
            mirrored,
        }
    }

    pub fn quarter_turns(self) -> u8 {
        self.quarter_turns
    }

    pub fn is_mirrored(self) -> bool {
        self.mirrored
    }

    /// Provenance after a further counter-clockwise rotation by `turns`.
    pub fn rotated(self, turns: u8) -> Self {
        let t = turns % 4;
        // R^t M R^a = M R^(a - t)
        let quarter_turns = if self.mirrored {
            (self.quarter_turns + 4 - t) % 4
        } else {
            (self.quarter_turns + t) % 4
        };
        Provenance {
            quarter_turns,
            mirrored: self.mirrored,
        }
    }

    pub fn mirrored(self) -> Self {
        Provenance {
            quarter_turns: self.quarter_turns,
            mirrored: !self.mirrored,
        }
    }

    /// All eight orientations: the four rotations, then each mirrored.
    pub fn all() -> [Provenance; 8] {
        std::array::from_fn(|i| Provenance::new((i % 4) as u8, i >= 4))
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.mirrored, self.quarter_turns) {
            (false, 0) => f.write_str("original"),
            (false, t) => write!(f, "rot{}", 90 * t as u32),
            (true, 0) => f.write_str("mirror"),
            (true, t) => write!(f, "mirror_rot{}", 90 * t as u32),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mirrored, rest) = match s.strip_prefix("mirror") {
            Some(rest) => (true, rest.strip_prefix('_').unwrap_or(rest)),
            None => (false, s),
        };
        let turns = match rest {
            "" | "original" => 0,
            "rot90" => 1,
            "rot180" => 2,
            "rot270" => 3,
            _ => return Err(Error::Data(format!("unknown provenance `{s}`"))),
        };
        if !mirrored && rest.is_empty() {
            return Err(Error::Data(format!("unknown provenance `{s}`")));
        }
        Ok(Provenance::new(turns, mirrored))
    }
}

/// One specimen image and its pattern label.
#[derive(Clone, Debug)]
pub struct SpecimenImage {
    pub pixels: GrayImage,
    pub specimen_id: String,
    pub label: usize,
}

/// Binary foreground mask aligned with a [`SpecimenImage`].
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationMask {
    width: usize,
    height: usize,
    foreground: Vec<bool>,
}

impl SegmentationMask {
    pub fn new(width: usize, height: usize, foreground: Vec<bool>) -> Result<Self> {
        if foreground.len() != width * height {
            return Err(Error::Data(format!(
                "{width}x{height} mask needs {} entries, got {}",
                width * height,
                foreground.len()
            )));
        }
        Ok(SegmentationMask {
            width,
            height,
            foreground,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        SegmentationMask {
            width,
            height,
            foreground: vec![false; width * height],
        }
    }

    /// Pixels strictly above `threshold` are foreground.
    pub fn from_image(image: &GrayImage, threshold: f32) -> Self {
        SegmentationMask {
            width: image.width(),
            height: image.height(),
            foreground: image.pixels().iter().map(|&v| v > threshold).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.foreground[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.foreground[row * self.width + col] = value;
    }
}

/// A single cell crop: the unit of every dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRecord {
    pub pixels: GrayImage,
    pub label: usize,
    pub specimen_id: String,
    pub provenance: Provenance,
}

impl CellRecord {
    pub fn new(pixels: GrayImage, label: usize, specimen_id: impl Into<String>) -> Result<Self> {
        let specimen_id = specimen_id.into();
        if !pixels.is_square() {
            return Err(Error::Data(format!(
                "cell images must be square, got {}x{}",
                pixels.width(),
                pixels.height()
            )));
        }
        if specimen_id.is_empty() {
            return Err(Error::Data("cell record needs a specimen id".into()));
        }
        Ok(CellRecord {
            pixels,
            label,
            specimen_id,
            provenance: Provenance::ORIGINAL,
        })
    }

    pub fn side(&self) -> usize {
        self.pixels.width()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_names_round_trip() {
        let names: Vec<String> = Provenance::all().iter().map(|p| p.to_string()).collect();
        assert_eq!(
            names,
            [
                "original",
                "rot90",
                "rot180",
                "rot270",
                "mirror",
                "mirror_rot90",
                "mirror_rot180",
                "mirror_rot270"
            ]
        );
        for p in Provenance::all() {
            assert_eq!(p.to_string().parse::<Provenance>().unwrap(), p);
        }
        assert!("rot45".parse::<Provenance>().is_err());
        assert!("".parse::<Provenance>().is_err());
    }

    #[test]
    fn class_names() {
        assert_eq!("Homogenous".parse::<PatternClass>().unwrap(), PatternClass::Homogeneous);
        assert_eq!(parse_class("NuMem").unwrap(), 4);
        assert_eq!(parse_class("class7").unwrap(), 7);
        assert_eq!(class_name(5), "Golgi");
        assert_eq!(class_name(7), "class7");
        assert!(parse_class("Mitotic").is_err());
    }

    #[test]
    fn cells_must_be_square_with_specimen() {
        assert!(CellRecord::new(GrayImage::filled(3, 4, 0.0), 0, "s").is_err());
        assert!(CellRecord::new(GrayImage::filled(3, 3, 0.0), 0, "").is_err());
        assert!(CellRecord::new(GrayImage::filled(3, 3, 0.0), 0, "s").is_ok());
    }
}
