//! Geometric transforms: bilinear resizing, quarter-turn rotation and mirroring.

use crate::data::image::GrayImage;
use crate::data::record::CellRecord;
use crate::error::{Error, Result};

/// Network input side.
pub const INPUT_SIDE: usize = 60;

/// Bilinear resampling to `side x side`, sampling at pixel centres.
///
/// Output values are convex combinations of input values, so they stay
/// within the input's range. Resizing to the current side is the identity.
pub fn resize_image(image: &GrayImage, side: usize) -> Result<GrayImage> {
    if !image.is_square() {
        return Err(Error::Data(format!(
            "resize needs a square image, got {}x{}",
            image.width(),
            image.height()
        )));
    }
    if side == 0 {
        return Err(Error::config("resize target must be positive"));
    }
    let n = image.width();
    if n == side {
        return Ok(image.clone());
    }
    let scale = n as f64 / side as f64;
    let sample = |d: usize| -> (usize, usize, f32) {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, (s - i0 as f64) as f32)
    };
    let taps: Vec<_> = (0..side).map(sample).collect();
    Ok(GrayImage::from_fn(side, side, |r, c| {
        let (y0, y1, fy) = taps[r];
        let (x0, x1, fx) = taps[c];
        let top = lerp(image.get(y0, x0), image.get(y0, x1), fx);
        let bottom = lerp(image.get(y1, x0), image.get(y1, x1), fx);
        lerp(top, bottom, fy)
    }))
}

/// Exact at equal endpoints and never outside `[min(a, b), max(a, b)]`.
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    (a + (b - a) * t).clamp(a.min(b), a.max(b))
}

pub fn resize_bilinear(cell: &CellRecord, side: usize) -> Result<CellRecord> {
    Ok(CellRecord {
        pixels: resize_image(&cell.pixels, side)?,
        ..cell.clone()
    })
}

/// Counter-clockwise rotation by `quarter_turns * 90` degrees of a square image.
pub fn rotate_image(image: &GrayImage, quarter_turns: u8) -> GrayImage {
    let n = image.width();
    debug_assert!(image.is_square());
    match quarter_turns % 4 {
        0 => image.clone(),
        1 => GrayImage::from_fn(n, n, |r, c| image.get(c, n - 1 - r)),
        2 => GrayImage::from_fn(n, n, |r, c| image.get(n - 1 - r, n - 1 - c)),
        _ => GrayImage::from_fn(n, n, |r, c| image.get(n - 1 - c, r)),
    }
}

/// Left-right flip.
pub fn mirror_image(image: &GrayImage) -> GrayImage {
    let n = image.width();
    GrayImage::from_fn(n, image.height(), |r, c| image.get(r, n - 1 - c))
}

pub fn rotate(cell: &CellRecord, quarter_turns: u8) -> CellRecord {
    CellRecord {
        pixels: rotate_image(&cell.pixels, quarter_turns),
        provenance: cell.provenance.rotated(quarter_turns),
        ..cell.clone()
    }
}

pub fn mirror(cell: &CellRecord) -> CellRecord {
    CellRecord {
        pixels: mirror_image(&cell.pixels),
        provenance: cell.provenance.mirrored(),
        ..cell.clone()
    }
}
