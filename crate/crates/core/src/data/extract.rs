//! Cell extraction from specimen images and segmentation masks.

use std::collections::VecDeque;

use crate::data::record::{CellRecord, SegmentationMask, SpecimenImage};
use crate::error::{Error, Result};

/// Side of the ground-truth bounding box around each cell.
pub const CELL_BOX: usize = 77;

/// A connected foreground region of a mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub pixels: Vec<(usize, usize)>,
}

impl Component {
    /// Mean `(row, col)` of the member pixels.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (r, c) = self
            .pixels
            .iter()
            .fold((0.0, 0.0), |(r, c), &(y, x)| (r + y as f64, c + x as f64));
        (r / n, c / n)
    }
}

/// 8-connected foreground components, ordered by their first pixel in raster order.
pub fn connected_components(mask: &SegmentationMask) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for row in 0..h {
        for col in 0..w {
            if !mask.get(row, col) || seen[row * w + col] {
                continue;
            }
            seen[row * w + col] = true;
            queue.push_back((row, col));
            let mut pixels = Vec::new();
            while let Some((y, x)) = queue.pop_front() {
                pixels.push((y, x));
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let (ny, nx) = (y as isize + dy, x as isize + dx);
                        if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                            continue;
                        }
                        let (ny, nx) = (ny as usize, nx as usize);
                        if mask.get(ny, nx) && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            queue.push_back((ny, nx));
                        }
                    }
                }
            }
            components.push(Component { pixels });
        }
    }
    components
}

/// One `side x side` crop per mask component, centred on its rounded centroid.
///
/// Crops that would cross the image border are skipped. Touching cells
/// form one component and yield one crop.
pub fn extract_cells(specimen: &SpecimenImage, mask: &SegmentationMask, side: usize) -> Result<Vec<CellRecord>> {
    let image = &specimen.pixels;
    if (mask.width(), mask.height()) != (image.width(), image.height()) {
        return Err(Error::Data(format!(
            "mask is {}x{} but specimen `{}` is {}x{}",
            mask.width(),
            mask.height(),
            specimen.specimen_id,
            image.width(),
            image.height()
        )));
    }
    if side == 0 {
        return Err(Error::config("crop side must be positive"));
    }
    let before = (side / 2) as isize;
    let mut cells = Vec::new();
    for component in connected_components(mask) {
        let (cy, cx) = component.centroid();
        let top = cy.round() as isize - before;
        let left = cx.round() as isize - before;
        if top < 0
            || left < 0
            || top as usize + side > image.height()
            || left as usize + side > image.width()
        {
            continue;
        }
        let crop = image.crop(top as usize, left as usize, side)?;
        cells.push(CellRecord::new(crop, specimen.label, specimen.specimen_id.clone())?);
    }
    Ok(cells)
}
