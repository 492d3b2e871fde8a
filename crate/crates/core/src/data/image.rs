//! Grayscale raster type and PNG/PGM decoding.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Data(format!("image dims {width}x{height} must be positive")));
        }
        if pixels.len() != width * height {
            return Err(Error::Data(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                pixels.push(f(row, col));
            }
        }
        GrayImage { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.pixels[row * self.width + col] = value;
    }

    /// Copy of the `side x side` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, side: usize) -> Result<GrayImage> {
        if top + side > self.height || left + side > self.width {
            return Err(Error::Data(format!(
                "crop {side}x{side} at ({top}, {left}) exceeds {}x{} image",
                self.width, self.height
            )));
        }
        Ok(GrayImage::from_fn(side, side, |r, c| self.get(top + r, left + c)))
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.pixels
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Decode a PNG or PGM file, converting colour by luminance.
    ///
    /// With `unit_range` the intensities are scaled to `[0, 1]`; otherwise
    /// they keep the file's native integer range.
    pub fn load(path: impl AsRef<Path>, unit_range: bool) -> Result<GrayImage> {
        let path = path.as_ref();
        let file_error = |message: String| Error::File {
            path: path.to_path_buf(),
            message,
        };
        let decoded = image::ImageReader::open(path)
            .map_err(|e| file_error(e.to_string()))?
            .with_guessed_format()
            .map_err(|e| file_error(e.to_string()))?
            .decode()
            .map_err(|e| file_error(e.to_string()))?;
        let (width, height) = (decoded.width() as usize, decoded.height() as usize);
        let sixteen_bit = matches!(
            decoded.color(),
            image::ColorType::L16 | image::ColorType::La16 | image::ColorType::Rgb16 | image::ColorType::Rgba16
        );
        let pixels: Vec<f32> = if unit_range {
            decoded.to_luma32f().into_raw()
        } else if sixteen_bit {
            decoded.to_luma16().into_raw().into_iter().map(f32::from).collect()
        } else {
            decoded.to_luma8().into_raw().into_iter().map(f32::from).collect()
        };
        GrayImage::new(width, height, pixels)
    }

    /// Write an 8-bit PNG, mapping `[0, 1]` to `[0, 255]` with clamping.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let buffer = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .ok_or_else(|| Error::Internal("pixel buffer size mismatch".into()))?;
        buffer.save(path.as_ref()).map_err(|e| Error::File {
            path: path.as_ref().to_path_buf(),
            message: e.to_string(),
        })
    }
}
