//! Aspect-preserving resize geometry between original images and the square
//! network input.
//!
//! No pixels are touched here; the transform only maps coordinates. Pixel
//! decoding lives behind the inference backend boundary.

use super::DetectError;

/// Coordinate mapping for an aspect-preserving resize with symmetric padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LetterboxTransform {
    /// Ratio applied to original-image coordinates.
    pub scale: f64,
    /// Horizontal padding in network-input pixels.
    pub pad_x: f64,
    /// Vertical padding in network-input pixels.
    pub pad_y: f64,
    /// Side length of the square network input, in pixels.
    pub input_size: u32,
}

impl LetterboxTransform {
    /// Compute the transform that fits `image_w x image_h` into a square
    /// `input_size` input, preserving aspect ratio and centering the result.
    pub fn compute(image_w: u32, image_h: u32, input_size: u32) -> Result<Self, DetectError> {
        if image_w == 0 || image_h == 0 || input_size == 0 {
            return Err(DetectError::NonPositiveDimension {
                width: image_w,
                height: image_h,
                input_size,
            });
        }
        let scale = f64::from(input_size) / f64::from(image_w.max(image_h));
        let pad_x = (f64::from(input_size) - f64::from(image_w) * scale) / 2.0;
        let pad_y = (f64::from(input_size) - f64::from(image_h) * scale) / 2.0;
        Ok(Self {
            scale,
            pad_x,
            pad_y,
            input_size,
        })
    }

    /// Map a point from original-image pixels to network-input pixels.
    pub fn image_to_input(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.scale + self.pad_x, y * self.scale + self.pad_y)
    }

    /// Map a point from network-input pixels back to original-image pixels.
    pub fn input_to_image(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.pad_x) / self.scale, (y - self.pad_y) / self.scale)
    }

    /// Original image dimensions recovered from the padding, rounded to
    /// whole pixels.
    pub fn image_size(&self) -> (u32, u32) {
        let (w, h) = self.image_bounds();
        (w.round() as u32, h.round() as u32)
    }
}
