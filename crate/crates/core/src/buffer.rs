//! Dense rasters shared by every stage: RGB images, backward flows and masks.

use crate::error::{Error, Result};

/// Row-major RGB raster with unit-interval `f32` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

impl ImageBuffer {
    pub fn filled(width: usize, height: usize, value: [f32; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn from_pixels(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::DimensionMismatch {
                a: (width, height),
                b: (data.len(), 1),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: [f32; 3]) {
        self.data[y * self.width + x] = value;
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [[f32; 3]] {
        &mut self.data
    }

    /// Copy of the `w x h` window with top-left pixel `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop outside image");
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    /// The centered window covering `fraction` of each side.
    pub fn central_crop(&self, fraction: f64) -> Self {
        let (x0, y0, w, h) = central_window(self.width, self.height, fraction);
        self.crop(x0, y0, w, h)
    }
}

/// Dense backward flow: output pixel `(u, v)` samples the source at `(u + du, v + dv)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn uniform(width: usize, height: usize, d: [f32; 2]) -> Self {
        assert!(width > 0 && height > 0, "flow dimensions must be positive");
        Self {
            width,
            height,
            data: vec![d; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::uniform(width, height, [0.0, 0.0])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 2]) -> Self {
        assert!(width > 0 && height > 0, "flow dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn from_vectors(width: usize, height: usize, data: Vec<[f32; 2]>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::DimensionMismatch {
                a: (width, height),
                b: (data.len(), 1),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.data[y * self.width + x]
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|d| d[0].is_finite() && d[1].is_finite())
    }

    pub fn max_magnitude(&self) -> f32 {
        self.data
            .iter()
            .map(|d| d[0].hypot(d[1]))
            .fold(0.0, f32::max)
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop outside flow");
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }
}

/// Per-pixel flag: true where the backward sample stayed inside the source frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl ValidityMask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_flags(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::DimensionMismatch {
                a: (width, height),
                b: (data.len(), 1),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn flags(&self) -> &[bool] {
        &self.data
    }

    pub fn count_valid(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn all_valid(&self) -> bool {
        self.data.iter().all(|&v| v)
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop outside mask");
        let data = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| self.get(x0 + x, y0 + y))
            .collect();
        Self { width: w, height: h, data }
    }

    pub fn central_crop(&self, fraction: f64) -> Self {
        let (x0, y0, w, h) = central_window(self.width, self.height, fraction);
        self.crop(x0, y0, w, h)
    }
}

/// `(x0, y0, w, h)` of the centered window keeping `fraction` of each side.
/// For 512 and 0.8 this is `[51, 461)`.
pub fn central_window(width: usize, height: usize, fraction: f64) -> (usize, usize, usize, usize) {
    assert!(fraction > 0.0 && fraction <= 1.0, "crop fraction must be in (0, 1]");
    let margin = |n: usize| ((n as f64 * (1.0 - fraction)) / 2.0).floor() as usize;
    let (mx, my) = (margin(width), margin(height));
    (mx, my, width - 2 * mx, height - 2 * my)
}
