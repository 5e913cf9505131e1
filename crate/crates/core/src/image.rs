use crate::error::{Error, Result};

/// Row-major linear RGB image with a per-pixel exclusion mask.
///
/// Excluded pixels (saturated on load, masked by a dataset manifest, ...)
/// keep their values but are skipped by every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
    excluded: Vec<bool>,
}

impl LinearImage {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, excluded: vec![false; data.len()], data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![[0.0; 3]; width * height], excluded: vec![false; width * height] }
    }

    /// Single-row image from a list of pixels.
    pub fn from_pixels(pixels: Vec<[f64; 3]>) -> Self {
        let n = pixels.len();
        Self { width: n, height: 1, excluded: vec![false; n], data: pixels }
    }

    pub fn with_excluded(mut self, excluded: Vec<bool>) -> Result<Self> {
        if excluded.len() != self.data.len() {
            return Err(Error::InvalidArgument("exclusion mask size does not match image".into()));
        }
        self.excluded = excluded;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.data
    }

    pub fn excluded(&self) -> &[bool] {
        &self.excluded
    }

    pub fn exclude(&mut self, index: usize) {
        self.excluded[index] = true;
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: [f64; 3]) {
        self.data[y * self.width + x] = value;
    }

    pub fn same_shape(&self, other: &LinearImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Largest channel value over included pixels.
    pub fn max_value(&self) -> f64 {
        self.data
            .iter()
            .zip(&self.excluded)
            .filter(|(_, &ex)| !ex)
            .flat_map(|(p, _)| p.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Per-pixel map preserving shape and mask.
    pub fn map(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> LinearImage {
        LinearImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&p| f(p)).collect(),
            excluded: self.excluded.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> LinearImage {
        self.map(|p| [p[0] * factor, p[1] * factor, p[2] * factor])
    }

    /// Per-channel mean over included pixels.
    pub fn channel_means(&self) -> [f64; 3] {
        let mut sum = [0.0; 3];
        let mut n = 0usize;
        for (p, &ex) in self.data.iter().zip(&self.excluded) {
            if ex {
                continue;
            }
            n += 1;
            for k in 0..3 {
                sum[k] += p[k];
            }
        }
        let n = n.max(1) as f64;
        [sum[0] / n, sum[1] / n, sum[2] / n]
    }
}
