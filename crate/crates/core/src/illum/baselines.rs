//! White-Patch, Grey-World and Grey-Edge estimators.
//!
//! Excluded pixels are ignored by the statistics; Grey-Edge still filters the
//! whole image and only drops excluded pixels from the Minkowski sum.

use super::{normalize_estimate, IlluminantEstimate, Method};
use crate::error::{Error, Result};
use crate::image::LinearImage;

/// Published Grey-Edge settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreyEdgePreset {
    /// `p = 7, sigma = 4` as stated in the laboratory-set text.
    LabText,
    /// `p = 1, sigma = 6` as listed in the laboratory-set table.
    LabTable,
    /// `p = 1, sigma = 1` for the real-world image set.
    GreyBall,
}

impl GreyEdgePreset {
    /// `(p, sigma)`.
    pub fn params(self) -> (f64, f64) {
        match self {
            GreyEdgePreset::LabText => (7.0, 4.0),
            GreyEdgePreset::LabTable => (1.0, 6.0),
            GreyEdgePreset::GreyBall => (1.0, 1.0),
        }
    }
}

fn check(image: &LinearImage) -> Result<()> {
    if image.is_empty() {
        return Err(Error::InsufficientData("empty image".into()));
    }
    Ok(())
}

fn included(image: &LinearImage) -> impl Iterator<Item = &[f64; 3]> {
    image.pixels().iter().zip(image.excluded()).filter(|(_, &ex)| !ex).map(|(p, _)| p)
}

/// Per-channel maximum.
pub fn white_patch(image: &LinearImage) -> Result<IlluminantEstimate> {
    check(image)?;
    let mut m = [0.0_f64; 3];
    for p in included(image) {
        for k in 0..3 {
            if p[k].is_finite() {
                m[k] = m[k].max(p[k]);
            }
        }
    }
    normalize_estimate(m, Method::WhitePatch)
}

/// Per-channel mean.
pub fn grey_world(image: &LinearImage) -> Result<IlluminantEstimate> {
    check(image)?;
    let mut s = [0.0_f64; 3];
    for p in included(image) {
        for k in 0..3 {
            if p[k].is_finite() {
                s[k] += p[k];
            }
        }
    }
    normalize_estimate(s, Method::GreyWorld)
}

/// Reflect-pad index (`d c b a | a b c d | d c b a`).
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

/// Sampled Gaussian and its first derivative, both with radius `ceil(3 sigma)`.
pub(crate) fn gaussian_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let g: Vec<f64> = (-radius..=radius).map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / sum).collect();
    let dg = (-radius..=radius).zip(&g).map(|(x, v)| -(x as f64) / (sigma * sigma) * v).collect();
    (g, dg)
}

fn convolve_rows(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                acc += kv * row[reflect(x as isize + k as isize - r, w)];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn convolve_cols(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                acc += kv * src[reflect(y as isize + k as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Minkowski `p`-norm of Gaussian-derivative gradient magnitudes per channel.
pub fn grey_edge(image: &LinearImage, p: f64, sigma: f64) -> Result<IlluminantEstimate> {
    check(image)?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("Minkowski order must be at least 1, got {p}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("smoothing scale must be positive, got {sigma}")));
    }
    let (w, h) = (image.width(), image.height());
    let (g, dg) = gaussian_kernels(sigma);
    let mut est = [0.0; 3];
    for k in 0..3 {
        let chan: Vec<f64> = image.pixels().iter().map(|px| if px[k].is_finite() { px[k] } else { 0.0 }).collect();
        let dx = convolve_cols(&convolve_rows(&chan, w, h, &dg), w, h, &g);
        let dy = convolve_rows(&convolve_cols(&chan, w, h, &dg), w, h, &g);
        let mut acc = 0.0;
        for i in 0..w * h {
            if image.excluded()[i] {
                continue;
            }
            acc += dx[i].hypot(dy[i]).powf(p);
        }
        est[k] = acc.powf(1.0 / p);
    }
    normalize_estimate(est, Method::GreyEdge)
}
