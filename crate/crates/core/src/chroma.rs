//! Geometric-mean log-chromaticity, its 2-D projection `chi`, and the L1
//! chromaticity `rho`.
//!
//! Dividing by the geometric mean puts every `log r` on the plane orthogonal
//! to `(1, 1, 1)`. The fixed basis [`ProjectionBasis::CANONICAL`] spans that
//! plane so `chi = U log r` is identical across runs and calibration profiles.

use std::io::Write;

use crate::error::{Error, Result};
use crate::image::LinearImage;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT6: f64 = 0.408_248_290_463_863_f64;

/// A 2x3 matrix with orthonormal rows spanning the plane orthogonal to `(1, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionBasis {
    pub rows: [[f64; 3]; 2],
}

impl ProjectionBasis {
    /// Rows `(1, -1, 0) / sqrt 2` and `(1, 1, -2) / sqrt 6`.
    pub const CANONICAL: ProjectionBasis = ProjectionBasis {
        rows: [[INV_SQRT2, -INV_SQRT2, 0.0], [INV_SQRT6, INV_SQRT6, -2.0 * INV_SQRT6]],
    };

    /// Identifier stored in calibration profiles.
    pub const CANONICAL_ID: &'static str = "canonical-v1";

    pub fn project(&self, v: [f64; 3]) -> [f64; 2] {
        [dot3(self.rows[0], v), dot3(self.rows[1], v)]
    }

    /// `U^T chi`: the zero-sum 3-vector that projects to `chi`.
    pub fn lift(&self, chi: [f64; 2]) -> [f64; 3] {
        let [a, b] = self.rows;
        [
            a[0] * chi[0] + b[0] * chi[1],
            a[1] * chi[0] + b[1] * chi[1],
            a[2] * chi[0] + b[2] * chi[1],
        ]
    }
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Optional 3x3 sharpening transform applied to camera RGB before chromaticity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sharpening(pub [[f64; 3]; 3]);

impl Sharpening {
    pub const IDENTITY: Sharpening = Sharpening([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn apply(&self, rgb: [f64; 3]) -> [f64; 3] {
        [dot3(self.0[0], rgb), dot3(self.0[1], rgb), dot3(self.0[2], rgb)]
    }
}

/// Geometric-mean chromaticity of one RGB triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChromaVec {
    pub r: [f64; 3],
    pub logr: [f64; 3],
    pub chi: [f64; 2],
}

/// `r_k = R_k / (R_1 R_2 R_3)^(1/3)`; fails for any non-positive channel.
pub fn geomean_chroma(rgb: [f64; 3]) -> Result<ChromaVec> {
    if rgb.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::InvalidPixel(format!("non-positive channel in {rgb:?}")));
    }
    let logs = [rgb[0].ln(), rgb[1].ln(), rgb[2].ln()];
    let mean = (logs[0] + logs[1] + logs[2]) / 3.0;
    let logr = [logs[0] - mean, logs[1] - mean, logs[2] - mean];
    Ok(ChromaVec {
        r: [logr[0].exp(), logr[1].exp(), logr[2].exp()],
        logr,
        chi: ProjectionBasis::CANONICAL.project(logr),
    })
}

/// `rho = RGB / (R + G + B)`.
pub fn l1_chroma(rgb: [f64; 3]) -> Result<[f64; 3]> {
    let sum = rgb[0] + rgb[1] + rgb[2];
    if !(sum > 0.0) || !sum.is_finite() || rgb.iter().any(|&c| c < 0.0) {
        return Err(Error::InvalidPixel(format!("cannot form L1 chromaticity of {rgb:?}")));
    }
    Ok([rgb[0] / sum, rgb[1] / sum, rgb[2] / sum])
}

/// Maps a point of the chi plane to L1 chromaticity.
pub fn locus_to_l1(chi: [f64; 2]) -> [f64; 3] {
    let logr = ProjectionBasis::CANONICAL.lift(chi);
    let r = [logr[0].exp(), logr[1].exp(), logr[2].exp()];
    let sum = r[0] + r[1] + r[2];
    [r[0] / sum, r[1] / sum, r[2] / sum]
}

/// 2-D coordinates of an L1 chromaticity inside the plane `sum = 1`.
pub fn l1_plane(rho: [f64; 3]) -> [f64; 2] {
    ProjectionBasis::CANONICAL.project(rho)
}

/// Inverse of [`l1_plane`].
pub fn l1_from_plane(p: [f64; 2]) -> [f64; 3] {
    let v = ProjectionBasis::CANONICAL.lift(p);
    [v[0] + 1.0 / 3.0, v[1] + 1.0 / 3.0, v[2] + 1.0 / 3.0]
}

/// Per-pixel reliability after the clamping policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelStatus {
    Valid,
    /// At least one channel was clamped up to the floor.
    Clamped,
    /// Excluded by the image mask (saturation, dataset mask).
    Excluded,
    /// Non-finite or negative data, or an all-zero image.
    Invalid,
}

impl PixelStatus {
    pub fn is_valid(self) -> bool {
        self == PixelStatus::Valid
    }

    pub fn code(self) -> u8 {
        match self {
            PixelStatus::Valid => 0,
            PixelStatus::Clamped => 1,
            PixelStatus::Excluded => 2,
            PixelStatus::Invalid => 3,
        }
    }
}

/// Chromaticity of every pixel of an image.
#[derive(Debug, Clone)]
pub struct ChromaField {
    pub width: usize,
    pub height: usize,
    pub vecs: Vec<ChromaVec>,
    pub status: Vec<PixelStatus>,
}

/// Channels below this fraction of the image maximum are clamped and flagged.
pub const CLAMP_FRACTION: f64 = 1e-6;

impl ChromaField {
    pub fn from_image(image: &LinearImage, sharpening: Option<&Sharpening>) -> ChromaField {
        let transformed: Vec<[f64; 3]> = match sharpening {
            Some(m) => image.pixels().iter().map(|&p| m.apply(p)).collect(),
            None => image.pixels().to_vec(),
        };
        let max = transformed
            .iter()
            .zip(image.excluded())
            .filter(|(_, &ex)| !ex)
            .flat_map(|(p, _)| p.iter().copied())
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        let floor = CLAMP_FRACTION * max;
        let origin = ChromaVec { r: [1.0; 3], logr: [0.0; 3], chi: [0.0; 2] };
        let mut vecs = Vec::with_capacity(transformed.len());
        let mut status = Vec::with_capacity(transformed.len());
        for (p, &ex) in transformed.iter().zip(image.excluded()) {
            if !(floor > 0.0) || p.iter().any(|v| !v.is_finite()) {
                vecs.push(origin);
                status.push(PixelStatus::Invalid);
                continue;
            }
            let clamped = p.iter().any(|&v| v < floor);
            let q = [p[0].max(floor), p[1].max(floor), p[2].max(floor)];
            vecs.push(geomean_chroma(q).unwrap_or(origin));
            status.push(if ex {
                PixelStatus::Excluded
            } else if clamped {
                PixelStatus::Clamped
            } else {
                PixelStatus::Valid
            });
        }
        ChromaField { width: image.width(), height: image.height(), vecs, status }
    }

    pub fn valid_count(&self) -> usize {
        self.status.iter().filter(|s| s.is_valid()).count()
    }

    /// Writes `x,y,flag` rows of chi, one per pixel.
    pub fn write_chi_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "x,y,flag")?;
        for (v, s) in self.vecs.iter().zip(&self.status) {
            writeln!(out, "{},{},{}", v.chi[0], v.chi[1], s.code())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal_and_annihilates_grey() {
        let u = ProjectionBasis::CANONICAL;
        for i in 0..2 {
            for j in 0..2 {
                let d = dot3(u.rows[i], u.rows[j]);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((d - expected).abs() < 1e-12);
            }
            assert!(dot3(u.rows[i], [1.0, 1.0, 1.0]).abs() < 1e-12);
        }
        assert!((INV_SQRT6 - 1.0 / 6.0_f64.sqrt()).abs() < 1e-16);
    }

    #[test]
    fn grey_is_the_origin() {
        for k in [1e-4, 0.5, 7.0, 1e30] {
            let c = geomean_chroma([k, k, k]).unwrap();
            for i in 0..3 {
                assert!((c.r[i] - 1.0).abs() < 1e-12);
                assert!(c.logr[i].abs() < 1e-12);
            }
            assert!(c.chi[0].abs() < 1e-12 && c.chi[1].abs() < 1e-12);
        }
    }

    #[test]
    fn geometric_mean_is_analytic() {
        let c = geomean_chroma([1.0, 2.0, 4.0]).unwrap();
        let expected = [0.5, 1.0, 2.0];
        for k in 0..3 {
            assert!((c.r[k] - expected[k]).abs() < 1e-12);
        }
        assert!((c.r.iter().product::<f64>() - 1.0).abs() < 1e-9);
        assert!(c.logr.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn exposure_scale_cancels() {
        let rgb = [0.3, 0.7, 0.11];
        let base = geomean_chroma(rgb).unwrap();
        for s in [0.1, 3.0, 100.0] {
            let c = geomean_chroma([rgb[0] * s, rgb[1] * s, rgb[2] * s]).unwrap();
            assert!((c.chi[0] - base.chi[0]).abs() < 1e-12);
            assert!((c.chi[1] - base.chi[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_channels_are_invalid() {
        assert!(geomean_chroma([0.0, 1.0, 1.0]).is_err());
        assert!(geomean_chroma([-1.0, 1.0, 1.0]).is_err());
        assert!(geomean_chroma([f64::NAN, 1.0, 1.0]).is_err());
    }

    #[test]
    fn l1_examples() {
        let a = l1_chroma([1.0, 1.0, 1.0]).unwrap();
        for v in a {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(l1_chroma([2.0, 1.0, 1.0]).unwrap(), [0.5, 0.25, 0.25]);
        assert!(l1_chroma([0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn locus_origin_is_grey() {
        let rho = locus_to_l1([0.0, 0.0]);
        for v in rho {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn chi_rho_round_trip() {
        for chi in [[0.1, -0.2], [-0.7, 0.4], [1.3, 0.9], [0.0, -1.5]] {
            let rho = locus_to_l1(chi);
            assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let back = geomean_chroma(rho).unwrap().chi;
            assert!((back[0] - chi[0]).abs() < 1e-9 && (back[1] - chi[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn l1_plane_round_trip() {
        let rho = [0.5, 0.3, 0.2];
        let back = l1_from_plane(l1_plane(rho));
        for k in 0..3 {
            assert!((back[k] - rho[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn clamping_flags_dark_channels() {
        let img = LinearImage::from_pixels(vec![[1.0, 0.5, 0.25], [0.0, 0.0, 0.0], [1.0, 1e-9, 1.0], [0.2, 0.2, 0.2]])
            .with_excluded(vec![false, false, false, true])
            .unwrap();
        let field = ChromaField::from_image(&img, None);
        assert_eq!(
            field.status,
            vec![PixelStatus::Valid, PixelStatus::Clamped, PixelStatus::Clamped, PixelStatus::Excluded]
        );
        assert_eq!(field.valid_count(), 1);
        for v in &field.vecs {
            assert!(v.logr.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn black_image_is_invalid() {
        let img = LinearImage::zeros(2, 2);
        let field = ChromaField::from_image(&img, None);
        assert!(field.status.iter().all(|s| *s == PixelStatus::Invalid));
    }

    #[test]
    fn identity_sharpening_is_a_no_op() {
        let img = LinearImage::from_pixels(vec![[1.0, 0.5, 0.25], [0.3, 0.9, 0.1]]);
        let a = ChromaField::from_image(&img, None);
        let b = ChromaField::from_image(&img, Some(&Sharpening::IDENTITY));
        assert_eq!(a.vecs, b.vecs);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let img = LinearImage::from_pixels(vec![[1.0, 1.0, 1.0], [0.0, 1.0, 1.0]]);
        let field = ChromaField::from_image(&img, None);
        let mut buf = Vec::new();
        field.write_chi_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,flag");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",0"));
        assert!(lines[2].ends_with(",1"));
    }
}
