//! Relighting by the diagonal transform `M = diag(rho_e') diag(rho_e)^-1`.
//!
//! Values stay linear and unclipped; [`ClipPolicy`] is applied only when an
//! image is exported.

use crate::calib::LocusParams;
use crate::error::{Error, Result};
use crate::illum::{estimate_zeta_locus, TempSearch};
use crate::image::LinearImage;

/// A light given by chromaticity or by temperature on the locus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightSpec {
    Chromaticity([f64; 3]),
    Temperature(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClipPolicy {
    /// Clip each channel to the display range.
    #[default]
    Clip,
    /// Divide by the image maximum when it exceeds the display range.
    Rescale,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelightSpec {
    pub source: LightSpec,
    pub target: LightSpec,
    pub clip: ClipPolicy,
}

impl LightSpec {
    pub fn resolve(&self, locus: Option<&LocusParams>) -> Result<[f64; 3]> {
        match *self {
            LightSpec::Chromaticity(rho) => {
                if rho.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(Error::Singular(format!("light chromaticity {rho:?} has a non-positive channel")));
                }
                Ok(rho)
            }
            LightSpec::Temperature(t) => {
                let locus = locus.ok_or_else(|| Error::InvalidArgument("a temperature needs a locus".into()))?;
                if !(t > 0.0) || !t.is_finite() {
                    return Err(Error::InvalidArgument(format!("temperature must be positive, got {t}")));
                }
                Ok(locus.rho_at(t))
            }
        }
    }
}

/// Diagonal entries `rho_target_k / rho_source_k`.
pub fn diagonal(source: [f64; 3], target: [f64; 3]) -> Result<[f64; 3]> {
    if source.iter().chain(&target).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Singular("relighting needs strictly positive chromaticities".into()));
    }
    Ok([target[0] / source[0], target[1] / source[1], target[2] / source[2]])
}

pub fn apply_diagonal(image: &LinearImage, m: [f64; 3]) -> LinearImage {
    image.map(|p| [p[0] * m[0], p[1] * m[1], p[2] * m[2]])
}

pub fn relight(image: &LinearImage, spec: &RelightSpec, locus: Option<&LocusParams>) -> Result<LinearImage> {
    let source = spec.source.resolve(locus)?;
    let target = spec.target.resolve(locus)?;
    if source == target {
        return Ok(image.clone());
    }
    Ok(apply_diagonal(image, diagonal(source, target)?))
}

/// Relights `image` to every temperature in `temps`.
///
/// The source light defaults to the locus-constrained zeta estimate.
pub fn temperature_sweep(
    image: &LinearImage,
    locus: &LocusParams,
    temps: &[f64],
    source: Option<LightSpec>,
) -> Result<Vec<LinearImage>> {
    if temps.is_empty() {
        return Ok(Vec::new());
    }
    locus.validate()?;
    let source = match source {
        Some(s) => s,
        None => {
            let est = estimate_zeta_locus(image, locus, &TempSearch::for_locus(locus)?)?;
            LightSpec::Temperature(est.temperature_k.expect("locus estimate has a temperature"))
        }
    };
    temps
        .iter()
        .map(|&t| {
            relight(image, &RelightSpec { source, target: LightSpec::Temperature(t), clip: ClipPolicy::Clip }, Some(locus))
        })
        .collect()
}

/// Display-range version of a relit image.
pub fn apply_clip(image: &LinearImage, policy: ClipPolicy) -> LinearImage {
    match policy {
        ClipPolicy::Clip => image.map(|p| [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0), p[2].clamp(0.0, 1.0)]),
        ClipPolicy::Rescale => {
            let m = image.max_value();
            let scaled = if m > 1.0 { image.scaled(1.0 / m) } else { image.clone() };
            scaled.map(|p| [p[0].max(0.0), p[1].max(0.0), p[2].max(0.0)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{render, SceneSpec};
    use crate::spectra::SensorSet;

    fn test_image() -> LinearImage {
        LinearImage::new(2, 2, vec![[0.2, 0.4, 0.1], [0.9, 0.5, 0.3], [0.01, 0.02, 0.5], [0.7, 0.7, 0.7]]).unwrap()
    }

    fn locus() -> LocusParams {
        LocusParams::for_sensors(&SensorSet::default_delta(), [4000.0, 10000.0]).unwrap()
    }

    #[test]
    fn identity_when_source_equals_target() {
        let img = test_image();
        let spec = RelightSpec {
            source: LightSpec::Temperature(6500.0),
            target: LightSpec::Temperature(6500.0),
            clip: ClipPolicy::Clip,
        };
        assert_eq!(relight(&img, &spec, Some(&locus())).unwrap(), img);
    }

    #[test]
    fn round_trip_and_composition() {
        let img = test_image();
        let l = locus();
        let go = |a: f64, b: f64, im: &LinearImage| {
            relight(
                im,
                &RelightSpec { source: LightSpec::Temperature(a), target: LightSpec::Temperature(b), clip: ClipPolicy::Clip },
                Some(&l),
            )
            .unwrap()
        };
        let back = go(9000.0, 4000.0, &go(4000.0, 9000.0, &img));
        let direct = go(4000.0, 6000.0, &img);
        let composed = go(9000.0, 6000.0, &go(4000.0, 9000.0, &img));
        for i in 0..img.len() {
            for k in 0..3 {
                let v = img.pixels()[i][k];
                assert!((back.pixels()[i][k] - v).abs() <= 1e-12 * v);
                assert!((composed.pixels()[i][k] - direct.pixels()[i][k]).abs() <= 1e-12 * direct.pixels()[i][k]);
            }
        }
    }

    #[test]
    fn source_coloured_pixel_maps_to_target() {
        let l = locus();
        let src = l.rho_at(5000.0);
        let dst = l.rho_at(8000.0);
        let img = LinearImage::from_pixels(vec![[src[0] * 3.0, src[1] * 3.0, src[2] * 3.0]]);
        let out = relight(
            &img,
            &RelightSpec { source: LightSpec::Chromaticity(src), target: LightSpec::Chromaticity(dst), clip: ClipPolicy::Clip },
            None,
        )
        .unwrap();
        let p = out.pixels()[0];
        let s = p[0] + p[1] + p[2];
        for k in 0..3 {
            assert!((p[k] / s - dst[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_chromaticity_is_singular() {
        let spec = RelightSpec {
            source: LightSpec::Chromaticity([0.5, 0.5, 0.0]),
            target: LightSpec::Chromaticity([0.3, 0.3, 0.4]),
            clip: ClipPolicy::Clip,
        };
        assert!(matches!(relight(&test_image(), &spec, None), Err(Error::Singular(_))));
        let t = RelightSpec { source: LightSpec::Temperature(5000.0), ..spec };
        assert!(matches!(relight(&test_image(), &t, None), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn delta_relight_matches_rerender() {
        let sensors = SensorSet::default_delta();
        let l = locus();
        let a = render(&SceneSpec::three_patch_spheres(5000.0).unwrap(), &sensors).unwrap().rgb;
        let b = render(&SceneSpec::three_patch_spheres(9000.0).unwrap(), &sensors).unwrap().rgb;
        let relit = relight(
            &a,
            &RelightSpec { source: LightSpec::Temperature(5000.0), target: LightSpec::Temperature(9000.0), clip: ClipPolicy::Clip },
            Some(&l),
        )
        .unwrap();
        let (sa, sb) = (relit.max_value(), b.max_value());
        let mut worst = 0.0_f64;
        for (p, q) in relit.pixels().iter().zip(b.pixels()) {
            for k in 0..3 {
                if q[k] > 0.0 {
                    worst = worst.max((p[k] / sa - q[k] / sb).abs() / (q[k] / sb));
                }
            }
        }
        assert!(worst < 1e-9, "worst relative error {worst}");
    }

    #[test]
    fn sweep_edge_cases() {
        let l = locus();
        assert!(temperature_sweep(&test_image(), &l, &[], None).unwrap().is_empty());
        let out = temperature_sweep(&test_image(), &l, &[6500.0], Some(LightSpec::Temperature(6500.0))).unwrap();
        assert_eq!(out[0], test_image());
    }

    #[test]
    fn clip_policies() {
        let img = LinearImage::from_pixels(vec![[2.0, 0.5, -0.1]]);
        assert_eq!(apply_clip(&img, ClipPolicy::Clip).pixels()[0], [1.0, 0.5, 0.0]);
        assert_eq!(apply_clip(&img, ClipPolicy::Rescale).pixels()[0], [1.0, 0.25, 0.0]);
    }
}
