//! Synthetic dichromatic renderer.
//!
//! Orthographic view of shaded spheres lit by one distant light. Each pixel is
//! `kappa * B + beta * L` where `B` is the camera response to light reflected
//! by the sphere's reflectance, `L` the response to the light itself (neutral
//! interface), `kappa = a . n` Lambertian shading and
//! `beta = factor * (h . n)^power` a Phong lobe around the half-way vector.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::LinearImage;
use crate::spectra::{colorchecker_patch, Illuminant, SensorSet, SpectralCurve};

/// ColorChecker patches used by [`SceneSpec::glossy_spheres`].
pub const GLOSSY_PATCHES: [usize; 5] = [1, 4, 9, 13, 15];

#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub center_px: [f64; 2],
    pub radius_px: f64,
    pub reflectance: SpectralCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneLight {
    pub illuminant: Illuminant,
    /// Unit vector pointing from the surface towards the light.
    pub direction: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phong {
    pub factor: f64,
    pub power: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub spheres: Vec<Sphere>,
    pub light: SceneLight,
    pub phong: Phong,
    /// Unit vector from the surface towards the viewer.
    pub view: [f64; 3],
    pub width: usize,
    pub height: usize,
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("image size must be non-zero".into()));
        }
        if !(self.phong.factor >= 0.0) || !self.phong.factor.is_finite() {
            return Err(Error::InvalidArgument("phong factor must be non-negative".into()));
        }
        if self.phong.power < 1 {
            return Err(Error::InvalidArgument("phong power must be at least 1".into()));
        }
        for (name, v) in [("light direction", self.light.direction), ("view direction", self.view)] {
            if (norm3(v) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("{name} must be unit length")));
            }
        }
        for s in &self.spheres {
            if !(s.radius_px > 0.0) {
                return Err(Error::InvalidArgument("sphere radius must be positive".into()));
            }
        }
        Ok(())
    }

    /// Three spheres side by side in ColorChecker patches 1, 4 and 9 (dark
    /// skin, foliage, moderate red), Phong factor 1 and power 20, lit from the
    /// viewing direction by a Planckian at `temperature_k`.
    pub fn three_patch_spheres(temperature_k: f64) -> Result<SceneSpec> {
        let patches = [1, 4, 9];
        let radius = 40.0;
        let spheres = patches
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                Ok(Sphere {
                    center_px: [48.0 + 96.0 * i as f64, 48.0],
                    radius_px: radius,
                    reflectance: colorchecker_patch(p)?.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneSpec {
            spheres,
            light: SceneLight { illuminant: Illuminant::planckian(temperature_k, 1.0)?, direction: [0.0, 0.0, 1.0] },
            phong: Phong { factor: 1.0, power: 20 },
            view: [0.0, 0.0, 1.0],
            width: 288,
            height: 96,
        })
    }

    /// Row of glossy spheres in the given ColorChecker patches.
    pub fn sphere_row(patches: &[usize], temperature_k: f64, phong: Phong, radius_px: f64) -> Result<SceneSpec> {
        let pitch = 2.0 * radius_px + 8.0;
        let spheres = patches
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                Ok(Sphere {
                    center_px: [pitch / 2.0 + pitch * i as f64, pitch / 2.0],
                    radius_px,
                    reflectance: colorchecker_patch(p)?.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneSpec {
            spheres,
            light: SceneLight { illuminant: Illuminant::planckian(temperature_k, 1.0)?, direction: [0.0, 0.0, 1.0] },
            phong,
            view: [0.0, 0.0, 1.0],
            width: (pitch * patches.len() as f64).ceil() as usize,
            height: pitch.ceil() as usize,
        })
    }

    /// Five glossy spheres (patches 1, 4, 9, 13, 15) with a strong, broad
    /// highlight: Phong factor 20 and power 10.
    pub fn glossy_spheres(temperature_k: f64) -> Result<SceneSpec> {
        Self::sphere_row(&GLOSSY_PATCHES, temperature_k, Phong { factor: 20.0, power: 10 }, 30.0)
    }

    pub fn with_illuminant(mut self, illuminant: Illuminant) -> SceneSpec {
        self.light.illuminant = illuminant;
        self
    }
}

/// Rendered image with its ground-truth layers.
#[derive(Debug, Clone)]
pub struct RenderedImage {
    pub rgb: LinearImage,
    /// The same scene with the specular term zeroed.
    pub matte_rgb: LinearImage,
    /// Sphere id per pixel, 1-based; 0 is background.
    pub mask: Vec<u16>,
    /// Per-pixel Lambertian shading `kappa` and specular weight `beta`.
    pub shading: Vec<f64>,
    pub specular: Vec<f64>,
}

impl RenderedImage {
    /// The specular layer `rgb - matte_rgb`.
    pub fn specular_rgb(&self) -> LinearImage {
        let data = self
            .rgb
            .pixels()
            .iter()
            .zip(self.matte_rgb.pixels())
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
            .collect();
        LinearImage::new(self.rgb.width(), self.rgb.height(), data).expect("same shape")
    }
}

struct SpherePrep {
    center: [f64; 2],
    radius: f64,
    body: [f64; 3],
}

pub fn render(scene: &SceneSpec, sensors: &SensorSet) -> Result<RenderedImage> {
    scene.validate()?;
    let light = sensors.response(&scene.light.illuminant, None)?;
    let preps = scene
        .spheres
        .iter()
        .map(|s| {
            Ok(SpherePrep {
                center: s.center_px,
                radius: s.radius_px,
                body: sensors.response(&scene.light.illuminant, Some(&s.reflectance))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let a = scene.light.direction;
    let half = normalize3([a[0] + scene.view[0], a[1] + scene.view[1], a[2] + scene.view[2]]);
    let phong = scene.phong;
    let width = scene.width;

    let rows: Vec<Vec<(u16, f64, f64, [f64; 3], [f64; 3])>> = (0..scene.height)
        .into_par_iter()
        .map(|y| {
            (0..width)
                .map(|x| {
                    let px = x as f64 + 0.5;
                    let py = y as f64 + 0.5;
                    let mut best: Option<(usize, [f64; 3], f64)> = None;
                    for (i, s) in preps.iter().enumerate() {
                        let dx = (px - s.center[0]) / s.radius;
                        let dy = (py - s.center[1]) / s.radius;
                        let d2 = dx * dx + dy * dy;
                        if d2 >= 1.0 {
                            continue;
                        }
                        let nz = (1.0 - d2).sqrt();
                        let height = nz * s.radius;
                        if best.is_none_or(|(_, _, h)| height > h) {
                            best = Some((i, [dx, -dy, nz], height));
                        }
                    }
                    match best {
                        None => (0, 0.0, 0.0, [0.0; 3], [0.0; 3]),
                        Some((i, n, _)) => {
                            let kappa = dot(a, n).max(0.0);
                            let beta = if kappa > 0.0 {
                                phong.factor * dot(half, n).max(0.0).powi(phong.power as i32)
                            } else {
                                0.0
                            };
                            let body = preps[i].body;
                            let matte = [kappa * body[0], kappa * body[1], kappa * body[2]];
                            let rgb = [
                                matte[0] + beta * light[0],
                                matte[1] + beta * light[1],
                                matte[2] + beta * light[2],
                            ];
                            ((i + 1) as u16, kappa, beta, rgb, matte)
                        }
                    }
                })
                .collect()
        })
        .collect();

    let n = width * scene.height;
    let mut rgb = Vec::with_capacity(n);
    let mut matte = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut shading = Vec::with_capacity(n);
    let mut specular = Vec::with_capacity(n);
    for (id, kappa, beta, c, m) in rows.into_iter().flatten() {
        mask.push(id);
        shading.push(kappa);
        specular.push(beta);
        rgb.push(c);
        matte.push(m);
    }
    Ok(RenderedImage {
        rgb: LinearImage::new(width, scene.height, rgb)?,
        matte_rgb: LinearImage::new(width, scene.height, matte)?,
        mask,
        shading,
        specular,
    })
}

/// Peak signal-to-noise ratio in dB for images on a unit scale.
///
/// Values are mapped to 0-255 and clipped before comparison; identical images
/// give `f64::INFINITY`.
pub fn psnr(a: &LinearImage, b: &LinearImage) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty images".into()));
    }
    let to255 = |v: f64| (v * 255.0).clamp(0.0, 255.0);
    let mut sq = 0.0;
    for (p, q) in a.pixels().iter().zip(b.pixels()) {
        for k in 0..3 {
            let d = to255(p[k]) - to255(q[k]);
            sq += d * d;
        }
    }
    let mse = sq / (3 * a.len()) as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{wien, CurveKind};

    #[test]
    fn no_specular_means_matte_equals_rgb() {
        let mut scene = SceneSpec::three_patch_spheres(6500.0).unwrap();
        scene.phong.factor = 0.0;
        let out = render(&scene, &SensorSet::default_delta()).unwrap();
        assert_eq!(out.rgb.pixels(), out.matte_rgb.pixels());
    }

    #[test]
    fn three_sphere_preset_matches_setup() {
        let scene = SceneSpec::three_patch_spheres(6500.0).unwrap();
        assert_eq!(scene.spheres.len(), 3);
        assert_eq!(scene.phong, Phong { factor: 1.0, power: 20 });
        assert_eq!(&scene.spheres[0].reflectance, colorchecker_patch(1).unwrap());
        assert_eq!(&scene.spheres[1].reflectance, colorchecker_patch(4).unwrap());
        assert_eq!(&scene.spheres[2].reflectance, colorchecker_patch(9).unwrap());
        assert_eq!(scene.light.illuminant.temperature(), Some(6500.0));
        let out = render(&scene, &SensorSet::default_delta()).unwrap();
        for (p, m) in out.rgb.pixels().iter().zip(out.matte_rgb.pixels()) {
            for k in 0..3 {
                assert!(p[k] >= m[k]);
            }
        }
        assert_eq!(out.mask[0], 0);
        assert_eq!(out.rgb.pixels()[0], [0.0; 3]);
    }

    #[test]
    fn white_sphere_centre_is_closed_form() {
        let grid = crate::spectra::default_grid();
        let white = SpectralCurve::constant(CurveKind::Reflectance, &grid, 1.0).unwrap();
        let t = 5000.0;
        let scene = SceneSpec {
            spheres: vec![Sphere { center_px: [10.5, 10.5], radius_px: 8.0, reflectance: white }],
            light: SceneLight { illuminant: Illuminant::planckian(t, 1.0).unwrap(), direction: [0.0, 0.0, 1.0] },
            phong: Phong { factor: 0.7, power: 20 },
            view: [0.0, 0.0, 1.0],
            width: 21,
            height: 21,
        };
        let out = render(&scene, &SensorSet::default_delta()).unwrap();
        // Pixel (10, 10) has its centre exactly on the sphere axis: n = a, kappa = 1, beta = 0.7.
        let p = out.rgb.get(10, 10);
        let lambdas = [610.0, 540.0, 450.0];
        for k in 0..3 {
            let expected = wien(lambdas[k], t) * (1.0 + 0.7);
            assert!(((p[k] - expected) / expected).abs() < 1e-14);
        }
    }

    #[test]
    fn intensity_scales_linearly() {
        let scene = SceneSpec::three_patch_spheres(6500.0).unwrap();
        let doubled = scene.clone().with_illuminant(Illuminant::planckian(6500.0, 2.0).unwrap());
        let sensors = SensorSet::default_delta();
        let a = render(&scene, &sensors).unwrap();
        let b = render(&doubled, &sensors).unwrap();
        for (p, q) in a.rgb.pixels().iter().zip(b.rgb.pixels()) {
            for k in 0..3 {
                assert_eq!(2.0 * p[k], q[k]);
            }
        }
        let tripled = scene.clone().with_illuminant(Illuminant::planckian(6500.0, 3.0).unwrap());
        let c = render(&tripled, &sensors).unwrap();
        for (p, q) in a.matte_rgb.pixels().iter().zip(c.matte_rgb.pixels()) {
            for k in 0..3 {
                assert!((3.0 * p[k] - q[k]).abs() <= 1e-14 * q[k].abs());
            }
        }
    }

    #[test]
    fn specular_term_is_additive_and_local() {
        let scene = SceneSpec::three_patch_spheres(6500.0).unwrap();
        let sensors = SensorSet::default_delta();
        let out = render(&scene, &sensors).unwrap();
        let light = sensors.response(&scene.light.illuminant, None).unwrap();
        for i in 0..out.rgb.len() {
            let p = out.rgb.pixels()[i];
            let m = out.matte_rgb.pixels()[i];
            let beta = out.specular[i];
            if beta == 0.0 {
                assert_eq!(p, m);
            }
            for k in 0..3 {
                let expected = m[k] + beta * light[k];
                assert!((p[k] - expected).abs() <= 1e-14 * p[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn validation_rejects_bad_scenes() {
        let mut scene = SceneSpec::three_patch_spheres(6500.0).unwrap();
        scene.phong.power = 0;
        assert!(scene.validate().is_err());
        let mut scene = SceneSpec::three_patch_spheres(6500.0).unwrap();
        scene.light.direction = [0.0, 0.0, 2.0];
        assert!(scene.validate().is_err());
        let mut scene = SceneSpec::three_patch_spheres(6500.0).unwrap();
        scene.phong.factor = -1.0;
        assert!(scene.validate().is_err());
    }

    #[test]
    fn psnr_examples() {
        let a = LinearImage::from_pixels(vec![[0.2, 0.4, 0.6]; 4]);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = a.map(|p| [p[0] + 16.0 / 255.0, p[1] + 16.0 / 255.0, p[2] + 16.0 / 255.0]);
        let expected = 10.0 * (255.0_f64 * 255.0 / 256.0).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-9);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let c = LinearImage::from_pixels(vec![[0.2, 0.4, 0.6]; 3]);
        assert!(psnr(&a, &c).is_err());
    }

    #[test]
    fn psnr_clips_out_of_range_values() {
        let a = LinearImage::from_pixels(vec![[1.5, 0.0, -0.5]]);
        let b = LinearImage::from_pixels(vec![[1.0, 0.0, 0.0]]);
        assert_eq!(psnr(&a, &b).unwrap(), f64::INFINITY);
    }
}
