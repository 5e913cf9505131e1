//! Specular-free matte chromaticity by angular projection around the
//! specular point.
//!
//! A pixel mixing body colour and light colour lies on the segment between
//! the body chromaticity and the specular point, so its angle around the
//! specular point identifies the body colour. Every pixel is moved radially to
//! the far end of its one-degree bin. Pixels very close to the specular point
//! carry no reliable angle and are resolved from their image neighbours.

use std::collections::HashMap;

use crate::calib::LocusParams;
use crate::chroma::{geomean_chroma, l1_from_plane, l1_plane, locus_to_l1};
use crate::error::{Error, Result};
use crate::illum::{estimate_zeta_locus_field, IlluminantEstimate, RhoField, TempSearch};
use crate::image::LinearImage;

pub const BINS: usize = 360;
/// Radius percentile used as the bin representative.
pub const REPRESENTATIVE_PERCENTILE: f64 = 0.98;
/// Fraction of valid pixels nearest the specular point that are inpainted.
pub const NEAR_FRACTION: f64 = 0.10;
pub const MAX_VOTE_ITERATIONS: usize = 50;

/// Plane in which angles around the specular point are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MattePlane {
    /// L1 chromaticity plane, where body-plus-specular mixtures are straight segments.
    #[default]
    L1,
    /// The log-chromaticity chi plane.
    LogChi,
}

impl MattePlane {
    pub fn coords(self, rho: [f64; 3]) -> Result<[f64; 2]> {
        match self {
            MattePlane::L1 => Ok(l1_plane(rho)),
            MattePlane::LogChi => Ok(geomean_chroma(rho)?.chi),
        }
    }

    pub fn to_rho(self, p: [f64; 2]) -> [f64; 3] {
        match self {
            MattePlane::L1 => l1_from_plane(p),
            MattePlane::LogChi => locus_to_l1(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarChroma {
    pub r: f64,
    /// Degrees in `[0, 360)`.
    pub theta: f64,
    pub bin: usize,
}

/// Polar coordinates of `v` around `s`; `None` when they coincide.
pub fn polar(v: [f64; 2], s: [f64; 2]) -> Option<PolarChroma> {
    let d = [v[0] - s[0], v[1] - s[1]];
    let r = d[0].hypot(d[1]);
    if !(r > 0.0) {
        return None;
    }
    let mut theta = d[1].atan2(d[0]).to_degrees();
    if theta < 0.0 {
        theta += 360.0;
    }
    if theta >= 360.0 {
        theta = 0.0;
    }
    Some(PolarChroma { r, theta, bin: (theta.floor() as usize).min(BINS - 1) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatteResult {
    /// Matte chroma per pixel in the working plane (input value for invalid pixels).
    pub chroma: Vec<[f64; 2]>,
    /// Pixel index chosen as each bin's representative.
    pub representative: Vec<Option<usize>>,
    /// Pixels resolved by neighbour voting.
    pub inpainted: Vec<bool>,
    /// Near-specular pixels the vote could not resolve.
    pub unresolved: Vec<bool>,
}

/// Maps every valid pixel to the 98th-percentile-radius pixel of its angle bin.
pub fn angular_project(points: &[[f64; 2]], valid: &[bool], specular: [f64; 2]) -> Result<MatteResult> {
    if points.len() != valid.len() {
        return Err(Error::InvalidArgument("points and validity mask differ in length".into()));
    }
    if !specular[0].is_finite() || !specular[1].is_finite() {
        return Err(Error::InvalidArgument("specular point must be finite".into()));
    }
    let polars: Vec<Option<PolarChroma>> =
        points.iter().zip(valid).map(|(p, &ok)| if ok { polar(*p, specular) } else { None }).collect();
    let mut bins: Vec<Vec<(f64, usize)>> = vec![Vec::new(); BINS];
    for (i, pc) in polars.iter().enumerate() {
        if let Some(pc) = pc {
            bins[pc.bin].push((pc.r, i));
        }
    }
    if bins.iter().all(|b| b.is_empty()) {
        return Err(Error::Degenerate("every valid pixel coincides with the specular point".into()));
    }
    let representative: Vec<Option<usize>> = bins
        .iter_mut()
        .map(|b| {
            if b.is_empty() {
                return None;
            }
            b.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let rank = ((REPRESENTATIVE_PERCENTILE * b.len() as f64).ceil() as usize).clamp(1, b.len()) - 1;
            let r = b[rank].0;
            let first = b.partition_point(|e| e.0 < r);
            Some(b[first].1)
        })
        .collect();
    let chroma = points
        .iter()
        .zip(&polars)
        .map(|(p, pc)| match pc {
            Some(pc) => points[representative[pc.bin].expect("occupied bin")],
            None => *p,
        })
        .collect();
    let n = points.len();
    Ok(MatteResult { chroma, representative, inpainted: vec![false; n], unresolved: vec![false; n] })
}

/// Indices of the `fraction` of valid pixels nearest the specular point.
pub fn near_specular_set(points: &[[f64; 2]], valid: &[bool], specular: [f64; 2], fraction: f64) -> Vec<usize> {
    let mut idx: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| valid[*i])
        .map(|(i, p)| ((p[0] - specular[0]).hypot(p[1] - specular[1]), i))
        .collect();
    if idx.is_empty() || fraction <= 0.0 {
        return Vec::new();
    }
    idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let m = ((fraction * idx.len() as f64).ceil() as usize).min(idx.len());
    let mut out: Vec<usize> = idx[..m].iter().map(|e| e.1).collect();
    out.sort_unstable();
    out
}

fn key(p: [f64; 2]) -> (u64, u64) {
    (p[0].to_bits(), p[1].to_bits())
}

/// Re-resolves near-specular pixels by majority vote of their 3x3 neighbours.
///
/// Only valid neighbours that are outside the near set, or already resolved,
/// vote. A pixel adopts the most common vote when it holds at least half of
/// the votes cast, so resolution grows inward from the edge of the near
/// region. Passes are synchronous.
pub fn inpaint_near_specular(
    result: &MatteResult,
    width: usize,
    height: usize,
    near: &[usize],
    valid: &[bool],
) -> Result<MatteResult> {
    let n = width * height;
    if result.chroma.len() != n || valid.len() != n {
        return Err(Error::InvalidArgument("image shape does not match the matte result".into()));
    }
    let mut out = result.clone();
    if near.is_empty() {
        return Ok(out);
    }
    let mut in_near = vec![false; n];
    for &i in near {
        in_near[i] = true;
    }
    let mut resolved = vec![false; n];
    for _ in 0..MAX_VOTE_ITERATIONS {
        let mut updates = Vec::new();
        for &i in near {
            if resolved[i] {
                continue;
            }
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            let mut voters = 0usize;
            let mut counts: HashMap<(u64, u64), (usize, usize)> = HashMap::new();
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                        continue;
                    }
                    let j = ny as usize * width + nx as usize;
                    if !valid[j] {
                        continue;
                    }
                    if in_near[j] && !resolved[j] {
                        continue;
                    }
                    voters += 1;
                    let e = counts.entry(key(out.chroma[j])).or_insert((0, j));
                    e.0 += 1;
                    e.1 = e.1.min(j);
                }
            }
            let winner = counts.values().copied().max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            if let Some((count, j)) = winner {
                if 2 * count >= voters {
                    updates.push((i, out.chroma[j]));
                }
            }
        }
        if updates.is_empty() {
            break;
        }
        for (i, c) in updates {
            out.chroma[i] = c;
            resolved[i] = true;
            out.inpainted[i] = true;
        }
    }
    for &i in near {
        out.unresolved[i] = !resolved[i];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatteOptions {
    pub plane: MattePlane,
    pub near_fraction: f64,
}

impl Default for MatteOptions {
    fn default() -> Self {
        MatteOptions { plane: MattePlane::L1, near_fraction: NEAR_FRACTION }
    }
}

#[derive(Debug, Clone)]
pub struct MatteOutput {
    /// Matte chromaticity at uniform intensity (`R + G + B = 1`); zero at invalid pixels.
    pub image: LinearImage,
    /// Matte L1 chromaticity per pixel (`None` for invalid pixels).
    pub rho: Vec<Option<[f64; 3]>>,
    pub result: MatteResult,
    pub specular_point: [f64; 2],
    pub estimate: Option<IlluminantEstimate>,
}

/// Matte chromaticity for a known specular point.
pub fn matte_with_specular(image: &LinearImage, rho_e: [f64; 3], options: &MatteOptions) -> Result<MatteOutput> {
    let field = RhoField::from_image(image);
    matte_field_with_specular(&field, rho_e, options)
}

fn matte_field_with_specular(field: &RhoField, rho_e: [f64; 3], options: &MatteOptions) -> Result<MatteOutput> {
    let plane = options.plane;
    let specular = plane.coords(rho_e)?;
    let mut valid = field.valid.clone();
    let points: Vec<[f64; 2]> = field
        .rho
        .iter()
        .enumerate()
        .map(|(i, r)| match valid[i].then(|| plane.coords(*r)) {
            Some(Ok(p)) => p,
            _ => {
                valid[i] = false;
                [0.0; 2]
            }
        })
        .collect();
    if !valid.iter().any(|v| *v) {
        return Err(Error::InsufficientData("no valid pixels".into()));
    }
    let projected = angular_project(&points, &valid, specular)?;
    let near = near_specular_set(&points, &valid, specular, options.near_fraction);
    let result = inpaint_near_specular(&projected, field.width, field.height, &near, &valid)?;
    let rho: Vec<Option<[f64; 3]>> =
        result.chroma.iter().zip(&valid).map(|(p, &ok)| ok.then(|| plane.to_rho(*p))).collect();
    let data = rho.iter().map(|r| r.unwrap_or([0.0; 3])).collect();
    Ok(MatteOutput {
        image: LinearImage::new(field.width, field.height, data)?,
        rho,
        result,
        specular_point: specular,
        estimate: None,
    })
}

/// Full pipeline: locus-constrained light estimate, projection, inpainting.
pub fn matte_image(image: &LinearImage, locus: &LocusParams, options: &MatteOptions) -> Result<MatteOutput> {
    let field = RhoField::from_image(image);
    let estimate = estimate_zeta_locus_field(&field, locus, &TempSearch::for_locus(locus)?)?;
    let mut out = matte_field_with_specular(&field, estimate.rho_e, options)?;
    out.estimate = Some(estimate);
    Ok(out)
}

/// L1 distance `sum |a_k - b_k|`.
pub fn l1_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_bins() {
        let p = polar([1.0, 0.0], [0.0, 0.0]).unwrap();
        assert_eq!((p.r, p.theta, p.bin), (1.0, 0.0, 0));
        let p = polar([0.0, -1.0], [0.0, 0.0]).unwrap();
        assert_eq!(p.bin, 270);
        let p = polar([1.0, -1e-18], [0.0, 0.0]).unwrap();
        assert!(p.bin < BINS);
        assert!(polar([0.5, 0.5], [0.5, 0.5]).is_none());
    }

    #[test]
    fn uniform_colour_maps_to_itself() {
        let pts = vec![[0.2, 0.1]; 30];
        let res = angular_project(&pts, &[true; 30], [0.0, 0.0]).unwrap();
        for (a, b) in res.chroma.iter().zip(&pts) {
            assert!((a[0] - b[0]).hypot(a[1] - b[1]) < 1e-6);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let pts: Vec<[f64; 2]> =
            (0..500).map(|i| [((i * 37) % 101) as f64 / 100.0 - 0.5, ((i * 53) % 89) as f64 / 88.0 - 0.5]).collect();
        let valid = vec![true; pts.len()];
        let once = angular_project(&pts, &valid, [0.01, -0.02]).unwrap();
        let twice = angular_project(&once.chroma, &valid, [0.01, -0.02]).unwrap();
        assert_eq!(once.chroma, twice.chroma);
        for (a, b) in pts.iter().zip(&once.chroma) {
            assert_eq!(polar(*a, [0.01, -0.02]).unwrap().bin, polar(*b, [0.01, -0.02]).unwrap().bin);
        }
    }

    #[test]
    fn all_points_at_specular_point_is_degenerate() {
        let pts = vec![[0.1, 0.2]; 4];
        assert!(matches!(angular_project(&pts, &[true; 4], [0.1, 0.2]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn representative_uses_98th_percentile() {
        // 100 pixels on one ray at radii 1..=100 plus one far outlier.
        let mut pts: Vec<[f64; 2]> = (1..=100).map(|r| [r as f64, 0.0]).collect();
        pts.push([1000.0, 0.0]);
        let res = angular_project(&pts, &[true; 101], [0.0, 0.0]).unwrap();
        // ceil(0.98 * 101) = 99th smallest radius.
        assert_eq!(res.chroma[0], [99.0, 0.0]);
    }

    #[test]
    fn ties_prefer_lowest_index() {
        let pts = vec![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let res = angular_project(&pts, &[true; 3], [0.0, 0.0]).unwrap();
        assert_eq!(res.representative[0], Some(0));
    }

    fn plateau_fixture() -> (Vec<[f64; 2]>, usize, usize, Vec<usize>) {
        let (w, h) = (9, 9);
        let mut pts = vec![[0.3, 0.1]; w * h];
        let mut near = Vec::new();
        for y in 2..7 {
            for x in 2..7 {
                pts[y * w + x] = [0.01, 0.0];
                near.push(y * w + x);
            }
        }
        (pts, w, h, near)
    }

    #[test]
    fn plateau_adopts_surrounding_colour() {
        let (pts, w, h, near) = plateau_fixture();
        let valid = vec![true; w * h];
        let base = MatteResult {
            chroma: pts.clone(),
            representative: vec![None; BINS],
            inpainted: vec![false; w * h],
            unresolved: vec![false; w * h],
        };
        let out = inpaint_near_specular(&base, w, h, &near, &valid).unwrap();
        for &i in &near {
            assert_eq!(out.chroma[i], [0.3, 0.1]);
            assert!(out.inpainted[i]);
            assert!(!out.unresolved[i]);
        }
        assert_eq!(near.len(), 25);
    }

    #[test]
    fn empty_near_set_changes_nothing() {
        let (pts, w, h, _) = plateau_fixture();
        let base = MatteResult {
            chroma: pts,
            representative: vec![None; BINS],
            inpainted: vec![false; w * h],
            unresolved: vec![false; w * h],
        };
        assert_eq!(inpaint_near_specular(&base, w, h, &[], &vec![true; w * h]).unwrap(), base);
    }

    #[test]
    fn two_colour_boundary_does_not_bleed() {
        let (w, h) = (10, 9);
        let left = [0.3, 0.1];
        let right = [-0.2, 0.25];
        let mut pts: Vec<[f64; 2]> = (0..w * h).map(|i| if i % w < 5 { left } else { right }).collect();
        let mut near = Vec::new();
        for y in 3..6 {
            for x in 3..7 {
                pts[y * w + x] = [0.0, 0.001];
                near.push(y * w + x);
            }
        }
        let base = MatteResult {
            chroma: pts,
            representative: vec![None; BINS],
            inpainted: vec![false; w * h],
            unresolved: vec![false; w * h],
        };
        let out = inpaint_near_specular(&base, w, h, &near, &vec![true; w * h]).unwrap();
        for &i in &near {
            let x = i % w;
            let expected = if x < 5 { left } else { right };
            // Only the two columns touching the boundary may take the other side's colour.
            if x != 4 && x != 5 {
                assert_eq!(out.chroma[i], expected, "pixel {i}");
            }
            assert!(out.chroma[i] == left || out.chroma[i] == right);
        }
    }
}
