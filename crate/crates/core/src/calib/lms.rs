//! Least-median-of-squares line fitting in the chi plane.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LocusDiagnostics, LocusParams};
use crate::error::{Error, Result};

/// Above this many points candidate lines are sampled instead of enumerated.
pub const EXHAUSTIVE_LIMIT: usize = 200;
pub const SAMPLED_PAIRS: usize = 1000;
/// Residuals beyond this many robust sigmas are outliers.
pub const OUTLIER_SIGMAS: f64 = 2.5;
/// Robust scale floor relative to the spread of the data, so exactly collinear
/// inliers are not flagged over rounding noise.
pub const SCALE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    /// A point on the line (the inlier centroid).
    pub point: [f64; 2],
    /// Unit direction.
    pub direction: [f64; 2],
    /// Perpendicular residual of every input point to the final line.
    pub residuals: Vec<f64>,
    /// Robust scale estimate of the LMS stage.
    pub scale: f64,
    pub outliers: Vec<usize>,
}

impl LineFit {
    pub fn inliers(&self) -> Vec<usize> {
        (0..self.residuals.len()).filter(|i| self.outliers.binary_search(i).is_err()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmsFit {
    pub line: LineFit,
    /// `eta + xi / T` when inverse temperatures were given; otherwise `eta` is a
    /// point on the line, `xi` its unit direction and `t_range` unset.
    pub locus: LocusParams,
}

fn perp(points: &[[f64; 2]], origin: [f64; 2], dir: [f64; 2], out: &mut Vec<f64>) {
    out.clear();
    out.extend(points.iter().map(|p| ((p[0] - origin[0]) * dir[1] - (p[1] - origin[1]) * dir[0]).abs()));
}

/// Order statistic used as the "median": `floor(n / 2) + 1` for a two-parameter fit.
pub fn lms_rank(n: usize) -> usize {
    n / 2 + 1
}

fn hth_square(residuals: &[f64], h: usize, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(residuals.iter().map(|r| r * r));
    let (_, v, _) = scratch.select_nth_unstable_by(h - 1, |a, b| a.total_cmp(b));
    *v
}

fn tls(points: &[[f64; 2]], idx: &[usize]) -> ([f64; 2], [f64; 2]) {
    let n = idx.len() as f64;
    let mut c = [0.0; 2];
    for &i in idx {
        c[0] += points[i][0];
        c[1] += points[i][1];
    }
    c = [c[0] / n, c[1] / n];
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &i in idx {
        let dx = points[i][0] - c[0];
        let dy = points[i][1] - c[1];
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Principal axis of the 2x2 scatter matrix.
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    (c, [angle.cos(), angle.sin()])
}

/// Robust line through `points`; with `inverse_temps` the inliers also fix the
/// temperature parametrisation `chi = eta + xi / T` by least squares.
pub fn lms_line_fit(points: &[[f64; 2]], inverse_temps: Option<&[f64]>, seed: u64) -> Result<LmsFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("line fit needs at least 2 points, got {n}")));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidArgument("non-finite point".into()));
    }
    if let Some(t) = inverse_temps {
        if t.len() != n {
            return Err(Error::InvalidArgument(format!("{} points but {} inverse temperatures", n, t.len())));
        }
    }
    let spread = {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    };
    if !(spread > 0.0) {
        return Err(Error::Degenerate("all points coincide".into()));
    }

    let pair_line = |i: usize, j: usize| -> Option<([f64; 2], [f64; 2])> {
        let d = [points[j][0] - points[i][0], points[j][1] - points[i][1]];
        let len = d[0].hypot(d[1]);
        (len > 1e-12 * spread).then(|| (points[i], [d[0] / len, d[1] / len]))
    };
    let pairs: Vec<(usize, usize)> = if n <= EXHAUSTIVE_LIMIT {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..SAMPLED_PAIRS)
            .map(|_| {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            })
            .collect()
    };

    let h = lms_rank(n);
    let mut best: Option<(f64, [f64; 2], [f64; 2])> = None;
    let mut res = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(n);
    for (i, j) in pairs {
        let Some((o, d)) = pair_line(i, j) else { continue };
        perp(points, o, d, &mut res);
        let m = hth_square(&res, h, &mut scratch);
        if best.is_none_or(|(b, _, _)| m < b) {
            best = Some((m, o, d));
        }
    }
    let (med, origin, dir) = best.ok_or_else(|| Error::Degenerate("no two distinct points".into()))?;

    perp(points, origin, dir, &mut res);
    let floor = SCALE_FLOOR * spread;
    let scale = if n > 2 { (1.4826 * (1.0 + 5.0 / (n as f64 - 2.0)) * med.sqrt()).max(floor) } else { floor };
    let outliers: Vec<usize> = if n > 2 {
        (0..n).filter(|&i| res[i] > OUTLIER_SIGMAS * scale).collect()
    } else {
        Vec::new()
    };
    let inliers: Vec<usize> = (0..n).filter(|i| outliers.binary_search(i).is_err()).collect();
    let (centre, mut direction) = if inliers.len() >= 2 { tls(points, &inliers) } else { (origin, dir) };
    // Keep the LMS candidate's orientation for determinism.
    if direction[0] * dir[0] + direction[1] * dir[1] < 0.0 {
        direction = [-direction[0], -direction[1]];
    }
    perp(points, centre, direction, &mut res);
    let line = LineFit { point: centre, direction, residuals: res.clone(), scale, outliers: outliers.clone() };

    let diagnostics = LocusDiagnostics { lms_residual: Some(scale), outliers, ..Default::default() };
    let locus = match inverse_temps {
        None => LocusParams { eta: centre, xi: direction, t_range: None, diagnostics },
        Some(inv) => {
            let (mut su, mut st, mut suu, mut sut) = (0.0, 0.0, 0.0, 0.0);
            let m = inliers.len() as f64;
            for &i in &inliers {
                let u = inv[i];
                if !(u > 0.0) || !u.is_finite() {
                    return Err(Error::InvalidArgument(format!("inverse temperature {u} at point {i}")));
                }
                let t = (points[i][0] - centre[0]) * direction[0] + (points[i][1] - centre[1]) * direction[1];
                su += u;
                st += t;
                suu += u * u;
                sut += u * t;
            }
            let det = m * suu - su * su;
            if !(det.abs() > 1e-12 * (m * suu).max(f64::MIN_POSITIVE)) {
                return Err(Error::Singular("inlier temperatures are all equal".into()));
            }
            let slope = (m * sut - su * st) / det;
            let intercept = (st - slope * su) / m;
            let temps: Vec<f64> = inliers.iter().map(|&i| 1.0 / inv[i]).collect();
            let lo = temps.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = temps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            LocusParams {
                eta: [centre[0] + intercept * direction[0], centre[1] + intercept * direction[1]],
                xi: [slope * direction[0], slope * direction[1]],
                t_range: Some([lo, hi]),
                diagnostics,
            }
        }
    };
    Ok(LmsFit { line, locus })
}
