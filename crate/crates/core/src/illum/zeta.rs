//! The zeta objective and its two searches.
//!
//! For a candidate light `rho_e`, `psi = log(rho / rho_e)` and
//! `zeta = -psi . rho_e`. Near-specular pixels have `zeta` close to zero for
//! the correct light; the objective is the sum of `|zeta|` over the lowest
//! fraction of pixels, reselected for every candidate.

use rayon::prelude::*;

use super::{IlluminantEstimate, Method};
use crate::calib::LocusParams;
use crate::chroma::{ChromaField, PixelStatus};
use crate::error::{Error, Result};
use crate::image::LinearImage;

/// Fraction of valid pixels forming the near-specular set.
pub const DEFAULT_FRACTION: f64 = 0.10;
/// Minimum number of valid pixels for the searches.
pub const MIN_PIXELS: usize = 100;

/// L1 chromaticity of every pixel plus its logarithm.
#[derive(Debug, Clone)]
pub struct RhoField {
    pub width: usize,
    pub height: usize,
    pub rho: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
    log_valid: Vec<[f64; 3]>,
    index_valid: Vec<usize>,
}

impl RhoField {
    /// Pixels that are clamped, excluded or invalid under the chroma policy are skipped.
    pub fn from_image(image: &LinearImage) -> RhoField {
        let status = ChromaField::from_image(image, None).status;
        let rho = image
            .pixels()
            .iter()
            .zip(&status)
            .map(|(p, s)| {
                if *s == PixelStatus::Valid {
                    let sum = p[0] + p[1] + p[2];
                    [p[0] / sum, p[1] / sum, p[2] / sum]
                } else {
                    [1.0 / 3.0; 3]
                }
            })
            .collect();
        let valid = status.iter().map(|s| s.is_valid()).collect();
        Self::from_rho(image.width(), image.height(), rho, valid)
    }

    pub fn from_rho(width: usize, height: usize, rho: Vec<[f64; 3]>, valid: Vec<bool>) -> RhoField {
        let mut log_valid = Vec::new();
        let mut index_valid = Vec::new();
        let mut valid = valid;
        for (i, p) in rho.iter().enumerate() {
            if valid[i] && p.iter().all(|&v| v > 0.0 && v.is_finite()) {
                log_valid.push([p[0].ln(), p[1].ln(), p[2].ln()]);
                index_valid.push(i);
            } else {
                valid[i] = false;
            }
        }
        RhoField { width, height, rho, valid, log_valid, index_valid }
    }

    pub fn valid_count(&self) -> usize {
        self.index_valid.len()
    }

    /// Indices of valid pixels, ascending.
    pub fn valid_indices(&self) -> &[usize] {
        &self.index_valid
    }

    fn selection_size(&self, fraction: f64) -> usize {
        ((fraction * self.valid_count() as f64).ceil() as usize).clamp(1, self.valid_count().max(1))
    }

    /// Sum of `|zeta|` over the `fraction` of valid pixels with the smallest `|zeta|`.
    pub fn objective(&self, rho_e: [f64; 3], fraction: f64, scratch: &mut Vec<f64>) -> f64 {
        let n = self.valid_count();
        if n == 0 {
            return f64::INFINITY;
        }
        let le = [rho_e[0].ln(), rho_e[1].ln(), rho_e[2].ln()];
        let c0 = rho_e[0] * le[0] + rho_e[1] * le[1] + rho_e[2] * le[2];
        scratch.clear();
        scratch.extend(self.log_valid.iter().map(|l| (c0 - rho_e[0] * l[0] - rho_e[1] * l[1] - rho_e[2] * l[2]).abs()));
        let m = self.selection_size(fraction);
        if m < n {
            scratch.select_nth_unstable_by(m - 1, |a, b| a.total_cmp(b));
        }
        scratch[..m].iter().sum()
    }
}

/// Per-pixel log-relative chromaticity and zeta for one candidate light.
#[derive(Debug, Clone, PartialEq)]
pub struct LrcField {
    pub psi: Vec<[f64; 3]>,
    /// Zero at invalid pixels, which are never selected.
    pub zeta: Vec<f64>,
    /// Near-specular pixels, ordered by `|zeta|` then index.
    pub selection: Vec<usize>,
}

fn check_interior(rho_e: [f64; 3]) -> Result<()> {
    if rho_e.iter().any(|&v| !(v > 0.0 && v < 1.0)) || ((rho_e[0] + rho_e[1] + rho_e[2]) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("candidate {rho_e:?} is not strictly inside the simplex")));
    }
    Ok(())
}

pub fn zeta_field(field: &RhoField, rho_e: [f64; 3], fraction: f64) -> Result<LrcField> {
    check_interior(rho_e)?;
    let n = field.rho.len();
    let mut psi = vec![[0.0; 3]; n];
    let mut zeta = vec![0.0; n];
    for &i in field.valid_indices() {
        let p = field.rho[i];
        let s = [(p[0] / rho_e[0]).ln(), (p[1] / rho_e[1]).ln(), (p[2] / rho_e[2]).ln()];
        psi[i] = s;
        zeta[i] = -(s[0] * rho_e[0] + s[1] * rho_e[1] + s[2] * rho_e[2]);
    }
    let mut order: Vec<usize> = field.valid_indices().to_vec();
    order.sort_by(|&a, &b| zeta[a].abs().total_cmp(&zeta[b].abs()).then(a.cmp(&b)));
    order.truncate(if order.is_empty() { 0 } else { field.selection_size(fraction) });
    Ok(LrcField { psi, zeta, selection: order })
}

/// Grid over `(rho_R, rho_G)` with `rho_B = 1 - rho_R - rho_G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
    /// The refinement pass uses `step / refine` over one coarse cell either side.
    pub refine: usize,
    pub fraction: f64,
}

impl Default for SimplexGrid {
    fn default() -> Self {
        SimplexGrid { min: 0.15, max: 0.6, step: 0.005, refine: 10, fraction: DEFAULT_FRACTION }
    }
}

impl SimplexGrid {
    fn axis(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

fn feasible(r: f64, g: f64) -> Option<[f64; 3]> {
    let b = 1.0 - r - g;
    (r > 0.0 && g > 0.0 && b > 1e-9).then_some([r, g, b])
}

fn evaluate_all(field: &RhoField, candidates: &[[f64; 3]], fraction: f64) -> Vec<f64> {
    candidates
        .par_iter()
        .map_init(Vec::new, |scratch, c| field.objective(*c, fraction, scratch))
        .collect()
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Algorithm-2 style unconstrained search over the chromaticity simplex.
pub fn estimate_zeta_free(image: &LinearImage, grid: &SimplexGrid) -> Result<IlluminantEstimate> {
    estimate_zeta_free_field(&RhoField::from_image(image), grid)
}

pub fn estimate_zeta_free_field(field: &RhoField, grid: &SimplexGrid) -> Result<IlluminantEstimate> {
    if field.valid_count() < MIN_PIXELS {
        return Err(Error::InsufficientData(format!(
            "{} valid pixels, need at least {MIN_PIXELS}",
            field.valid_count()
        )));
    }
    if !(grid.step > 0.0) || !(grid.min < grid.max) || grid.refine == 0 {
        return Err(Error::InvalidArgument(format!("bad simplex grid {grid:?}")));
    }
    let axis = grid.axis();
    let coarse: Vec<[f64; 3]> =
        axis.iter().flat_map(|&r| axis.iter().filter_map(move |&g| feasible(r, g))).collect();
    if coarse.is_empty() {
        return Err(Error::InvalidArgument("simplex grid has no feasible candidate".into()));
    }
    let values = evaluate_all(field, &coarse, grid.fraction);
    let best = argmin(&values);

    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let tenth = sorted[sorted.len().min(10) - 1];
    let low_confidence = tenth - sorted[0] <= 0.05 * sorted[0];

    let fine = grid.step / grid.refine as f64;
    let centre = coarse[best];
    let k = grid.refine as i64;
    let refined: Vec<[f64; 3]> = (-k..=k)
        .flat_map(|i| (-k..=k).map(move |j| (i, j)))
        .filter_map(|(i, j)| feasible(centre[0] + i as f64 * fine, centre[1] + j as f64 * fine))
        .collect();
    let refined_values = evaluate_all(field, &refined, grid.fraction);
    let rb = argmin(&refined_values);
    let (rho_e, objective) =
        if refined_values[rb] < values[best] { (refined[rb], refined_values[rb]) } else { (centre, values[best]) };
    Ok(IlluminantEstimate {
        rho_e,
        temperature_k: None,
        objective: Some(objective),
        method: Method::ZetaFree,
        low_confidence,
    })
}

/// Temperature sweep for the locus-constrained search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempSearch {
    pub min_k: f64,
    pub max_k: f64,
    pub step_k: f64,
    /// Final bracket width of the golden-section refinement.
    pub tolerance_k: f64,
    pub fraction: f64,
}

impl TempSearch {
    /// `[max(2000, T_min - 2000), T_max + 2000]` in 100 K steps, refined to 10 K.
    pub fn for_locus(locus: &LocusParams) -> Result<TempSearch> {
        let [lo, hi] = locus
            .t_range
            .ok_or_else(|| Error::InvalidArgument("locus has no temperature scale".into()))?;
        Ok(TempSearch {
            min_k: (lo - 2000.0).max(2000.0),
            max_k: hi + 2000.0,
            step_k: 100.0,
            tolerance_k: 10.0,
            fraction: DEFAULT_FRACTION,
        })
    }

    /// A search over the single temperature `t`.
    pub fn single(t: f64) -> TempSearch {
        TempSearch { min_k: t, max_k: t, step_k: 100.0, tolerance_k: 10.0, fraction: DEFAULT_FRACTION }
    }

    pub fn temperatures(&self) -> Vec<f64> {
        let n = ((self.max_k - self.min_k) / self.step_k + 1e-9).floor() as usize;
        (0..=n).map(|i| self.min_k + i as f64 * self.step_k).collect()
    }
}

/// Search restricted to lights on the calibrated locus.
pub fn estimate_zeta_locus(image: &LinearImage, locus: &LocusParams, search: &TempSearch) -> Result<IlluminantEstimate> {
    estimate_zeta_locus_field(&RhoField::from_image(image), locus, search)
}

pub fn estimate_zeta_locus_field(field: &RhoField, locus: &LocusParams, search: &TempSearch) -> Result<IlluminantEstimate> {
    if locus.t_range.is_none() {
        return Err(Error::InvalidArgument("locus has no temperature scale".into()));
    }
    locus.validate()?;
    if field.valid_count() == 0 {
        return Err(Error::InsufficientData("no valid pixels".into()));
    }
    if !(search.min_k > 0.0 && search.min_k <= search.max_k && search.step_k > 0.0 && search.tolerance_k > 0.0) {
        return Err(Error::InvalidArgument(format!("bad temperature search {search:?}")));
    }
    let temps = search.temperatures();
    let candidates: Vec<[f64; 3]> = temps.iter().map(|&t| locus.rho_at(t)).collect();
    let values = evaluate_all(field, &candidates, search.fraction);
    let best = argmin(&values);
    let (mut t_best, mut obj_best) = (temps[best], values[best]);

    if temps.len() > 1 {
        let mut scratch = Vec::new();
        let mut f = |t: f64| field.objective(locus.rho_at(t), search.fraction, &mut scratch);
        let mut a = (t_best - search.step_k).max(search.min_k);
        let mut b = (t_best + search.step_k).min(search.max_k);
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > search.tolerance_k {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = f(d);
            }
        }
        let t = 0.5 * (a + b);
        let ft = f(t);
        if ft < obj_best {
            t_best = t;
            obj_best = ft;
        }
    }
    Ok(IlluminantEstimate {
        rho_e: locus.rho_at(t_best),
        temperature_k: Some(t_best),
        objective: Some(obj_best),
        method: Method::ZetaLocus,
        low_confidence: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::illum::angular_error;
    use crate::spectra::{Illuminant, SensorSet};

    fn light_rho(t: f64) -> [f64; 3] {
        let l = SensorSet::default_delta().response(&Illuminant::planckian(t, 1.0).unwrap(), None).unwrap();
        let s = l[0] + l[1] + l[2];
        [l[0] / s, l[1] / s, l[2] / s]
    }

    #[test]
    fn zeta_vanishes_at_the_candidate() {
        let rho = vec![[0.3, 0.3, 0.4], [0.5, 0.3, 0.2]];
        let field = RhoField::from_rho(2, 1, rho, vec![true, true]);
        let z = zeta_field(&field, [0.3, 0.3, 0.4], 0.5).unwrap();
        assert_eq!(z.psi[0], [0.0; 3]);
        assert_eq!(z.zeta[0], 0.0);
        assert!(z.zeta[1] > 0.0);
        assert_eq!(z.selection, vec![0]);
        assert!(zeta_field(&field, [0.5, 0.5, 0.0], 0.1).is_err());
        assert!(zeta_field(&field, [0.5, 0.6, -0.1], 0.1).is_err());
    }

    #[test]
    fn zeta_decays_quadratically_with_specular_weight() {
        let rho_e = light_rho(6500.0);
        let body = [0.4, 0.2, 0.1];
        let mut means = Vec::new();
        for beta in [10.0, 100.0, 1000.0] {
            let px = [body[0] + beta * rho_e[0], body[1] + beta * rho_e[1], body[2] + beta * rho_e[2]];
            let s = px[0] + px[1] + px[2];
            let field = RhoField::from_rho(1, 1, vec![[px[0] / s, px[1] / s, px[2] / s]], vec![true]);
            means.push(zeta_field(&field, rho_e, 1.0).unwrap().zeta[0].abs());
        }
        for w in means.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 80.0 && ratio < 120.0, "ratio {ratio}");
        }
    }

    #[test]
    fn pure_specular_image_recovers_the_light() {
        let rho_e = light_rho(5000.0);
        let img = LinearImage::new(20, 10, vec![[rho_e[0] * 2.0, rho_e[1] * 2.0, rho_e[2] * 2.0]; 200]).unwrap();
        let est = estimate_zeta_free(&img, &SimplexGrid::default()).unwrap();
        for k in 0..3 {
            assert!((est.rho_e[k] - rho_e[k]).abs() <= 0.005);
        }
        assert!(angular_error(est.rho_e, rho_e).unwrap() < 1.0);
    }

    #[test]
    fn constant_matte_image_returns_its_own_colour() {
        // Failure mode: with no specular content the surface colour is taken for the light.
        let rho = vec![[0.5, 0.3, 0.2]; 400];
        let field = RhoField::from_rho(20, 20, rho, vec![true; 400]);
        let est = estimate_zeta_free_field(&field, &SimplexGrid::default()).unwrap();
        for (a, b) in est.rho_e.iter().zip([0.5, 0.3, 0.2]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(est.objective.unwrap() < 1e-12);
    }

    #[test]
    fn uniformly_spread_colours_are_low_confidence() {
        let mut rho = Vec::new();
        for i in 0..60 {
            for j in 0..60 {
                let r = 0.1 + 0.6 * i as f64 / 59.0;
                let g = 0.1 + 0.6 * j as f64 / 59.0;
                if r + g < 0.95 {
                    rho.push([r, g, 1.0 - r - g]);
                }
            }
        }
        let n = rho.len();
        let field = RhoField::from_rho(n, 1, rho, vec![true; n]);
        assert!(estimate_zeta_free_field(&field, &SimplexGrid::default()).unwrap().low_confidence);
    }

    #[test]
    fn too_few_pixels() {
        let field = RhoField::from_rho(5, 1, vec![[0.3, 0.3, 0.4]; 5], vec![true; 5]);
        assert!(matches!(estimate_zeta_free_field(&field, &SimplexGrid::default()), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn singleton_temperature_grid() {
        let sensors = SensorSet::default_delta();
        let locus = LocusParams::for_sensors(&sensors, [6500.0, 9500.0]).unwrap();
        let rho: Vec<[f64; 3]> = (0..50).map(|i| [0.3 + 0.004 * i as f64, 0.3, 0.4 - 0.004 * i as f64]).collect();
        let field = RhoField::from_rho(50, 1, rho, vec![true; 50]);
        let est = estimate_zeta_locus_field(&field, &locus, &TempSearch::single(7000.0)).unwrap();
        assert_eq!(est.temperature_k, Some(7000.0));
        let mut s = Vec::new();
        assert_eq!(est.objective, Some(field.objective(locus.rho_at(7000.0), DEFAULT_FRACTION, &mut s)));
        assert_eq!(est.rho_e, locus.rho_at(7000.0));
    }

    #[test]
    fn unscaled_locus_is_rejected() {
        let sensors = SensorSet::default_delta();
        let mut locus = LocusParams::for_sensors(&sensors, [6500.0, 9500.0]).unwrap();
        locus.t_range = None;
        let field = RhoField::from_rho(1, 1, vec![[0.3, 0.3, 0.4]], vec![true]);
        assert!(matches!(
            estimate_zeta_locus_field(&field, &locus, &TempSearch::single(6500.0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(TempSearch::for_locus(&locus).is_err());
    }

    #[test]
    fn locus_search_range() {
        let sensors = SensorSet::default_delta();
        let locus = LocusParams::for_sensors(&sensors, [3000.0, 9500.0]).unwrap();
        let s = TempSearch::for_locus(&locus).unwrap();
        assert_eq!((s.min_k, s.max_k), (2000.0, 11500.0));
        let t = s.temperatures();
        assert_eq!(t.len(), 96);
        assert_eq!(*t.last().unwrap(), 11500.0);
    }

    #[test]
    fn invalid_pixels_are_skipped() {
        let mut data = vec![[0.5, 0.3, 0.2]; 10];
        data[3] = [0.0, 0.0, 0.0];
        let img = LinearImage::new(10, 1, data).unwrap();
        let f = RhoField::from_image(&img);
        assert_eq!(f.valid_count(), 9);
        assert!(!f.valid[3]);
    }
}
