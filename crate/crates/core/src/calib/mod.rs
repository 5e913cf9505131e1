//! Recovery of the specular-point locus `chi = eta + xi / T` from imaged
//! colour patches and lights.
//!
//! Patches imaged under several Planckian temperatures move along parallel
//! lines in log-chromaticity space; the dominant eigenvector of their pooled
//! covariance gives the direction `xi_hat`. Lights of known temperature then
//! fix the offset `eta` and the scale `nu` (`xi = nu xi_hat`).

pub mod lms;
pub mod profile;

use std::collections::BTreeMap;

use log::warn;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::chroma::{geomean_chroma, locus_to_l1, ProjectionBasis};
use crate::error::{Error, Result};
use crate::spectra::{band_constants, colorchecker_patch, BandConstants, Illuminant, SensorSet};

pub use lms::{lms_line_fit, LineFit, LmsFit};

/// Direction estimates with a first-to-second eigenvalue ratio below this are
/// reported as ill-conditioned.
pub const MIN_EIGEN_RATIO: f64 = 10.0;
/// Largest accepted angle in degrees between the light displacement and `xi_hat`.
pub const MAX_LIGHT_ANGLE_DEG: f64 = 20.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocusDiagnostics {
    /// Largest over second-largest eigenvalue of the pooled patch covariance.
    pub eigen_ratio: Option<f64>,
    /// Robust residual scale of the LMS fit.
    pub lms_residual: Option<f64>,
    /// Indices of light observations rejected as outliers.
    pub outliers: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Calibrated locus line in the chi plane.
#[derive(Debug, Clone, PartialEq)]
pub struct LocusParams {
    pub eta: [f64; 2],
    /// Scaled direction `nu xi_hat`, in chi-Kelvin.
    pub xi: [f64; 2],
    /// Temperatures the calibration lights spanned; `None` when the scale is unknown.
    pub t_range: Option<[f64; 2]>,
    pub diagnostics: LocusDiagnostics,
}

impl LocusParams {
    /// Forward model `eta = U w`, `xi = U e` from band constants.
    pub fn from_band_constants(bc: &BandConstants, t_range: Option<[f64; 2]>) -> LocusParams {
        let u = ProjectionBasis::CANONICAL;
        LocusParams { eta: u.project(bc.w), xi: u.project(bc.light_change()), t_range, diagnostics: Default::default() }
    }

    /// Locus for `sensors` over `t_range`.
    pub fn for_sensors(sensors: &SensorSet, t_range: [f64; 2]) -> Result<LocusParams> {
        Ok(Self::from_band_constants(&band_constants(sensors)?, Some(t_range)))
    }

    pub fn point_at(&self, temperature_k: f64) -> [f64; 2] {
        [self.eta[0] + self.xi[0] / temperature_k, self.eta[1] + self.xi[1] / temperature_k]
    }

    /// L1 chromaticity of the locus at `temperature_k`.
    pub fn rho_at(&self, temperature_k: f64) -> [f64; 3] {
        locus_to_l1(self.point_at(temperature_k))
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi[0].hypot(self.xi[1])
    }

    /// Checks the type invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.xi_norm() > 0.0) || self.eta.iter().chain(&self.xi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("locus direction must be finite and non-zero".into()));
        }
        if let Some([lo, hi]) = self.t_range {
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::InvalidArgument(format!("bad temperature range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Perpendicular distance of `chi` from the locus line.
    pub fn distance(&self, chi: [f64; 2]) -> f64 {
        let n = self.xi_norm();
        ((chi[0] - self.eta[0]) * self.xi[1] - (chi[1] - self.eta[1]) * self.xi[0]).abs() / n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionEstimate {
    /// Unit light-change direction in the chi plane.
    pub xi_hat: [f64; 2],
    /// Leading eigenvector of the pooled 3x3 log-chromaticity covariance.
    pub direction3: [f64; 3],
    /// Eigenvalues in descending order.
    pub eigenvalues: [f64; 3],
    pub ratio: f64,
    pub ill_conditioned: bool,
}

/// Dominant light-change direction from per-patch lists of `log r` vectors.
///
/// `orientation` (typically chi of the hottest minus the coolest calibration
/// light) fixes the sign; without it the larger chi component is made positive.
pub fn light_change_direction(patch_logrs: &[Vec<[f64; 3]>], orientation: Option<[f64; 2]>) -> Result<DirectionEstimate> {
    let usable: Vec<&Vec<[f64; 3]>> = patch_logrs.iter().filter(|p| p.len() >= 2).collect();
    if usable.is_empty() {
        return Err(Error::Degenerate("no patch imaged under at least two temperatures".into()));
    }
    if patch_logrs.len() < 2 {
        return Err(Error::InsufficientData("light-change direction needs at least two patches".into()));
    }
    let mut cov = Matrix3::<f64>::zeros();
    let mut count = 0usize;
    for patch in &usable {
        let m = patch.len() as f64;
        let mut mean = Vector3::zeros();
        for v in patch.iter() {
            mean += Vector3::from(*v);
        }
        mean /= m;
        for v in patch.iter() {
            let d = Vector3::from(*v) - mean;
            cov += d * d.transpose();
            count += 1;
        }
    }
    cov /= count as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.map(|i| eig.eigenvalues[i].max(0.0));
    let scale = cov.trace().abs().max(f64::MIN_POSITIVE);
    if !(eigenvalues[0] > 1e-14 * scale.max(1.0)) || eigenvalues[0] < 1e-30 {
        return Err(Error::Degenerate("patch chromaticities do not change with temperature".into()));
    }
    let v = eig.eigenvectors.column(order[0]);
    let mut direction3 = [v[0], v[1], v[2]];
    let chi = ProjectionBasis::CANONICAL.project(direction3);
    let len = chi[0].hypot(chi[1]);
    if !(len > 0.0) {
        return Err(Error::Degenerate("leading eigenvector is achromatic".into()));
    }
    let mut xi_hat = [chi[0] / len, chi[1] / len];
    let flip = match orientation {
        Some(o) if o[0] * xi_hat[0] + o[1] * xi_hat[1] != 0.0 => o[0] * xi_hat[0] + o[1] * xi_hat[1] < 0.0,
        _ => {
            let k = if xi_hat[0].abs() >= xi_hat[1].abs() { 0 } else { 1 };
            xi_hat[k] < 0.0
        }
    };
    if flip {
        xi_hat = [-xi_hat[0], -xi_hat[1]];
        direction3 = [-direction3[0], -direction3[1], -direction3[2]];
    }
    let ratio = if eigenvalues[1] > 0.0 { eigenvalues[0] / eigenvalues[1] } else { f64::INFINITY };
    let ill_conditioned = ratio < MIN_EIGEN_RATIO;
    if ill_conditioned {
        warn!("light-change direction is ill-conditioned (eigenvalue ratio {ratio:.3})");
    }
    Ok(DirectionEstimate { xi_hat, direction3, eigenvalues, ratio, ill_conditioned })
}

/// Solves `chi_i = eta + nu xi_hat / T_i` for two lights of known temperature.
pub fn two_light_solve(chi1: [f64; 2], t1: f64, chi2: [f64; 2], t2: f64, xi_hat: [f64; 2]) -> Result<LocusParams> {
    if !(t1 > 0.0) || !(t2 > 0.0) || !t1.is_finite() || !t2.is_finite() {
        return Err(Error::InvalidArgument(format!("temperatures must be positive, got {t1} and {t2}")));
    }
    if t1 == t2 {
        return Err(Error::Singular(format!("both lights are at {t1} K")));
    }
    let d = [chi1[0] - chi2[0], chi1[1] - chi2[1]];
    let dlen = d[0].hypot(d[1]);
    let scale = chi1[0].hypot(chi1[1]).max(chi2[0].hypot(chi2[1])).max(1e-300);
    if !(dlen > 1e-14 * scale) {
        return Err(Error::Degenerate("the two lights have the same chromaticity".into()));
    }
    let along = d[0] * xi_hat[0] + d[1] * xi_hat[1];
    let nu = along / (1.0 / t1 - 1.0 / t2);
    let mut diagnostics = LocusDiagnostics::default();
    let angle = (along.abs() / dlen).clamp(-1.0, 1.0).acos().to_degrees();
    if angle > MAX_LIGHT_ANGLE_DEG {
        let msg = format!("light displacement is {angle:.1} degrees off the patch direction");
        warn!("{msg}");
        diagnostics.warnings.push(msg);
    }
    let xi = [nu * xi_hat[0], nu * xi_hat[1]];
    let eta = [
        0.5 * ((chi1[0] - xi[0] / t1) + (chi2[0] - xi[0] / t2)),
        0.5 * ((chi1[1] - xi[1] / t1) + (chi2[1] - xi[1] / t2)),
    ];
    Ok(LocusParams { eta, xi, t_range: Some([t1.min(t2), t1.max(t2)]), diagnostics })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationKind {
    /// A colour patch, identified by name, under a Planckian of known temperature.
    Patch { id: String, temperature_k: f64 },
    /// An imaged light (directly or off a grey patch).
    Light { temperature_k: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibObservation {
    pub kind: ObservationKind,
    pub rgb: [f64; 3],
    pub camera: Option<String>,
}

/// Seed for LMS candidate sampling inside [`calibrate`].
pub const CALIBRATION_SEED: u64 = 0x5eed;

/// Full calibration from patch and light observations.
///
/// With exactly two known-temperature lights the two-light solve is used;
/// with three or more the lights are fitted robustly by LMS. When `sensors`
/// is given the angle between the recovered and forward-model directions is
/// logged as a warning if it exceeds the light-angle limit.
pub fn calibrate(observations: &[CalibObservation], sensors: Option<&SensorSet>) -> Result<LocusParams> {
    let mut cameras = observations.iter().filter_map(|o| o.camera.as_deref());
    if let Some(first) = cameras.next() {
        if let Some(other) = cameras.find(|c| *c != first) {
            return Err(Error::InvalidArgument(format!("observations mix cameras {first} and {other}")));
        }
    }
    let mut patches: BTreeMap<&str, Vec<(f64, [f64; 3])>> = BTreeMap::new();
    let mut lights: Vec<(usize, [f64; 2], f64)> = Vec::new();
    let mut unknown_lights = 0usize;
    for (i, obs) in observations.iter().enumerate() {
        let c = geomean_chroma(obs.rgb)?;
        match &obs.kind {
            ObservationKind::Patch { id, temperature_k } => {
                patches.entry(id.as_str()).or_default().push((*temperature_k, c.logr));
            }
            ObservationKind::Light { temperature_k: Some(t) } => {
                if !(*t > 0.0) {
                    return Err(Error::InvalidArgument(format!("light {i} has temperature {t}")));
                }
                lights.push((i, c.chi, *t));
            }
            ObservationKind::Light { temperature_k: None } => unknown_lights += 1,
        }
    }
    if lights.is_empty() {
        return Err(Error::LocusScaleUnrecoverable(format!(
            "no light of known temperature among {} observations",
            observations.len()
        )));
    }
    if unknown_lights > 0 {
        log::info!("{unknown_lights} lights without temperature ignored");
    }
    let hottest = lights.iter().max_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
    let coolest = lights.iter().min_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
    let orientation = [hottest.1[0] - coolest.1[0], hottest.1[1] - coolest.1[1]];

    let direction = if patches.is_empty() {
        None
    } else {
        let temps: Vec<f64> = patches.values().flatten().map(|(t, _)| *t).collect();
        if temps.iter().all(|t| *t == temps[0]) {
            return Err(Error::Degenerate("patches were imaged under a single temperature".into()));
        }
        let logrs: Vec<Vec<[f64; 3]>> = patches.values().map(|v| v.iter().map(|(_, l)| *l).collect()).collect();
        Some(light_change_direction(&logrs, Some(orientation))?)
    };

    let mut locus = match (lights.len(), &direction) {
        (1, _) => {
            return Err(Error::LocusScaleUnrecoverable("one light of known temperature cannot fix the scale".into()))
        }
        (2, Some(dir)) => two_light_solve(lights[0].1, lights[0].2, lights[1].1, lights[1].2, dir.xi_hat)?,
        (2, None) => {
            return Err(Error::InsufficientData("two lights need patch observations for the direction".into()));
        }
        _ => {
            let points: Vec<[f64; 2]> = lights.iter().map(|l| l.1).collect();
            let inv: Vec<f64> = lights.iter().map(|l| 1.0 / l.2).collect();
            let fit = lms_line_fit(&points, Some(&inv), CALIBRATION_SEED)?;
            let mut locus = fit.locus;
            locus.diagnostics.outliers = fit.line.outliers.iter().map(|&k| lights[k].0).collect();
            if let Some(dir) = &direction {
                let d = fit.line.direction;
                let cos = (d[0] * dir.xi_hat[0] + d[1] * dir.xi_hat[1]).abs().min(1.0);
                let angle = cos.acos().to_degrees();
                if angle > MAX_LIGHT_ANGLE_DEG {
                    locus.diagnostics.warnings.push(format!("light line is {angle:.1} degrees off the patch direction"));
                }
            }
            locus
        }
    };
    if let Some(dir) = &direction {
        locus.diagnostics.eigen_ratio = Some(dir.ratio);
        if dir.ill_conditioned {
            locus.diagnostics.warnings.push(format!("ill-conditioned direction, eigenvalue ratio {}", dir.ratio));
        }
    }
    if let Some(s) = sensors {
        let model = LocusParams::for_sensors(s, [1.0, 1.0])?;
        let cos = ((model.xi[0] * locus.xi[0] + model.xi[1] * locus.xi[1]) / (model.xi_norm() * locus.xi_norm()))
            .clamp(-1.0, 1.0);
        let angle = cos.acos().to_degrees();
        if angle > MAX_LIGHT_ANGLE_DEG {
            let msg = format!("recovered direction is {angle:.1} degrees from the sensor model");
            warn!("{msg}");
            locus.diagnostics.warnings.push(msg);
        }
    }
    locus.validate()?;
    Ok(locus)
}

/// How calibration lights are imaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightPath {
    /// The camera looks at the light directly.
    Direct,
    /// The light is measured off the given ColorChecker patch (1-based).
    GreyPatch(usize),
}

/// Plan for a synthetic calibration run.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCalibration {
    /// ColorChecker patch numbers (1-based).
    pub patches: Vec<usize>,
    pub patch_temperatures: Vec<f64>,
    pub light_temperatures: Vec<f64>,
    pub light_path: LightPath,
}

impl Default for SyntheticCalibration {
    /// The 18 chromatic patches at 5500-10500 K in 500 K steps and lights at 6500 and 9500 K.
    fn default() -> Self {
        SyntheticCalibration {
            patches: crate::spectra::chromatic_patch_numbers(),
            patch_temperatures: (0..11).map(|i| 5500.0 + 500.0 * i as f64).collect(),
            light_temperatures: vec![6500.0, 9500.0],
            light_path: LightPath::Direct,
        }
    }
}

impl SyntheticCalibration {
    /// Renders the observations with `sensors`.
    pub fn observations(&self, sensors: &SensorSet) -> Result<Vec<CalibObservation>> {
        let mut out = Vec::new();
        for &p in &self.patches {
            let refl = colorchecker_patch(p)?;
            for &t in &self.patch_temperatures {
                let rgb = sensors.response(&Illuminant::planckian(t, 1.0)?, Some(refl))?;
                out.push(CalibObservation {
                    kind: ObservationKind::Patch { id: format!("patch{p:02}"), temperature_k: t },
                    rgb,
                    camera: None,
                });
            }
        }
        let grey = match self.light_path {
            LightPath::Direct => None,
            LightPath::GreyPatch(p) => Some(colorchecker_patch(p)?),
        };
        for &t in &self.light_temperatures {
            let rgb = sensors.response(&Illuminant::planckian(t, 1.0)?, grey)?;
            out.push(CalibObservation { kind: ObservationKind::Light { temperature_k: Some(t) }, rgb, camera: None });
        }
        Ok(out)
    }
}
