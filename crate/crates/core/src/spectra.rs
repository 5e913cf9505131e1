//! Spectral curves, the Wien-approximated Planckian illuminant and the
//! band-effective camera constants derived from a sensor set.
//!
//! Wavelengths are stored in nanometres everywhere; they are converted to
//! metres only inside [`wien`], so `c2 / lambda` carries Kelvin units.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// First radiation constant as used by the Wien illuminant model.
pub const C1: f64 = 3.74183e16;
/// Second radiation constant, metre-Kelvin.
pub const C2: f64 = 1.4388e-2;

/// Default sampling grid: 400-700 nm at 10 nm.
pub fn default_grid() -> Vec<f64> {
    (0..=30).map(|i| 400.0 + 10.0 * i as f64).collect()
}

/// Uniform grid from `start` to `end` inclusive.
pub fn uniform_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Illuminant,
    Reflectance,
    Sensor,
}

/// A sampled function of wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCurve {
    wavelengths_nm: Vec<f64>,
    values: Vec<f64>,
    kind: CurveKind,
}

impl SpectralCurve {
    pub fn new(kind: CurveKind, wavelengths_nm: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if wavelengths_nm.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} wavelengths but {} values",
                wavelengths_nm.len(),
                values.len()
            )));
        }
        if wavelengths_nm.len() < 2 {
            return Err(Error::InvalidArgument("a curve needs at least two samples".into()));
        }
        if wavelengths_nm.iter().any(|w| !w.is_finite())
            || wavelengths_nm.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidArgument("wavelengths must be finite and strictly increasing".into()));
        }
        for (&w, &v) in wavelengths_nm.iter().zip(&values) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("negative or non-finite value {v} at {w} nm")));
            }
            if kind == CurveKind::Reflectance && v > 1.0 {
                return Err(Error::InvalidArgument(format!("reflectance {v} at {w} nm exceeds 1")));
            }
        }
        Ok(Self { wavelengths_nm, values, kind })
    }

    /// Curve with the same value at every grid point.
    pub fn constant(kind: CurveKind, grid: &[f64], value: f64) -> Result<Self> {
        Self::new(kind, grid.to_vec(), vec![value; grid.len()])
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn range(&self) -> (f64, f64) {
        (self.wavelengths_nm[0], *self.wavelengths_nm.last().unwrap())
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn value_at(&self, nm: f64) -> Option<f64> {
        let wl = &self.wavelengths_nm;
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&nm) {
            return None;
        }
        let idx = wl.partition_point(|&w| w <= nm);
        if idx == 0 {
            return Some(self.values[0]);
        }
        if idx >= wl.len() {
            return Some(*self.values.last().unwrap());
        }
        let (w0, w1) = (wl[idx - 1], wl[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        if nm == w0 {
            return Some(v0);
        }
        let t = (nm - w0) / (w1 - w0);
        Some(v0 + t * (v1 - v0))
    }

    /// Trapezoidal integral over the sampled range.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.wavelengths_nm, &self.values)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.kind, self.wavelengths_nm.clone(), self.values.iter().map(|v| v * factor).collect())
    }

    /// Index range of samples with non-zero value.
    fn support(&self) -> Option<(usize, usize)> {
        let first = self.values.iter().position(|&v| v > 0.0)?;
        let last = self.values.iter().rposition(|&v| v > 0.0)?;
        Some((first, last))
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Wien's approximation `c1 lambda^-5 exp(-c2 / (lambda T))` at unit intensity.
pub fn wien(nm: f64, temperature_k: f64) -> f64 {
    let lambda = nm * 1e-9;
    C1 * lambda.powi(-5) * (-C2 / (lambda * temperature_k)).exp()
}

/// Planckian (Wien) SPD sampled on `grid`.
pub fn planckian_spd(temperature_k: f64, intensity: f64, grid: &[f64]) -> Result<SpectralCurve> {
    if !(temperature_k > 0.0) || !temperature_k.is_finite() {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {temperature_k}")));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty wavelength grid".into()));
    }
    if !(intensity >= 0.0) {
        return Err(Error::InvalidArgument(format!("intensity must be non-negative, got {intensity}")));
    }
    if grid.iter().any(|&w| !(300.0..=830.0).contains(&w)) {
        return Err(Error::InvalidArgument("grid must lie within 300-830 nm".into()));
    }
    let values = grid.iter().map(|&w| intensity * wien(w, temperature_k)).collect();
    SpectralCurve::new(CurveKind::Illuminant, grid.to_vec(), values)
}

/// A light source spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum Illuminant {
    /// Wien-approximated Planckian radiator, evaluated analytically.
    Planckian { temperature_k: f64, intensity: f64 },
    /// Measured or tabulated SPD.
    Sampled(SpectralCurve),
}

impl Illuminant {
    pub fn planckian(temperature_k: f64, intensity: f64) -> Result<Self> {
        if !(temperature_k > 0.0) || !temperature_k.is_finite() {
            return Err(Error::InvalidArgument(format!("temperature must be positive, got {temperature_k}")));
        }
        if !(intensity >= 0.0) || !intensity.is_finite() {
            return Err(Error::InvalidArgument(format!("intensity must be non-negative, got {intensity}")));
        }
        Ok(Illuminant::Planckian { temperature_k, intensity })
    }

    pub fn value_at(&self, nm: f64) -> Option<f64> {
        match self {
            Illuminant::Planckian { temperature_k, intensity } => Some(intensity * wien(nm, *temperature_k)),
            Illuminant::Sampled(curve) => curve.value_at(nm),
        }
    }

    pub fn temperature(&self) -> Option<f64> {
        match self {
            Illuminant::Planckian { temperature_k, .. } => Some(*temperature_k),
            Illuminant::Sampled(_) => None,
        }
    }

    /// Same spectrum with intensity multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        match self {
            Illuminant::Planckian { temperature_k, intensity } => Illuminant::planckian(*temperature_k, intensity * factor),
            Illuminant::Sampled(curve) => Ok(Illuminant::Sampled(curve.scaled(factor)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum SensorModel {
    Delta { wavelengths_nm: [f64; 3], gains: [f64; 3] },
    Sampled { curves: [SpectralCurve; 3] },
}

/// Three camera sensitivities in R, G, B order.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSet {
    model: SensorModel,
}

impl SensorSet {
    /// Spike sensors `q_k delta(lambda - lambda_k)`; R must be the longest wavelength.
    pub fn delta(wavelengths_nm: [f64; 3], gains: [f64; 3]) -> Result<Self> {
        if !(wavelengths_nm[0] > wavelengths_nm[1] && wavelengths_nm[1] > wavelengths_nm[2]) {
            return Err(Error::InvalidArgument("delta sensor wavelengths must be strictly decreasing R > G > B".into()));
        }
        if wavelengths_nm.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("delta sensor wavelengths must be positive".into()));
        }
        if let Some(channel) = gains.iter().position(|&g| g == 0.0) {
            return Err(Error::DegenerateSensor { channel });
        }
        if gains.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidArgument("delta sensor gains must be positive".into()));
        }
        Ok(Self { model: SensorModel::Delta { wavelengths_nm, gains } })
    }

    /// Delta sensors at 610, 540 and 450 nm with unit gains.
    pub fn default_delta() -> Self {
        Self::delta([610.0, 540.0, 450.0], [1.0, 1.0, 1.0]).expect("valid default sensors")
    }

    pub fn sampled(curves: [SpectralCurve; 3]) -> Result<Self> {
        for (channel, curve) in curves.iter().enumerate() {
            if curve.kind() != CurveKind::Sensor {
                return Err(Error::InvalidArgument(format!("channel {channel} curve is not a sensor curve")));
            }
            if curve.integral() <= 0.0 {
                return Err(Error::DegenerateSensor { channel });
            }
        }
        Ok(Self { model: SensorModel::Sampled { curves } })
    }

    /// Unit-peak Gaussian sensitivities with standard deviation `sigma_nm`.
    pub fn gaussian(centres_nm: [f64; 3], sigma_nm: f64, grid: &[f64]) -> Result<Self> {
        if !(sigma_nm > 0.0) {
            return Err(Error::InvalidArgument(format!("gaussian width must be positive, got {sigma_nm}")));
        }
        let curve = |c: f64| {
            let values = grid.iter().map(|&w| (-0.5 * ((w - c) / sigma_nm).powi(2)).exp()).collect();
            SpectralCurve::new(CurveKind::Sensor, grid.to_vec(), values)
        };
        Self::sampled([curve(centres_nm[0])?, curve(centres_nm[1])?, curve(centres_nm[2])?])
    }

    pub fn is_delta(&self) -> bool {
        matches!(self.model, SensorModel::Delta { .. })
    }

    /// Delta centre wavelengths and gains, if this is a spike model.
    pub fn delta_params(&self) -> Option<([f64; 3], [f64; 3])> {
        match &self.model {
            SensorModel::Delta { wavelengths_nm, gains } => Some((*wavelengths_nm, *gains)),
            SensorModel::Sampled { .. } => None,
        }
    }

    pub fn curves(&self) -> Option<&[SpectralCurve; 3]> {
        match &self.model {
            SensorModel::Sampled { curves } => Some(curves),
            SensorModel::Delta { .. } => None,
        }
    }

    /// Camera response `integral E S Q_k` to `light` reflected by `reflectance`
    /// (a perfect reflector when `None`).
    pub fn response(&self, light: &Illuminant, reflectance: Option<&SpectralCurve>) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        match &self.model {
            SensorModel::Delta { wavelengths_nm, gains } => {
                for k in 0..3 {
                    let nm = wavelengths_nm[k];
                    let e = light
                        .value_at(nm)
                        .ok_or_else(|| Error::Domain(format!("illuminant does not cover {nm} nm")))?;
                    let s = match reflectance {
                        Some(curve) => curve
                            .value_at(nm)
                            .ok_or_else(|| Error::Domain(format!("reflectance does not cover {nm} nm")))?,
                        None => 1.0,
                    };
                    out[k] = e * s * gains[k];
                }
            }
            SensorModel::Sampled { curves } => {
                for (k, curve) in curves.iter().enumerate() {
                    let (first, last) = curve.support().ok_or(Error::DegenerateSensor { channel: k })?;
                    let wl = &curve.wavelengths()[first..=last];
                    let q = &curve.values()[first..=last];
                    let mut integrand = Vec::with_capacity(wl.len());
                    for (&nm, &qv) in wl.iter().zip(q) {
                        let e = light
                            .value_at(nm)
                            .ok_or_else(|| Error::Domain(format!("illuminant does not cover {nm} nm")))?;
                        let s = match reflectance {
                            Some(r) => r
                                .value_at(nm)
                                .ok_or_else(|| Error::Domain(format!("reflectance does not cover {nm} nm")))?,
                            None => 1.0,
                        };
                        integrand.push(e * s * qv);
                    }
                    out[k] = trapezoid(wl, &integrand);
                }
            }
        }
        Ok(out)
    }
}

/// Band-effective camera constants.
///
/// `e` is in Kelvin: `-c2 / lambda_k` for spikes, the sensitivity-weighted mean
/// of `-c2 / lambda` for sampled curves. `w` is `log(v_k / geomean(v))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandConstants {
    pub e: [f64; 3],
    pub e_mean: f64,
    pub w: [f64; 3],
    pub v: [f64; 3],
    pub sigma: [f64; 3],
}

impl BandConstants {
    /// The lighting-change 3-vector `e_k - e_M`.
    pub fn light_change(&self) -> [f64; 3] {
        [self.e[0] - self.e_mean, self.e[1] - self.e_mean, self.e[2] - self.e_mean]
    }
}

pub fn band_constants(sensors: &SensorSet) -> Result<BandConstants> {
    let (e, v, sigma) = match &sensors.model {
        SensorModel::Delta { wavelengths_nm, gains } => {
            let mut e = [0.0; 3];
            let mut v = [0.0; 3];
            for k in 0..3 {
                let lambda = wavelengths_nm[k] * 1e-9;
                e[k] = -C2 / lambda;
                v[k] = lambda.powi(-5) * gains[k];
            }
            (e, v, *gains)
        }
        SensorModel::Sampled { curves } => {
            let mut e = [0.0; 3];
            let mut v = [0.0; 3];
            let mut sigma = [0.0; 3];
            for (k, curve) in curves.iter().enumerate() {
                let wl = curve.wavelengths();
                let q = curve.values();
                sigma[k] = trapezoid(wl, q);
                if !(sigma[k] > 0.0) {
                    return Err(Error::DegenerateSensor { channel: k });
                }
                let weighted: Vec<f64> = wl.iter().zip(q).map(|(&nm, &qv)| -C2 / (nm * 1e-9) * qv).collect();
                e[k] = trapezoid(wl, &weighted) / sigma[k];
                let lam5: Vec<f64> = wl.iter().zip(q).map(|(&nm, &qv)| (nm * 1e-9).powi(-5) * qv).collect();
                v[k] = trapezoid(wl, &lam5);
            }
            (e, v, sigma)
        }
    };
    let e_mean = (e[0] + e[1] + e[2]) / 3.0;
    let log_v = [v[0].ln(), v[1].ln(), v[2].ln()];
    let log_mean = (log_v[0] + log_v[1] + log_v[2]) / 3.0;
    let w = [log_v[0] - log_mean, log_v[1] - log_mean, log_v[2] - log_mean];
    Ok(BandConstants { e, e_mean, w, v, sigma })
}

/// Sensor-weighted reflectance `s_k = (1/sigma_k) integral S q_k`.
pub fn effective_reflectance(reflectance: &SpectralCurve, sensors: &SensorSet) -> Result<[f64; 3]> {
    match &sensors.model {
        SensorModel::Delta { wavelengths_nm, .. } => {
            let mut s = [0.0; 3];
            for k in 0..3 {
                s[k] = reflectance
                    .value_at(wavelengths_nm[k])
                    .ok_or_else(|| Error::Domain(format!("reflectance does not cover {} nm", wavelengths_nm[k])))?;
            }
            Ok(s)
        }
        SensorModel::Sampled { curves } => {
            let mut s = [0.0; 3];
            for (k, curve) in curves.iter().enumerate() {
                let (first, last) = curve.support().ok_or(Error::DegenerateSensor { channel: k })?;
                let wl = &curve.wavelengths()[first..=last];
                let q = &curve.values()[first..=last];
                let mut integrand = Vec::with_capacity(wl.len());
                for (&nm, &qv) in wl.iter().zip(q) {
                    let r = reflectance
                        .value_at(nm)
                        .ok_or_else(|| Error::Domain(format!("reflectance does not cover {nm} nm")))?;
                    integrand.push(r * qv);
                }
                let sigma = trapezoid(wl, q);
                s[k] = trapezoid(wl, &integrand) / sigma;
            }
            Ok(s)
        }
    }
}

/// Named columns parsed from a spectral data file.
#[derive(Debug, Clone)]
pub struct SpectralTable {
    pub names: Vec<String>,
    pub curves: Vec<SpectralCurve>,
}

/// Parses the spectral text format: a header line `wavelength_nm name1 name2 ...`
/// followed by whitespace-separated rows. Blank lines and `#` comments are skipped.
pub fn parse_spectral_table(text: &str, kind: CurveKind) -> Result<SpectralTable> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (header_line, header) = lines.next().ok_or(Error::Parse { line: 1, message: "missing header".into() })?;
    let mut cols = header.split_whitespace();
    if cols.next() != Some("wavelength_nm") {
        return Err(Error::Parse {
            line: header_line,
            message: "header must start with `wavelength_nm`".into(),
        });
    }
    let names: Vec<String> = cols.map(str::to_owned).collect();
    if names.is_empty() {
        return Err(Error::Parse { line: header_line, message: "no value columns".into() });
    }
    let mut wavelengths = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for (line, row) in lines {
        let fields: Vec<&str> = row.split_whitespace().collect();
        if fields.len() != names.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", names.len() + 1, fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse { line, message: format!("`{s}` is not a number") })
        };
        wavelengths.push(parse(fields[0])?);
        for (col, field) in columns.iter_mut().zip(&fields[1..]) {
            col.push(parse(field)?);
        }
    }
    let curves = columns
        .into_iter()
        .zip(&names)
        .map(|(values, name)| {
            SpectralCurve::new(kind, wavelengths.clone(), values).map_err(|e| Error::Parse {
                line: header_line,
                message: format!("column `{name}`: {e}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralTable { names, curves })
}

const COLORCHECKER_TXT: &str = include_str!("../data/colorchecker_24.txt");
const D65_TXT: &str = include_str!("../data/cie_d65.txt");

/// The 24 ColorChecker reflectances, patch 1 (dark skin) first, 400-700 nm at 10 nm.
pub fn colorchecker() -> &'static [SpectralCurve] {
    static TABLE: OnceLock<Vec<SpectralCurve>> = OnceLock::new();
    TABLE.get_or_init(|| {
        parse_spectral_table(COLORCHECKER_TXT, CurveKind::Reflectance)
            .expect("bundled ColorChecker data is well formed")
            .curves
    })
}

/// ColorChecker patch by its 1-based number.
pub fn colorchecker_patch(number: usize) -> Result<&'static SpectralCurve> {
    colorchecker()
        .get(number.wrapping_sub(1))
        .ok_or_else(|| Error::InvalidArgument(format!("ColorChecker patch {number} out of range 1-24")))
}

/// Patch numbers 1-18, the chromatic (non-grey) patches.
pub fn chromatic_patch_numbers() -> Vec<usize> {
    (1..=18).collect()
}

/// CIE standard illuminant D65, 380-780 nm at 10 nm.
pub fn cie_d65() -> &'static SpectralCurve {
    static D65: OnceLock<SpectralCurve> = OnceLock::new();
    D65.get_or_init(|| {
        parse_spectral_table(D65_TXT, CurveKind::Illuminant)
            .expect("bundled D65 data is well formed")
            .curves
            .remove(0)
    })
}
