//! Scene illuminant estimation.
//!
//! The zeta estimators search for the light chromaticity `rho_e` that makes
//! the log-relative chromaticity of the most specular pixels orthogonal to
//! `rho_e`. White-Patch, Grey-World and Grey-Edge are included as baselines.

pub mod baselines;
pub mod zeta;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use baselines::{grey_edge, grey_world, white_patch, GreyEdgePreset};
pub use zeta::{
    estimate_zeta_free, estimate_zeta_free_field, estimate_zeta_locus, estimate_zeta_locus_field, zeta_field, LrcField,
    RhoField, SimplexGrid, TempSearch, DEFAULT_FRACTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ZetaFree,
    ZetaLocus,
    WhitePatch,
    GreyWorld,
    GreyEdge,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::ZetaLocus, Method::ZetaFree, Method::WhitePatch, Method::GreyWorld, Method::GreyEdge];

    pub fn name(self) -> &'static str {
        match self {
            Method::ZetaFree => "zeta-free",
            Method::ZetaLocus => "zeta-locus",
            Method::WhitePatch => "white-patch",
            Method::GreyWorld => "grey-world",
            Method::GreyEdge => "grey-edge",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// An estimated light chromaticity.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminantEstimate {
    /// L1 chromaticity, strictly positive, summing to 1.
    pub rho_e: [f64; 3],
    /// Set by the locus-constrained search.
    pub temperature_k: Option<f64>,
    /// Sum of `|zeta|` over the selected pixels (zeta methods only).
    pub objective: Option<f64>,
    pub method: Method,
    /// The objective landscape was too flat to trust the minimum.
    pub low_confidence: bool,
}

pub(crate) fn normalize_estimate(v: [f64; 3], method: Method) -> Result<IlluminantEstimate> {
    let sum = v[0] + v[1] + v[2];
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::InsufficientData(format!("{method} found no signal in the image")));
    }
    let rho_e = [v[0] / sum, v[1] / sum, v[2] / sum];
    Ok(IlluminantEstimate { rho_e, temperature_k: None, objective: None, method, low_confidence: rho_e.contains(&0.0) })
}

/// Angle in degrees between two RGB (or chromaticity) vectors.
pub fn angular_error(est: [f64; 3], truth: [f64; 3]) -> Result<f64> {
    let n1 = (est[0] * est[0] + est[1] * est[1] + est[2] * est[2]).sqrt();
    let n2 = (truth[0] * truth[0] + truth[1] * truth[1] + truth[2] * truth[2]).sqrt();
    if !(n1 > 0.0) || !(n2 > 0.0) {
        return Err(Error::InvalidArgument("angular error of a zero vector".into()));
    }
    let cos = (est[0] * truth[0] + est[1] * truth[1] + est[2] * truth[2]) / (n1 * n2);
    Ok(cos.clamp(-1.0, 1.0).acos().to_degrees())
}
