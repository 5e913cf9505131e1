//! Calibration profile text format.
//!
//! One `key = value` pair per line; `#` starts a comment line. Floats are
//! written in Rust's shortest round-trip form so a profile reloads bit-exactly.
//!
//! ```text
//! format = daylocus-profile-1
//! basis = canonical-v1
//! eta = 0.1 -0.2
//! xi = -1500 2600
//! t_range = 6500 9500        # or "none"
//! eigen_ratio = inf         # optional
//! lms_residual = 1e-9       # optional
//! outliers = 3 7            # optional, space separated
//! warning = free text       # repeatable
//! ```

use std::fmt::Write as _;

use super::{LocusDiagnostics, LocusParams};
use crate::chroma::ProjectionBasis;
use crate::error::{Error, Result};

pub const FORMAT_ID: &str = "daylocus-profile-1";

pub fn write_profile(locus: &LocusParams) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# daylocus calibration profile");
    let _ = writeln!(s, "format = {FORMAT_ID}");
    let _ = writeln!(s, "basis = {}", ProjectionBasis::CANONICAL_ID);
    let _ = writeln!(s, "eta = {} {}", locus.eta[0], locus.eta[1]);
    let _ = writeln!(s, "xi = {} {}", locus.xi[0], locus.xi[1]);
    match locus.t_range {
        Some([lo, hi]) => {
            let _ = writeln!(s, "t_range = {lo} {hi}");
        }
        None => {
            let _ = writeln!(s, "t_range = none");
        }
    }
    let d = &locus.diagnostics;
    if let Some(r) = d.eigen_ratio {
        let _ = writeln!(s, "eigen_ratio = {r}");
    }
    if let Some(r) = d.lms_residual {
        let _ = writeln!(s, "lms_residual = {r}");
    }
    if !d.outliers.is_empty() {
        let list: Vec<String> = d.outliers.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "outliers = {}", list.join(" "));
    }
    for w in &d.warnings {
        let _ = writeln!(s, "warning = {}", w.replace('\n', " "));
    }
    s
}

fn floats<const N: usize>(line: usize, value: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != N {
        return Err(Error::Parse { line, message: format!("expected {N} numbers, got {}", parts.len()) });
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| Error::Parse { line, message: format!("bad number {p:?}") })?;
    }
    Ok(out)
}

pub fn parse_profile(text: &str) -> Result<LocusParams> {
    let mut eta = None;
    let mut xi = None;
    let mut t_range = None;
    let mut seen_range = false;
    let mut basis_ok = false;
    let mut diagnostics = LocusDiagnostics::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, message: "expected key = value".into() })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "format" if value == FORMAT_ID => {}
            "format" => return Err(Error::Parse { line, message: format!("unknown format {value:?}") }),
            "basis" if value == ProjectionBasis::CANONICAL_ID => basis_ok = true,
            "basis" => return Err(Error::Parse { line, message: format!("unsupported basis {value:?}") }),
            "eta" => eta = Some(floats::<2>(line, value)?),
            "xi" => xi = Some(floats::<2>(line, value)?),
            "t_range" => {
                seen_range = true;
                t_range = if value == "none" { None } else { Some(floats::<2>(line, value)?) };
            }
            "eigen_ratio" => diagnostics.eigen_ratio = Some(floats::<1>(line, value)?[0]),
            "lms_residual" => diagnostics.lms_residual = Some(floats::<1>(line, value)?[0]),
            "outliers" => {
                diagnostics.outliers = value
                    .split_whitespace()
                    .map(|p| p.parse().map_err(|_| Error::Parse { line, message: format!("bad index {p:?}") }))
                    .collect::<Result<_>>()?;
            }
            "warning" => diagnostics.warnings.push(value.to_string()),
            other => return Err(Error::Parse { line, message: format!("unknown key {other:?}") }),
        }
    }
    let missing = |k: &str| Error::Parse { line: 0, message: format!("missing key {k:?}") };
    if !basis_ok {
        return Err(missing("basis"));
    }
    if !seen_range {
        return Err(missing("t_range"));
    }
    let locus = LocusParams { eta: eta.ok_or_else(|| missing("eta"))?, xi: xi.ok_or_else(|| missing("xi"))?, t_range, diagnostics };
    locus.validate()?;
    Ok(locus)
}
