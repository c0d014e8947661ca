//! Checks computed bounds against a simulated `Δ̂(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regen::BoundReport;
use crate::stats::SimEstimate;

/// Default half-width of the acceptance band, in standard errors.
pub const DEFAULT_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Some report carried no information, so nothing was checked.
    Uninformative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckedPoint {
    pub x: f64,
    pub lower: f64,
    pub upper: Option<f64>,
    pub delta: SimEstimate,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub verdict: Verdict,
    pub z: f64,
    pub points: Vec<CheckedPoint>,
}

/// Passes iff `lower − zσ ≤ Δ̂(x) ≤ upper + zσ` at every grid point.
/// A missing upper bound is not checked.
pub fn verify_report(
    reports: &[BoundReport],
    empirical: &[(f64, SimEstimate)],
    z: f64,
) -> Result<VerifyOutcome> {
    let op = "verify_report";
    if reports.len() != empirical.len() || reports.is_empty() {
        return Err(Error::domain(
            op,
            format!(
                "{} reports against {} empirical points",
                reports.len(),
                empirical.len()
            ),
        ));
    }
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::invalid(
            "z",
            format!("must be finite and >= 0, got {z}"),
        ));
    }
    let mut points = Vec::with_capacity(reports.len());
    for (r, (x, d)) in reports.iter().zip(empirical) {
        if (r.x - x).abs() > 1e-12 * (1.0 + x.abs()) {
            return Err(Error::domain(
                op,
                format!("grid mismatch: report x = {}, empirical x = {x}", r.x),
            ));
        }
        let band = z * d.stderr;
        let ok = d.value >= r.lower - band && r.upper.map_or(true, |u| d.value <= u + band);
        points.push(CheckedPoint {
            x: *x,
            lower: r.lower,
            upper: r.upper,
            delta: *d,
            ok,
        });
    }
    let verdict = if reports.iter().any(|r| !r.informative) {
        Verdict::Uninformative
    } else if points.iter().all(|p| p.ok) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(VerifyOutcome { verdict, z, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regen::{BoundKind, BoundReport};

    fn report(x: f64, lower: f64, upper: f64) -> BoundReport {
        BoundReport::with_parts(BoundKind::Theorem, x, 0.01, 0.01, 1.0, lower, Some(upper))
    }

    fn est(v: f64) -> SimEstimate {
        SimEstimate {
            value: v,
            stderr: 1e-3,
            n: 1_000_000,
        }
    }

    #[test]
    fn pass_and_fail() {
        let rs = [report(0.2, -0.01, 0.01), report(0.4, -0.01, 0.01)];
        let ok = verify_report(&rs, &[(0.2, est(0.0)), (0.4, est(0.012))], 3.0).unwrap();
        assert_eq!(ok.verdict, Verdict::Pass);
        let bad = verify_report(&rs, &[(0.2, est(0.0)), (0.4, est(0.02))], 3.0).unwrap();
        assert_eq!(bad.verdict, Verdict::Fail);
        assert!(!bad.points[1].ok);
    }

    #[test]
    fn huge_bounds_are_uninformative() {
        let rs = [report(0.2, -5.0, 7.0)];
        let out = verify_report(&rs, &[(0.2, est(0.0))], 3.0).unwrap();
        assert_eq!(out.verdict, Verdict::Uninformative);
    }

    #[test]
    fn grids_must_match() {
        let rs = [report(0.2, -0.01, 0.01)];
        assert!(verify_report(&rs, &[(0.3, est(0.0))], 3.0).is_err());
        assert!(verify_report(&rs, &[], 3.0).is_err());
    }
}
