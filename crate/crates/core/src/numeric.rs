//! Small numerical helpers shared by the analyzers: relative-accuracy
//! quadrature on finite intervals and a safeguarded Newton root finder.

use crate::error::{Error, Result};

/// Integrates a smooth, nonnegative-scale function over `[a, b]` to a
/// relative tolerance, using the double-exponential rule.
///
/// The integrand is normalised by its magnitude on a coarse grid first so
/// that the absolute error target of the underlying rule becomes relative.
pub fn integrate_relative<F>(op: &'static str, f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(b > a) {
        return Ok(0.0);
    }
    let scale = (0..=16)
        .map(|i| f(a + (b - a) * i as f64 / 16.0).abs())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        // a peak missed by the probe grid still gets integrated below
        let out = quadrature::double_exponential::integrate(&f, a, b, f64::MIN_POSITIVE);
        return Ok(out.integral);
    }
    let target = rel_tol * (b - a);
    let out = quadrature::double_exponential::integrate(|x| f(x) / scale, a, b, target);
    let rel_achieved = out.error_estimate / out.integral.abs().max(f64::MIN_POSITIVE);
    if out.error_estimate > target && rel_achieved > rel_tol {
        return Err(Error::Quadrature {
            op,
            target: rel_tol,
            achieved: rel_achieved,
        });
    }
    Ok(out.integral * scale)
}

/// Finds the root of `f` in `[lo, hi]` where `f(lo) < 0 < f(hi)`.
///
/// Newton steps from `fdf` (value and derivative) are taken when they stay
/// strictly inside the current bracket; bisection otherwise. Stops when
/// `|f| <= ftol` or the bracket is narrower than `xtol` relative.
pub fn bracketed_newton<F>(
    op: &'static str,
    fdf: F,
    mut lo: f64,
    mut hi: f64,
    ftol: f64,
) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (flo, _) = fdf(lo);
    let (fhi, _) = fdf(hi);
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::NoRoot {
            op,
            detail: format!("no sign change on [{lo}, {hi}]: f = ({flo:e}, {fhi:e})"),
        });
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let (fx, dfx) = fdf(x);
        if !fx.is_finite() {
            // overflowed near a pole of the transform: treat as positive
            hi = x;
            x = 0.5 * (lo + hi);
            continue;
        }
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if (hi - lo) <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        let newton = x - fx / dfx;
        x = if dfx.is_finite() && dfx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}
