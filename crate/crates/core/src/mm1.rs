//! Closed forms for the M/M/1 queue.
//!
//! Between visits to `0` the queue length observed at its change epochs is
//! a simple random walk with up-probability `p = λ/(λ+μ) < 1/2`, and every
//! step takes an independent `Exp(λ+μ)` time. Gambler's-ruin formulas for
//! the walk absorbed at `0` and `u` then give `q(u)`, `m̂₁⁺` and `m₁⁻`
//! exactly.
//!
//! All expressions are written in terms of `r = ρ^u ≤ 1`, so nothing
//! overflows for large `u`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};
use crate::mg1::{LightTailParams, MG1Model};
use crate::regen::{BoundKind, BoundReport};
use crate::report::{build_report, ExactSplit, Provenance, StatementOptions, StatementReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MM1Model {
    lambda: f64,
    mu: f64,
}

impl MM1Model {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("must be finite and > 0, got {lambda}"),
            ));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(
                "mu",
                format!("must be finite and > 0, got {mu}"),
            ));
        }
        if !(lambda < mu) {
            return Err(Error::invalid(
                "lambda",
                format!("load rho = {} must be < 1", lambda / mu),
            ));
        }
        Ok(MM1Model { lambda, mu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    /// Up-probability of the walk.
    pub fn p(&self) -> f64 {
        self.lambda / (self.lambda + self.mu)
    }

    pub fn to_mg1(&self) -> MG1Model {
        MG1Model::new(
            self.lambda,
            ServiceDistribution::exponential(self.mu).expect("validated rate"),
        )
        .expect("validated load")
    }

    /// `ρ^u`
    fn r(&self, u: usize) -> f64 {
        (u as f64 * self.rho().ln()).exp()
    }

    /// `1 − ρ^u`, accurate when `ρ^u` is close to 1.
    fn one_minus_r(&self, u: usize) -> f64 {
        -(u as f64 * self.rho().ln()).exp_m1()
    }
}

/// Values and first derivatives at `s = 1` of the roots `h₁(s)`, `h₂(s)` of
/// `p s h² − h + (1−p) s = 0` that generate the walk's absorption laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkTransforms {
    pub h1_at_1: f64,
    pub h2_at_1: f64,
    pub dh1_at_1: f64,
    pub dh2_at_1: f64,
}

impl WalkTransforms {
    pub fn at_one(model: &MM1Model) -> Self {
        let p = model.p();
        WalkTransforms {
            h1_at_1: (1.0 - p) / p,
            h2_at_1: 1.0,
            dh1_at_1: -(1.0 - p) / (p * (1.0 - 2.0 * p)),
            dh2_at_1: 1.0 / (1.0 - 2.0 * p),
        }
    }

    /// `P'_{1,u}(1)` for `P_{1,u} = (h₁ − h₂)/(h₁^u − h₂^u)`, the mean
    /// number of steps on paths absorbed at `u`. Overflows for very large
    /// `u`; [`reach_mean_star`] is the stable form.
    pub fn reach_mean_star(&self, u: usize) -> f64 {
        let (h1, h2, d1, d2) = (self.h1_at_1, self.h2_at_1, self.dh1_at_1, self.dh2_at_1);
        let n = u as i32;
        let den = h1.powi(n) - h2.powi(n);
        ((d1 - d2) * den - (h1 - h2) * u as f64 * (h1.powi(n - 1) * d1 - h2.powi(n - 1) * d2))
            / (den * den)
    }

    /// `P_{1,0}(1) = ((1−p)/p)(h₁^{u−1} − h₂^{u−1})/(h₁^u − h₂^u)`.
    pub fn absorption_at_zero(&self, u: usize) -> f64 {
        let n = u as i32;
        self.h1_at_1 * (self.h1_at_1.powi(n - 1) - self.h2_at_1.powi(n - 1))
            / (self.h1_at_1.powi(n) - self.h2_at_1.powi(n))
    }
}

fn check_u(op: &'static str, u: usize, min: usize) -> Result<()> {
    if u < min {
        return Err(Error::domain(op, format!("level u = {u} must be >= {min}")));
    }
    Ok(())
}

/// `q(u) = (1−ρ)ρ^{u−1}/(1−ρ^u)`.
pub fn exceedance(model: &MM1Model, u: usize) -> Result<f64> {
    check_u("exceedance", u, 1)?;
    let lr = model.rho().ln();
    if lr.abs() < 1e-6 {
        // (1−ρ)/(1−ρ^u) → 1/u near criticality
        let uf = u as f64;
        return Ok((lr * (uf - 1.0)).exp() * (1.0 + lr * (1.0 - uf) / 2.0) / uf);
    }
    Ok((lr * (u as f64 - 1.0)).exp() * lr.exp_m1() / (u as f64 * lr).exp_m1())
}

/// `P(absorbed at 0)` for the walk from `1`, in the stable form
/// `(1 − ρ^{u−1})/(1 − ρ^u)`.
pub fn absorption_at_zero(model: &MM1Model, u: usize) -> Result<f64> {
    check_u("absorption_at_zero", u, 1)?;
    Ok(model.one_minus_r(u - 1) / model.one_minus_r(u))
}

/// Mean number of steps until the walk from `1` is absorbed at `0` or `u`:
/// `(1/(1−2p))(1 − u(1/ρ − 1)ρ^u/(1 − ρ^u))`.
pub fn absorption_mean_star(model: &MM1Model, u: usize) -> Result<f64> {
    check_u("absorption_mean_star", u, 1)?;
    let p = model.p();
    let rho = model.rho();
    let r = model.r(u);
    Ok((1.0 - u as f64 * (1.0 / rho - 1.0) * r / model.one_minus_r(u)) / (1.0 - 2.0 * p))
}

/// `E[χ; absorbed at u]` in steps:
/// `r((1/ρ − 1)u(1+r) − (1−r)/p) / ((1−2p)(1−r)²)` with `r = ρ^u`.
pub fn reach_mean_star(model: &MM1Model, u: usize) -> Result<f64> {
    check_u("reach_mean_star", u, 2)?;
    let p = model.p();
    let rho = model.rho();
    let r = model.r(u);
    let omr = model.one_minus_r(u);
    let v =
        r * ((1.0 / rho - 1.0) * u as f64 * (1.0 + r) - omr / p) / ((1.0 - 2.0 * p) * omr * omr);
    if !(v > 0.0) {
        return Err(Error::Degenerate {
            op: "reach_mean_star",
            detail: format!("nonpositive value {v:e} at rho = {rho}, u = {u}"),
        });
    }
    Ok(v)
}

/// `E[χ; absorbed at 0]` in steps.
pub fn return_mean_star(model: &MM1Model, u: usize) -> Result<f64> {
    Ok(absorption_mean_star(model, u)? - reach_mean_star(model, u)?)
}

/// `₀m_{1,u}`: expected time on paths from `1` that reach `u` before `0`.
pub fn reach_mean_time(model: &MM1Model, u: usize) -> Result<f64> {
    Ok(reach_mean_star(model, u)? / (model.lambda + model.mu))
}

/// `m̂₁⁺ = 1/λ + ₀m_{1,u}/q(u)`, with the hit at the arrival reaching `u`.
pub fn mhat1_plus(model: &MM1Model, u: usize) -> Result<f64> {
    if u == 1 {
        return Ok(1.0 / model.lambda);
    }
    Ok(1.0 / model.lambda + reach_mean_time(model, u)? / exceedance(model, u)?)
}

/// [`mhat1_plus`] measured to the end of the service in progress at the hit.
pub fn mhat1_plus_embedded(model: &MM1Model, u: usize) -> Result<f64> {
    // memoryless service: the residual is a fresh Exp(mu)
    Ok(mhat1_plus(model, u)? + if u >= 2 { 1.0 / model.mu } else { 0.0 })
}

/// Large-`u` form of `m̂₁⁺` with the `O(uρ^u)` remainder dropped:
/// `1/λ + (u − ρ/(p(1−ρ)))/((1−2p)(λ+μ))`, linear in `u` with slope
/// `1/(μ−λ)`.
pub fn mhat1_plus_asymptotic(model: &MM1Model, u: usize) -> Result<f64> {
    check_u("mhat1_plus_asymptotic", u, 2)?;
    let p = model.p();
    let rho = model.rho();
    let lm = model.lambda + model.mu;
    Ok(1.0 / model.lambda + (u as f64 - rho / (p * (1.0 - rho))) / ((1.0 - 2.0 * p) * lm))
}

/// `m₁⁻ = 1/λ + ᵤm_{1,0}/(1 − q(u))`.
pub fn m1_minus(model: &MM1Model, u: usize) -> Result<f64> {
    check_u("m1_minus", u, 2)?;
    let ret = return_mean_star(model, u)? / (model.lambda + model.mu);
    Ok(1.0 / model.lambda + ret / absorption_at_zero(model, u)?)
}

/// `(m₁, m₂)` of the cycle.
pub fn cycle_moments(model: &MM1Model) -> (f64, f64) {
    crate::mg1::cycle_moments(&model.to_mg1())
}

/// `m₂/m₁² = 2(1−ρ) + 2ρ²/(1−ρ)`.
pub fn normalized_m2(model: &MM1Model) -> f64 {
    let rho = model.rho();
    2.0 * (1.0 - rho) + 2.0 * rho * rho / (1.0 - rho)
}

/// Light-tail constants in closed form: `β = μ−λ`, `γ = ln(μ/λ)`,
/// `v_λ = μ − √(λμ)`, `α = (√μ − √λ)²`.
pub fn light_tail_params(model: &MM1Model) -> LightTailParams {
    let (l, m) = (model.lambda, model.mu);
    LightTailParams {
        beta: m - l,
        gamma_rate: (m / l).ln(),
        v_lambda: m - (l * m).sqrt(),
        alpha: (m.sqrt() - l.sqrt()).powi(2),
    }
}

/// Large-`u` bounds with the queue-specific prefactor `(1−ρ)ρ^{u−1}`:
///
/// ```text
/// lower = e^{−x}(1−ρ)ρ^{u−1}(ratio − 2(1−ρ+ρ²/(1−ρ)))
/// upper = e^{−x}(1−ρ)ρ^{u−1}(ratio(1+2x(e−2)) + 8(e−2)(1−ρ+ρ²/(1−ρ))x − x)
/// ```
pub fn mm1_asymptotic_bounds(
    model: &MM1Model,
    u: usize,
    x: f64,
    ratio: f64,
) -> Result<BoundReport> {
    let op = "mm1_asymptotic_bounds";
    check_u(op, u, 2)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(op, format!("x = {x} is not in (0, 1)")));
    }
    let rho = model.rho();
    let prefactor = (1.0 - rho) * (rho.ln() * (u as f64 - 1.0)).exp();
    let k = 1.0 - rho + rho * rho / (1.0 - rho);
    let e = (-x).exp();
    let lower = e * prefactor * (ratio - 2.0 * k);
    let upper = e * prefactor * (ratio * (1.0 + 2.0 * x * (E - 2.0)) + 8.0 * (E - 2.0) * k * x - x);
    Ok(BoundReport::with_parts(
        BoundKind::MM1Asymptotic,
        x,
        exceedance(model, u)?,
        prefactor,
        ratio,
        lower,
        Some(upper),
    ))
}

/// Finite-`q`, large-`u` and queue-specific bounds at level `u`, one block
/// per `x` in `xs`. Refuses levels with `q(u) >= 1/2`.
pub fn statement42_report(
    model: &MM1Model,
    u: usize,
    xs: &[f64],
    opts: &StatementOptions,
) -> Result<StatementReport> {
    let op = "statement42_report";
    check_u(op, u, 2)?;
    let q = exceedance(model, u)?;
    if !(q < 0.5) {
        return Err(Error::domain(
            op,
            format!("q(u) = {q} is not below 1/2; raise the level"),
        ));
    }
    let exact = ExactSplit {
        q,
        m1_minus: m1_minus(model, u)?,
        m_hat_continuous: mhat1_plus(model, u)?,
        m_hat_embedded: mhat1_plus_embedded(model, u)?,
        source: Provenance::ClosedForm,
    };
    let mut report = build_report(op, &model.to_mg1(), u, xs, opts, exact)?;
    let ratio = report.m_hat1_plus.value / report.m1_minus.value;
    for b in &mut report.blocks {
        b.mm1_asymptotic = Some(mm1_asymptotic_bounds(model, u, b.x, ratio)?);
    }
    report.light_tail = Some(light_tail_params(model));
    report
        .notes
        .push("m1_minus includes the mean idle time 1/lambda".into());
    Ok(report)
}
