//! Combined bound reports for a queue at one level: the finite-`q` bound,
//! the large-`u` bound and, where available, model-specific asymptotic
//! forms, with the origin of every input recorded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomsum::q_star;
use crate::mg1::{cycle_moments, Clock, LightTailBound, LightTailParams, MG1Model};
use crate::regen::{
    corollary11_bounds, split_moment_envelopes, theorem11_bounds_bracketed, BoundKind, BoundMode,
    BoundReport, CycleMoments, MomentSource, SplitBrackets,
};
use crate::sim::{simulate_cycles, CycleSummary, SimOptions};
use crate::stats::SimEstimate;

/// How a reported input was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Closed-form expression.
    ClosedForm,
    /// Solution of a linear system.
    Solved,
    /// Moment bracket derived from unconditional moments.
    Envelope,
    MonteCarlo,
    UserSupplied,
}

/// A reported input and where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sourced {
    pub value: f64,
    pub source: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    /// The bracket actually fed to the bounds, when one was.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<(f64, f64)>,
}

impl Sourced {
    pub fn new(value: f64, source: Provenance) -> Self {
        Sourced {
            value,
            source,
            stderr: None,
            bracket: None,
        }
    }

    fn estimated(e: SimEstimate) -> Self {
        Sourced {
            stderr: Some(e.stderr),
            ..Sourced::new(e.value, Provenance::MonteCarlo)
        }
    }

    fn with_bracket(mut self, lo: f64, hi: f64) -> Self {
        self.bracket = Some((lo, hi));
        self
    }
}

/// Options shared by the M/G/1 and M/M/1 reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatementOptions {
    pub mode: MomentSource,
    /// Order of the cycle moment `m_γ` used by the finite-`q` bound.
    pub gamma: f64,
    /// Known `E T^γ`; simulated when absent.
    pub m_gamma: Option<f64>,
    /// Cycles simulated for Monte Carlo inputs.
    pub cycles: u64,
    pub seed: u64,
    /// Confidence multiplier. A simulated `m_γ` is used at its upper
    /// `z`-sigma edge in the exact and envelope modes.
    pub z: f64,
    /// Clock of `m̂₁⁺` fed to the bounds.
    pub clock: Clock,
    /// Also report the large-`u` bound with `m̂₁⁺` replaced by its
    /// light-tail upper estimate.
    pub light_tail_substitute: bool,
    pub event_cap: u64,
}

impl Default for StatementOptions {
    fn default() -> Self {
        StatementOptions {
            mode: MomentSource::Exact,
            gamma: 3.0,
            m_gamma: None,
            cycles: 1_000_000,
            seed: 0,
            z: 3.0,
            clock: Clock::Continuous,
            light_tail_substitute: false,
            event_cap: SimOptions::default().event_cap,
        }
    }
}

/// Bounds at one scaled time `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XBlock {
    pub x: f64,
    pub theorem: BoundReport,
    /// Delta-method standard errors of `(lower, upper)` in Monte Carlo mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem_stderr: Option<(f64, f64)>,
    pub corollary: BoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corollary_stderr: Option<(f64, f64)>,
    /// Large-`u` bound with the light-tail estimate of `m̂₁⁺` in the upper
    /// side.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub light_tail_corollary: Option<BoundReport>,
    /// M/M/1 only: the large-`u` form with prefactor `(1−ρ)ρ^{u−1}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mm1_asymptotic: Option<BoundReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementReport {
    pub u: usize,
    pub lambda: f64,
    pub rho: f64,
    pub mode: MomentSource,
    pub clock: Clock,
    pub gamma: f64,
    pub q: Sourced,
    pub q_star: f64,
    pub m1: Sourced,
    pub m2: Sourced,
    pub m_gamma: Sourced,
    pub m1_minus: Sourced,
    pub m2_minus: Sourced,
    pub m_hat1_plus: Sourced,
    /// Exact `m̂₁⁺` on both clocks, when solved.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_hat1_plus_continuous: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_hat1_plus_embedded: Option<f64>,
    /// Embedded minus continuous `m̂₁⁺`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clock_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub light_tail: Option<LightTailParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub light_tail_bound: Option<LightTailBound>,
    pub blocks: Vec<XBlock>,
    pub notes: Vec<String>,
}

impl StatementReport {
    pub fn theorem_reports(&self) -> Vec<BoundReport> {
        self.blocks.iter().map(|b| b.theorem).collect()
    }

    pub fn corollary_reports(&self) -> Vec<BoundReport> {
        self.blocks.iter().map(|b| b.corollary).collect()
    }
}

/// Exact split quantities supplied by an analyzer.
pub(crate) struct ExactSplit {
    pub q: f64,
    pub m1_minus: f64,
    pub m_hat_continuous: f64,
    pub m_hat_embedded: f64,
    pub source: Provenance,
}

fn sim_options(opts: &StatementOptions) -> SimOptions {
    SimOptions {
        seed: opts.seed,
        event_cap: opts.event_cap,
        gamma: opts.gamma,
    }
}

fn check_options(op: &'static str, xs: &[f64], opts: &StatementOptions) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::invalid("x", "grid is empty"));
    }
    if let Some(x) = xs.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
        return Err(Error::domain(op, format!("x = {x} is not in (0, 1)")));
    }
    if !(opts.gamma > 2.0 && opts.gamma.is_finite()) {
        return Err(Error::invalid(
            "gamma",
            format!("must be finite and > 2, got {}", opts.gamma),
        ));
    }
    if !(opts.z.is_finite() && opts.z >= 0.0) {
        return Err(Error::invalid(
            "z",
            format!("must be finite and >= 0, got {}", opts.z),
        ));
    }
    if let Some(m) = opts.m_gamma {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::invalid(
                "m_gamma",
                format!("must be finite and > 0, got {m}"),
            ));
        }
    }
    Ok(())
}

fn needed<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Degenerate {
        op: "statement_report",
        detail: format!("no simulated cycle contributed to {what}; increase the cycle count"),
    })
}

/// Inputs to the bound formulas after mode-specific sourcing.
#[derive(Clone, Copy)]
struct Inputs {
    q: Sourced,
    m1: Sourced,
    m2: Sourced,
    m_gamma: Sourced,
    m1_minus: Sourced,
    m2_minus: Sourced,
    m_hat: Sourced,
    /// Value actually plugged in for `m_γ`.
    m_gamma_used: f64,
    m2_minus_used: (f64, f64),
    m_hat_used: (f64, f64),
}

fn theorem_at(x: f64, inp: &Inputs, gamma: f64) -> Result<BoundReport> {
    let moments = CycleMoments {
        m1: inp.m1.value,
        m2: inp.m2.value,
        m_gamma: inp.m_gamma_used,
        gamma,
    };
    let split = SplitBrackets {
        q: inp.q.value,
        m1_minus: inp.m1_minus.value,
        m2_minus: inp.m2_minus_used,
        m1_plus_hat: inp.m_hat_used,
    };
    theorem11_bounds_bracketed(x, &split, &moments, BoundMode::TwoSided)
}

/// Propagates independent standard errors through `f` by central
/// differences.
fn propagate<F>(base: &[f64], se: &[f64], f: F) -> Option<(f64, f64)>
where
    F: Fn(&[f64]) -> Option<(f64, f64)>,
{
    let mut var = (0.0, 0.0);
    for i in 0..base.len() {
        if se[i] == 0.0 {
            continue;
        }
        let h = 1e-6 * base[i].abs().max(1e-12);
        let mut up = base.to_vec();
        let mut dn = base.to_vec();
        up[i] += h;
        dn[i] -= h;
        let (a, b) = (f(&up)?, f(&dn)?);
        let d = ((a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h));
        var.0 += (d.0 * se[i]).powi(2);
        var.1 += (d.1 * se[i]).powi(2);
    }
    Some((var.0.sqrt(), var.1.sqrt()))
}

pub(crate) fn build_report(
    op: &'static str,
    model: &MG1Model,
    u: usize,
    xs: &[f64],
    opts: &StatementOptions,
    exact: ExactSplit,
) -> Result<StatementReport> {
    check_options(op, xs, opts)?;
    let gamma = opts.gamma;
    let mut notes = Vec::new();
    let (m1, m2) = cycle_moments(model);
    let exact_hat = match opts.clock {
        Clock::Continuous => exact.m_hat_continuous,
        Clock::Embedded => exact.m_hat_embedded,
    };

    let needs_sim = opts.mode == MomentSource::MonteCarlo || opts.m_gamma.is_none();
    let summary: Option<CycleSummary> = if needs_sim {
        Some(simulate_cycles(
            model,
            u as u64,
            opts.cycles,
            &sim_options(opts),
        )?)
    } else {
        None
    };

    let m_gamma = match (opts.m_gamma, &summary) {
        (Some(m), _) => Sourced::new(m, Provenance::UserSupplied),
        (None, Some(s)) => Sourced::estimated(s.m_gamma),
        (None, None) => unreachable!("simulation runs whenever m_gamma is missing"),
    };

    let inp = match opts.mode {
        MomentSource::Exact => {
            let q = exact.q;
            let m_gamma_used = edge(&m_gamma, opts.z);
            let m2m = m2 / (1.0 - q);
            notes.push(
                "m2_minus is its upper bracket m2/(1-q); both bounds are monotone in it".into(),
            );
            Inputs {
                q: Sourced::new(q, exact.source),
                m1: Sourced::new(m1, Provenance::ClosedForm),
                m2: Sourced::new(m2, Provenance::ClosedForm),
                m_gamma,
                m1_minus: Sourced::new(exact.m1_minus, exact.source),
                m2_minus: Sourced::new(m2m, Provenance::Envelope).with_bracket(m2m, m2m),
                m_hat: Sourced::new(exact_hat, exact.source),
                m_gamma_used,
                m2_minus_used: (m2m, m2m),
                m_hat_used: (exact_hat, exact_hat),
            }
        }
        MomentSource::Envelope => {
            let q = exact.q;
            let m_gamma_used = edge(&m_gamma, opts.z);
            let env = split_moment_envelopes(&CycleMoments::new(m1, m2, m_gamma_used, gamma)?, q)?;
            let hat = (1.0 / model.lambda(), env.m1_plus_max);
            notes.push("m_hat1_plus bracketed by [1/lambda, (m_gamma/q)^(1/gamma)]".into());
            Inputs {
                q: Sourced::new(q, exact.source),
                m1: Sourced::new(m1, Provenance::ClosedForm),
                m2: Sourced::new(m2, Provenance::ClosedForm),
                m_gamma,
                m1_minus: Sourced::new(exact.m1_minus, exact.source),
                m2_minus: Sourced::new(env.m2_minus.1, Provenance::Envelope)
                    .with_bracket(env.m2_minus.0, env.m2_minus.1),
                m_hat: Sourced::new(hat.1, Provenance::Envelope).with_bracket(hat.0, hat.1),
                m_gamma_used,
                m2_minus_used: env.m2_minus,
                m_hat_used: hat,
            }
        }
        MomentSource::MonteCarlo => {
            let s = summary.as_ref().expect("simulated in Monte Carlo mode");
            let hat = match opts.clock {
                Clock::Continuous => s.m1_plus_hat_continuous,
                Clock::Embedded => s.m1_plus_hat_embedded,
            };
            let hat = needed(hat, "m_hat1_plus")?;
            let m1m = needed(s.m1_minus, "m1_minus")?;
            let m2m = needed(s.m2_minus, "m2_minus")?;
            notes.push("standard errors propagated assuming independent input estimates".into());
            Inputs {
                q: Sourced::estimated(s.q),
                m1: Sourced::estimated(s.m1),
                m2: Sourced::estimated(s.m2),
                m_gamma_used: m_gamma.value,
                m_gamma,
                m1_minus: Sourced::estimated(m1m),
                m2_minus: Sourced::estimated(m2m),
                m_hat: Sourced::estimated(hat),
                m2_minus_used: (m2m.value, m2m.value),
                m_hat_used: (hat.value, hat.value),
            }
        }
    };

    let q = inp.q.value;
    if !(q > 0.0 && q < 0.5) {
        return Err(Error::domain(
            op,
            format!("q(u) = {q} is not in (0, 1/2); raise the level"),
        ));
    }
    let qs = q_star(q)?;

    let light_tail = crate::mg1::light_tail_params(model);
    let light_tail_bound = crate::mg1::mhat_light_tail_bound(model, u, q);
    if let Err(e) = &light_tail {
        notes.push(format!("light-tail constants unavailable: {e}"));
    }

    let mut blocks = Vec::with_capacity(xs.len());
    for &x in xs {
        let theorem = theorem_at(x, &inp, gamma)?;
        let ratio = inp.m_hat.value / inp.m1_minus.value;
        let corollary = corollary11_bounds(x, q, inp.m1.value, inp.m2.value, ratio)?;
        let (theorem_stderr, corollary_stderr) = if opts.mode == MomentSource::MonteCarlo {
            let base = [
                q,
                inp.m1_minus.value,
                inp.m2_minus.value,
                inp.m_hat.value,
                inp.m_gamma_used,
            ];
            let se = [
                &inp.q,
                &inp.m1_minus,
                &inp.m2_minus,
                &inp.m_hat,
                &inp.m_gamma,
            ]
            .map(|s| s.stderr.unwrap_or(0.0));
            let t = propagate(&base, &se, |v| {
                let perturbed = Inputs {
                    q: Sourced::new(v[0], Provenance::MonteCarlo),
                    m1_minus: Sourced::new(v[1], Provenance::MonteCarlo),
                    m2_minus_used: (v[2], v[2]),
                    m_hat_used: (v[3], v[3]),
                    m_gamma_used: v[4],
                    ..inp
                };
                let r = theorem_at(x, &perturbed, gamma).ok()?;
                Some((r.lower, r.upper?))
            });
            let cbase = [q, inp.m1.value, inp.m2.value, ratio];
            let ratio_se = ratio
                * ((inp.m_hat.stderr.unwrap_or(0.0) / inp.m_hat.value).powi(2)
                    + (inp.m1_minus.stderr.unwrap_or(0.0) / inp.m1_minus.value).powi(2))
                .sqrt();
            let cse = [
                inp.q.stderr.unwrap_or(0.0),
                inp.m1.stderr.unwrap_or(0.0),
                inp.m2.stderr.unwrap_or(0.0),
                ratio_se,
            ];
            let c = propagate(&cbase, &cse, |v| {
                let r = corollary11_bounds(x, v[0], v[1], v[2], v[3]).ok()?;
                Some((r.lower, r.upper?))
            });
            (t, c)
        } else {
            (None, None)
        };
        let light_tail_corollary = match (&light_tail_bound, opts.light_tail_substitute) {
            (Ok(b), true) => {
                let sub = corollary11_bounds(
                    x,
                    q,
                    inp.m1.value,
                    inp.m2.value,
                    b.from_gamma / inp.m1_minus.value,
                )?;
                Some(BoundReport::with_parts(
                    BoundKind::Corollary,
                    x,
                    q,
                    qs,
                    ratio,
                    corollary.lower,
                    sub.upper,
                ))
            }
            _ => None,
        };
        blocks.push(XBlock {
            x,
            theorem,
            theorem_stderr,
            corollary,
            corollary_stderr,
            light_tail_corollary,
            mm1_asymptotic: None,
        });
    }

    Ok(StatementReport {
        u,
        lambda: model.lambda(),
        rho: model.rho(),
        mode: opts.mode,
        clock: opts.clock,
        gamma,
        q: inp.q,
        q_star: qs,
        m1: inp.m1,
        m2: inp.m2,
        m_gamma: inp.m_gamma,
        m1_minus: inp.m1_minus,
        m2_minus: inp.m2_minus,
        m_hat1_plus: inp.m_hat,
        m_hat1_plus_continuous: Some(exact.m_hat_continuous),
        m_hat1_plus_embedded: Some(exact.m_hat_embedded),
        clock_gap: Some(exact.m_hat_embedded - exact.m_hat_continuous),
        light_tail: light_tail.ok(),
        light_tail_bound: light_tail_bound.ok(),
        blocks,
        notes,
    })
}

/// The upper `z`-sigma edge of a simulated value; other values as given.
fn edge(s: &Sourced, z: f64) -> f64 {
    s.value + z * s.stderr.unwrap_or(0.0)
}
