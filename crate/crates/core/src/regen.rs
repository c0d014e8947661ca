//! Two-sided bounds on the exponential approximation of the first time a
//! regenerative process reaches level `u`.
//!
//! With `q` the probability that a cycle reaches the level, `m₁⁻` the mean
//! length of cycles that do not, and `m̂₁⁺` the mean time to reach the level
//! within a cycle that does, the quantity bounded is
//!
//! ```text
//! Δ_X(x) = 1 − e^{−x} − P(q* 𝔗_X(u) / m₁⁻ ≤ x),    q* = −ln(1 − q).
//! ```
//!
//! The first passage time is a delayed geometric sum of cycle pieces, so the
//! bounds are [`crate::geomsum`]'s lemmas with the delay tail and partial
//! mean replaced by moment (Markov-type) bounds.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomsum::q_star;

/// Unconditional regeneration-cycle moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleMoments {
    pub m1: f64,
    pub m2: f64,
    /// `E T^γ`
    pub m_gamma: f64,
    pub gamma: f64,
}

impl CycleMoments {
    pub fn new(m1: f64, m2: f64, m_gamma: f64, gamma: f64) -> Result<Self> {
        let op = "cycle_moments";
        if !(m1.is_finite() && m1 > 0.0) {
            return Err(Error::domain(op, format!("m1 = {m1} must be > 0")));
        }
        if !(m2.is_finite() && m2 >= m1 * m1 * (1.0 - 1e-12)) {
            return Err(Error::domain(
                op,
                format!("m2 = {m2} is below m1^2 = {}", m1 * m1),
            ));
        }
        if !(gamma.is_finite() && gamma > 2.0) {
            return Err(Error::domain(op, format!("gamma = {gamma} must be > 2")));
        }
        if !(m_gamma.is_finite() && m_gamma >= m1.powf(gamma) * (1.0 - 1e-12)) {
            return Err(Error::domain(
                op,
                format!("m_gamma = {m_gamma} is below m1^gamma = {}", m1.powf(gamma)),
            ));
        }
        Ok(CycleMoments {
            m1,
            m2,
            m_gamma,
            gamma,
        })
    }

    /// `m₂ / m₁²`
    pub fn normalized_m2(&self) -> f64 {
        self.m2 / (self.m1 * self.m1)
    }
}

/// Where the split statistics came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentSource {
    Exact,
    Envelope,
    MonteCarlo,
}

/// Statistics of the split of cycles into those that stay below `u`
/// (type 1) and those that reach it (type 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCycleStats {
    pub q: f64,
    pub m1_minus: f64,
    pub m2_minus: f64,
    pub m1_plus_hat: f64,
    pub source: MomentSource,
}

impl SplitCycleStats {
    /// `m̂₁⁺ / m₁⁻`
    pub fn ratio(&self) -> f64 {
        self.m1_plus_hat / self.m1_minus
    }
}

/// `(1 − q) m_r⁻ + q m_r⁺ = m_r`.
pub fn split_moment_identity(m_r_minus: f64, m_r_plus: f64, q: f64) -> f64 {
    (1.0 - q) * m_r_minus + q * m_r_plus
}

/// Closed-form brackets for the conditional moments implied by the
/// unconditional ones through the split identity and Hölder's inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitEnvelopes {
    pub q: f64,
    pub gamma: f64,
    pub m_gamma: f64,
    pub m1_minus: (f64, f64),
    pub m2_minus: (f64, f64),
    pub m1_plus_max: f64,
    pub m2_plus_max: f64,
    /// Bound on both `m̂_γ⁺` and `m_γ⁺`.
    pub m_gamma_plus_max: f64,
}

impl SplitEnvelopes {
    /// `1 − F̂(t) ≤ m_γ / (q t^γ)`, capped at 1.
    pub fn reach_tail_bound(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (self.m_gamma / (self.q * t.powf(self.gamma))).min(1.0)
    }

    /// `g(t) = (1/m₁⁻) ∫_t^∞ y dF̂(y) ≤ γ m_γ / (q m₁⁻ (γ−1) t^{γ−1})`.
    pub fn reach_partial_mean_bound(&self, t: f64, m1_minus: f64) -> f64 {
        let g = self.gamma;
        g * self.m_gamma / (self.q * m1_minus * (g - 1.0) * t.powf(g - 1.0))
    }
}

pub fn split_moment_envelopes(moments: &CycleMoments, q: f64) -> Result<SplitEnvelopes> {
    let op = "split_moment_envelopes";
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(op, format!("q = {q} is not in (0, 1)")));
    }
    let CycleMoments {
        m1,
        m2,
        m_gamma,
        gamma,
    } = *moments;
    let m1_lo = (m1 - m_gamma.powf(1.0 / gamma) * q.powf(1.0 - 1.0 / gamma)) / (1.0 - q);
    if m1_lo <= 0.0 {
        return Err(Error::Degenerate {
            op,
            detail: format!("lower bracket for m1- is {m1_lo:e} <= 0 at q = {q}"),
        });
    }
    let m2_lo = (m2 - m_gamma.powf(2.0 / gamma) * q.powf(1.0 - 2.0 / gamma)) / (1.0 - q);
    Ok(SplitEnvelopes {
        q,
        gamma,
        m_gamma,
        m1_minus: (m1_lo, m1 / (1.0 - q)),
        // m2- is a second moment, so it is at least (m1-)^2 as well
        m2_minus: (m2_lo.max(m1_lo * m1_lo), m2 / (1.0 - q)),
        m1_plus_max: (m_gamma / q).powf(1.0 / gamma),
        m2_plus_max: (m_gamma / q).powf(2.0 / gamma),
        m_gamma_plus_max: m_gamma / q,
    })
}

/// Which bound family produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Finite-`q` two-sided bound.
    Theorem,
    /// Large-`u` form with the vanishing terms dropped.
    Corollary,
    /// The M/M/1 large-`u` form with `(1−ρ)ρ^{u−1}` in place of `q*`.
    MM1Asymptotic,
}

/// Bounds on `Δ_X(x)` at one scaled time `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub x: f64,
    pub q: f64,
    pub q_star: f64,
    /// `m̂₁⁺ / m₁⁻`
    pub ratio: f64,
    pub lower: f64,
    /// Absent in lower-only mode (`x >= 1`).
    pub upper: Option<f64>,
    /// `e^{−x}`, the exponential reference term.
    pub exponential_term: f64,
    /// Lower bound on `1 − G_X(x m₁⁻/q*)`, equal to `e^{−x} + lower`.
    pub tail_lower: f64,
    /// `false` when `lower <= −1` or `upper >= 1`.
    pub informative: bool,
    /// `upper < lower`.
    pub inverted: bool,
    /// Vanishing terms were set to zero.
    pub asymptotic: bool,
}

impl BoundReport {
    fn assemble(
        kind: BoundKind,
        x: f64,
        q: f64,
        qs: f64,
        ratio: f64,
        lower: f64,
        upper: Option<f64>,
    ) -> Self {
        let e = (-x).exp();
        BoundReport {
            kind,
            x,
            q,
            q_star: qs,
            ratio,
            lower,
            upper,
            exponential_term: e,
            tail_lower: e + lower,
            informative: lower > -1.0 && upper.map_or(true, |u| u < 1.0),
            inverted: upper.is_some_and(|u| u < lower),
            asymptotic: kind != BoundKind::Theorem,
        }
    }

    pub(crate) fn with_parts(
        kind: BoundKind,
        x: f64,
        q: f64,
        prefactor: f64,
        ratio: f64,
        lower: f64,
        upper: Option<f64>,
    ) -> Self {
        Self::assemble(kind, x, q, prefactor, ratio, lower, upper)
    }
}

/// Whether the upper bound is requested. The lower bound holds for every
/// `x > 0`; the upper one only for `0 < x < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMode {
    TwoSided,
    LowerOnly,
}

fn check_x(op: &'static str, x: f64, mode: BoundMode) -> Result<()> {
    let ok = match mode {
        BoundMode::TwoSided => x > 0.0 && x < 1.0,
        BoundMode::LowerOnly => x > 0.0 && x.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::domain(
            op,
            format!("x = {x} is outside the admissible range for {mode:?}"),
        ))
    }
}

fn check_q(op: &'static str, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 0.5) {
        return Err(Error::domain(op, format!("q = {q} is not in (0, 1/2)")));
    }
    q_star(q)
}

/// Split statistics known only up to brackets. Each bound uses the side of
/// each bracket that keeps it valid: the lower bound takes the smallest
/// `m̂₁⁺` and largest `m₂⁻`, the upper bound the largest of both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitBrackets {
    pub q: f64,
    pub m1_minus: f64,
    pub m2_minus: (f64, f64),
    pub m1_plus_hat: (f64, f64),
}

impl From<&SplitCycleStats> for SplitBrackets {
    fn from(s: &SplitCycleStats) -> Self {
        SplitBrackets {
            q: s.q,
            m1_minus: s.m1_minus,
            m2_minus: (s.m2_minus, s.m2_minus),
            m1_plus_hat: (s.m1_plus_hat, s.m1_plus_hat),
        }
    }
}

/// Finite-`q` bounds
///
/// ```text
/// lower = e^{−x} q* (m̂₁⁺/m₁⁻ − ℂ₀)
/// upper = e^{−x} q* ((m̂₁⁺/m₁⁻)(1 + 2x(e−2)) + ℂ₁ + ℂ₂)
/// ℂ₀ = a + γ m_γ (q*)^{γ−2} (1+q) / ((γ−1) x^{γ−1} (m₁⁻)^γ)
/// ℂ₁ = (2x(e−2) + 1) m_γ (q*)^{γ−2} (1+q) / ((m₁⁻)^γ x^{γ−1})
/// ℂ₂ = (e−2)((2a+1)(x + (a−1)q*) + 2ax − 2x + q*),    a = m₂⁻/(m₁⁻)²
/// ```
pub fn theorem11_bounds(
    x: f64,
    split: &SplitCycleStats,
    moments: &CycleMoments,
    mode: BoundMode,
) -> Result<BoundReport> {
    theorem11_bounds_bracketed(x, &SplitBrackets::from(split), moments, mode)
}

/// [`theorem11_bounds`] for bracketed split statistics.
pub fn theorem11_bounds_bracketed(
    x: f64,
    split: &SplitBrackets,
    moments: &CycleMoments,
    mode: BoundMode,
) -> Result<BoundReport> {
    let op = "theorem11_bounds";
    check_x(op, x, mode)?;
    let qs = check_q(op, split.q)?;
    if !(moments.gamma > 2.0) {
        return Err(Error::domain(
            op,
            format!("gamma = {} must be > 2", moments.gamma),
        ));
    }
    let m1m = split.m1_minus;
    if !(m1m > 0.0) {
        return Err(Error::domain(op, format!("m1_minus = {m1m} must be > 0")));
    }
    let q = split.q;
    let g = moments.gamma;
    let scale = (-x).exp() * qs;
    // moment bound on the reach-time law, per unit of q*
    let reach = moments.m_gamma * qs.powf(g - 2.0) * (1.0 + q) / (m1m.powf(g) * x.powf(g - 1.0));

    let a_hi = split.m2_minus.1 / (m1m * m1m);
    let c0 = a_hi + g / (g - 1.0) * reach;
    let lower = scale * (split.m1_plus_hat.0 / m1m - c0);

    let upper = match mode {
        BoundMode::LowerOnly => None,
        BoundMode::TwoSided => {
            let c1 = (2.0 * x * (E - 2.0) + 1.0) * reach;
            let c2 = c2_term(x, qs, a_hi);
            let lead = split.m1_plus_hat.1 / m1m * (1.0 + 2.0 * x * (E - 2.0));
            Some(scale * (lead + c1 + c2))
        }
    };
    Ok(BoundReport::assemble(
        BoundKind::Theorem,
        x,
        q,
        qs,
        split.m1_plus_hat.0 / m1m,
        lower,
        upper,
    ))
}

fn c2_term(x: f64, qs: f64, a: f64) -> f64 {
    (E - 2.0) * ((2.0 * a + 1.0) * (x + (a - 1.0) * qs) + 2.0 * a * x - 2.0 * x + qs)
}

/// Large-`u` bounds with the vanishing terms set to zero:
///
/// ```text
/// lower = e^{−x} q* (ratio − m₂/m₁²)
/// upper = e^{−x} q* (ratio (1 + 2x(e−2)) + (e−2)(4 m₂ x / m₁² − x))
/// ```
pub fn corollary11_bounds(x: f64, q: f64, m1: f64, m2: f64, ratio: f64) -> Result<BoundReport> {
    let op = "corollary11_bounds";
    check_x(op, x, BoundMode::TwoSided)?;
    let qs = check_q(op, q)?;
    if !(m1 > 0.0) {
        return Err(Error::domain(op, format!("m1 = {m1} must be > 0")));
    }
    let a = m2 / (m1 * m1);
    let scale = (-x).exp() * qs;
    let lower = scale * (ratio - a);
    let upper = scale * (ratio * (1.0 + 2.0 * x * (E - 2.0)) + (E - 2.0) * (4.0 * a * x - x));
    Ok(BoundReport::assemble(
        BoundKind::Corollary,
        x,
        q,
        qs,
        ratio,
        lower,
        Some(upper),
    ))
}

/// Large-`u` lower bound on the survival `1 − G_X(x m₁⁻/q*)`:
/// `e^{−x} + e^{−x} q* (ratio − m₂/m₁²)`.
pub fn pessimistic_tail_lower(x: f64, q: f64, m1: f64, m2: f64, ratio: f64) -> Result<f64> {
    let op = "pessimistic_tail_lower";
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::domain(op, format!("x = {x} must be >= 0")));
    }
    let qs = check_q(op, q)?;
    if !(m1 > 0.0) {
        return Err(Error::domain(op, format!("m1 = {m1} must be > 0")));
    }
    let e = (-x).exp();
    Ok(e + e * qs * (ratio - m2 / (m1 * m1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mm1_like() -> (CycleMoments, SplitCycleStats) {
        // M/M/1 with lambda = 1, mu = 2, u = 8 (solved values)
        let moments = CycleMoments::new(2.0, 8.0, 60.0, 3.0).unwrap();
        let split = SplitCycleStats {
            q: 0.003_921_568_627_450_98,
            m1_minus: 1.952_509,
            m2_minus: 8.0 / (1.0 - 0.003_921_568_627_450_98),
            m1_plus_hat: 6.062_745,
            source: MomentSource::Exact,
        };
        (moments, split)
    }

    #[test]
    fn identity_examples() {
        assert_eq!(split_moment_identity(3.0, 3.0, 0.37), 3.0);
        assert_relative_eq!(
            split_moment_identity(1.0, 5.0, 0.25),
            2.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn envelopes_collapse_as_q_vanishes() {
        let m = CycleMoments::new(2.0, 8.0, 60.0, 3.0).unwrap();
        let env = split_moment_envelopes(&m, 1e-9).unwrap();
        assert_relative_eq!(env.m1_minus.0, 2.0, max_relative = 1e-5);
        assert_relative_eq!(env.m1_minus.1, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn envelopes_degenerate_for_large_q() {
        let m = CycleMoments::new(1.0, 2.0, 100.0, 3.0).unwrap();
        assert!(matches!(
            split_moment_envelopes(&m, 0.4),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn theorem_bounds_shrink_with_q() {
        let (m, s) = mm1_like();
        let r = theorem11_bounds(0.3, &s, &m, BoundMode::TwoSided).unwrap();
        assert!(r.lower < r.upper.unwrap());
        assert!(r.informative && !r.inverted && !r.asymptotic);
        assert_relative_eq!(
            r.tail_lower,
            (-0.3f64).exp() + r.lower,
            max_relative = 1e-15
        );
        let tiny = SplitCycleStats { q: 1e-8, ..s };
        let t = theorem11_bounds(0.3, &tiny, &m, BoundMode::TwoSided).unwrap();
        assert!(t.upper.unwrap().abs() < 1e-6 && t.lower.abs() < 1e-6);
    }

    #[test]
    fn theorem_lower_only_mode() {
        let (m, s) = mm1_like();
        assert!(theorem11_bounds(1.5, &s, &m, BoundMode::TwoSided).is_err());
        let r = theorem11_bounds(1.5, &s, &m, BoundMode::LowerOnly).unwrap();
        assert!(r.upper.is_none());
        let two = theorem11_bounds(0.5, &s, &m, BoundMode::TwoSided).unwrap();
        let one = theorem11_bounds(0.5, &s, &m, BoundMode::LowerOnly).unwrap();
        assert_eq!(two.lower, one.lower);
    }

    #[test]
    fn theorem_rejects_large_q() {
        let (m, s) = mm1_like();
        let big = SplitCycleStats { q: 0.5, ..s };
        assert!(matches!(
            theorem11_bounds(0.3, &big, &m, BoundMode::TwoSided),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn corollary_examples() {
        let r = corollary11_bounds(0.4, 0.01, 2.0, 8.0, 2.0).unwrap();
        assert_eq!(r.lower, 0.0);
        assert!(r.asymptotic);
        assert_eq!(r.kind, BoundKind::Corollary);
    }

    #[test]
    fn pessimistic_examples() {
        assert_relative_eq!(
            pessimistic_tail_lower(0.7, 0.01, 2.0, 8.0, 2.0).unwrap(),
            (-0.7f64).exp(),
            max_relative = 1e-15
        );
        let at0 = pessimistic_tail_lower(0.0, 0.01, 2.0, 8.0, 3.0).unwrap();
        assert!(at0 > 1.0);
    }

    #[test]
    fn bracketed_bounds_are_looser() {
        let (m, s) = mm1_like();
        let exact = theorem11_bounds(0.4, &s, &m, BoundMode::TwoSided).unwrap();
        let br = SplitBrackets {
            q: s.q,
            m1_minus: s.m1_minus,
            m2_minus: (s.m2_minus * 0.9, s.m2_minus * 1.1),
            m1_plus_hat: (s.m1_plus_hat * 0.5, s.m1_plus_hat * 2.0),
        };
        let loose = theorem11_bounds_bracketed(0.4, &br, &m, BoundMode::TwoSided).unwrap();
        assert!(loose.lower < exact.lower);
        assert!(loose.upper.unwrap() > exact.upper.unwrap());
    }

    proptest! {
        #[test]
        fn envelope_contains_mixture_moments(
            q in 0.001f64..0.3,
            m1m in 0.5f64..3.0,
            cv in 1.0f64..3.0,
            m1p in 0.5f64..20.0,
        ) {
            // two-point mixture with known conditional moments; gamma = 3
            let m2m = m1m * m1m * cv;
            let m3m = m2m * m1m * cv * cv;
            let (m2p, m3p) = (m1p * m1p * 1.5, m1p.powi(3) * 3.0);
            let m = CycleMoments::new(
                split_moment_identity(m1m, m1p, q),
                split_moment_identity(m2m, m2p, q),
                split_moment_identity(m3m, m3p, q),
                3.0,
            ).unwrap();
            if let Ok(env) = split_moment_envelopes(&m, q) {
                prop_assert!(env.m1_minus.0 <= m1m * (1.0 + 1e-12) && m1m <= env.m1_minus.1 * (1.0 + 1e-12));
                prop_assert!(env.m2_minus.0 <= m2m * (1.0 + 1e-12) && m2m <= env.m2_minus.1 * (1.0 + 1e-12));
                prop_assert!(m1p <= env.m1_plus_max * (1.0 + 1e-12));
                prop_assert!(m2p <= env.m2_plus_max * (1.0 + 1e-12));
                prop_assert!(m3p <= env.m_gamma_plus_max * (1.0 + 1e-12));
            }
        }

        #[test]
        fn theorem_not_inverted_on_grid(xi in 1usize..10, q in 1e-6f64..0.1, ratio in 1.0f64..10.0) {
            let x = xi as f64 / 10.0;
            let m = CycleMoments::new(2.0, 8.0, 60.0, 3.0).unwrap();
            let s = SplitCycleStats {
                q,
                m1_minus: 1.9,
                m2_minus: 8.0 / (1.0 - q),
                m1_plus_hat: 1.9 * ratio,
                source: MomentSource::Exact,
            };
            let r = theorem11_bounds(x, &s, &m, BoundMode::TwoSided).unwrap();
            prop_assert!(!r.inverted);
        }
    }
}
