//! Delayed geometric sums `S = ζ₁ᵈ + ζ₂ + … + ζ_ν` with `P(ν = k) = q(1−q)^{k−1}`.
//!
//! Provides the two-sided bounds on the error of the exponential
//! approximation
//!
//! ```text
//! Δ_S(x) = 1 − e^{−x} − P(S ≤ a₁ x / q*),    q* = −ln(1 − q)
//! ```
//!
//! together with Lorden's renewal-function envelope they are built on, and a
//! simulator for the sums themselves.

use std::f64::consts::E;
use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};
use crate::rng::StreamPurpose;
use crate::sim::run_chunked;
use crate::stats::{MeanAccumulator, SimEstimate};

type Handle = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `q* = −ln(1 − q)`.
pub fn q_star(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain("q_star", format!("q = {q} is not in (0, 1)")));
    }
    Ok(-(-q).ln_1p())
}

fn check_q(op: &'static str, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 0.5) {
        return Err(Error::domain(op, format!("q = {q} is not in (0, 1/2)")));
    }
    q_star(q)
}

/// First two moments of the generic summand, the mean of the delay term,
/// and handles for the delay law's tail and scaled partial mean.
#[derive(Clone)]
pub struct SummandStats {
    a1: f64,
    a2: f64,
    a1_delay: f64,
    delay_tail: Handle,
    delay_partial_mean: Handle,
}

impl fmt::Debug for SummandStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SummandStats")
            .field("a1", &self.a1)
            .field("a2", &self.a2)
            .field("a1_delay", &self.a1_delay)
            .finish_non_exhaustive()
    }
}

impl SummandStats {
    /// `delay_tail(t) = 1 − F⁽ᵈ⁾(t)` and `delay_partial_mean(t) = g(t) =
    /// (1/a₁) ∫_t^∞ y dF⁽ᵈ⁾(y)`.
    pub fn new<T, G>(
        a1: f64,
        a2: f64,
        a1_delay: f64,
        delay_tail: T,
        delay_partial_mean: G,
    ) -> Result<Self>
    where
        T: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(a1.is_finite() && a1 > 0.0) {
            return Err(Error::domain(
                "summand_stats",
                format!("a1 = {a1} must be > 0"),
            ));
        }
        if !(a2.is_finite() && a2 >= a1 * a1 * (1.0 - 1e-12)) {
            return Err(Error::domain(
                "summand_stats",
                format!("a2 = {a2} is below a1^2 = {}", a1 * a1),
            ));
        }
        if !(a1_delay.is_finite() && a1_delay >= 0.0) {
            return Err(Error::domain(
                "summand_stats",
                format!("a1_delay = {a1_delay} must be >= 0"),
            ));
        }
        Ok(SummandStats {
            a1,
            a2,
            a1_delay,
            delay_tail: Arc::new(delay_tail),
            delay_partial_mean: Arc::new(delay_partial_mean),
        })
    }

    /// Exact statistics from parametric laws. `delay = None` means the
    /// first summand has the same law as the others.
    pub fn from_laws(
        summand: &ServiceDistribution,
        delay: Option<&ServiceDistribution>,
    ) -> Result<Self> {
        summand.validate()?;
        let delay = delay.unwrap_or(summand).clone();
        delay.validate()?;
        let a1 = summand.mean();
        let tail_law = delay.clone();
        SummandStats::new(
            a1,
            summand.moment(2),
            delay.mean(),
            move |t| tail_law.survival(t),
            move |t| delay.partial_mean_above(t) / a1,
        )
    }

    /// A zero-length delay term (`ζ₁ᵈ ≡ 0`).
    pub fn with_zero_delay(summand: &ServiceDistribution) -> Result<Self> {
        SummandStats::new(summand.mean(), summand.moment(2), 0.0, |_| 0.0, |_| 0.0)
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn a1_delay(&self) -> f64 {
        self.a1_delay
    }

    /// `1 − F⁽ᵈ⁾(t)`
    pub fn delay_tail(&self, t: f64) -> f64 {
        (self.delay_tail)(t)
    }

    /// `g(t)`
    pub fn g(&self, t: f64) -> f64 {
        (self.delay_partial_mean)(t)
    }

    /// `a₂ / a₁²`
    pub fn normalized_a2(&self) -> f64 {
        self.a2 / (self.a1 * self.a1)
    }
}

/// Lorden's envelope for the renewal function:
/// `t/a₁ − 1 ≤ H(t) ≤ t/a₁ + a₂/a₁² − 1`.
pub fn lorden_bounds(t: f64, a1: f64, a2: f64) -> Result<(f64, f64)> {
    if !(a1 > 0.0) {
        return Err(Error::domain(
            "lorden_bounds",
            format!("a1 = {a1} must be > 0"),
        ));
    }
    if !(t >= 0.0) {
        return Err(Error::domain(
            "lorden_bounds",
            format!("t = {t} must be >= 0"),
        ));
    }
    Ok((t / a1 - 1.0, t / a1 + a2 / (a1 * a1) - 1.0))
}

/// Lower bound on `Δ_S(x)`:
/// `q* e^{−x} (a₁ᵈ/a₁ − a₂/a₁² − g(a₁x/q*))`. Valid for every `x > 0`.
pub fn lemma21_lower(x: f64, q: f64, stats: &SummandStats) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(
            "lemma21_lower",
            format!("x = {x} must be > 0"),
        ));
    }
    let qs = check_q("lemma21_lower", q)?;
    let t = stats.a1 * x / qs;
    Ok(qs * (-x).exp() * (stats.a1_delay / stats.a1 - stats.normalized_a2() - stats.g(t)))
}

/// Upper bound on `Δ_S(x)` for `0 < x < 1`:
/// `q* e^{−x} ((a₁ᵈ/a₁)(1 + 2x(e−2)) + C₁ + C₂)`.
///
/// `C₁ = (2x²(e−2) + x)(1 − F⁽ᵈ⁾(a₁x/q*)) / q*` is the delay-tail
/// contribution to `E V + (e−2) E V²` expressed per unit of `q*`;
/// `C₂ = (e−2)((2a+1)(x + (a−1)q*) + 2ax − 2x + q*)` with `a = a₂/a₁²`.
pub fn lemma22_upper(x: f64, q: f64, stats: &SummandStats) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(
            "lemma22_upper",
            format!("x = {x} is not in (0, 1)"),
        ));
    }
    let qs = check_q("lemma22_upper", q)?;
    let t = stats.a1 * x / qs;
    let a = stats.normalized_a2();
    let c1 = (2.0 * x * x * (E - 2.0) + x) * stats.delay_tail(t) / qs;
    let c2 = (E - 2.0) * ((2.0 * a + 1.0) * (x + (a - 1.0) * qs) + 2.0 * a * x - 2.0 * x + qs);
    let lead = stats.a1_delay / stats.a1 * (1.0 + 2.0 * x * (E - 2.0));
    Ok(qs * (-x).exp() * (lead + c1 + c2))
}

/// Exact `Δ_S(x) = e^{−xq/q*} − e^{−x}` for i.i.d. exponential summands
/// without delay (the sum is then exponential with rate `q/a₁`).
pub fn delta_exact_exponential(x: f64, q: f64) -> Result<f64> {
    let qs = q_star(q)?;
    Ok((-x * q / qs).exp() - (-x).exp())
}

/// Both lemma bounds at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomSumBounds {
    pub x: f64,
    pub q: f64,
    pub q_star: f64,
    pub lower: f64,
    pub upper: f64,
    /// `false` when `lower <= −1` or `upper >= 1`.
    pub informative: bool,
}

/// Evaluates both lemmas at `x ∈ (0, 1)`.
pub fn geom_sum_bounds(x: f64, q: f64, stats: &SummandStats) -> Result<GeomSumBounds> {
    let lower = lemma21_lower(x, q, stats)?;
    let upper = lemma22_upper(x, q, stats)?;
    Ok(GeomSumBounds {
        x,
        q,
        q_star: q_star(q)?,
        lower,
        upper,
        informative: lower > -1.0 && upper < 1.0,
    })
}

/// One evaluation point of a simulated geometric-sum CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomSumPoint {
    /// Scaled abscissa.
    pub x: f64,
    /// Unscaled time `a₁ x / q*`.
    pub t: f64,
    /// Empirical `P(S ≤ t)`.
    pub cdf: SimEstimate,
    /// Empirical `Δ_S(x) = 1 − e^{−x} − P(S ≤ t)`.
    pub delta: SimEstimate,
}

/// Empirical distribution of a simulated geometric sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeomSumSample {
    pub q: f64,
    pub q_star: f64,
    pub mean: SimEstimate,
    pub points: Vec<GeomSumPoint>,
}

impl GeomSumSample {
    /// `max_x |Ĝ(a₁x/q*) − (1 − e^{−x})|` over the evaluation grid.
    pub fn max_deviation(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.delta.value.abs())
            .fold(0.0, f64::max)
    }
}

/// Default evaluation grid `{0.1, 0.2, …, 0.9}`.
pub fn default_x_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Simulates `n` replications of the delayed geometric sum and evaluates
/// its empirical CDF at `a₁ x / q*` for each `x` in `xs`.
///
/// `delay = None` draws the first summand from `summand` as well.
pub fn simulate_geom_sum(
    summand: &ServiceDistribution,
    delay: Option<&ServiceDistribution>,
    q: f64,
    n: u64,
    xs: &[f64],
    seed: u64,
) -> Result<GeomSumSample> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(
            "simulate_geom_sum",
            format!("q = {q} is not in (0, 1)"),
        ));
    }
    if n < 2 {
        return Err(Error::invalid("n", "need at least two replications"));
    }
    summand.validate()?;
    let delay = delay.unwrap_or(summand);
    delay.validate()?;
    let qs = q_star(q)?;
    let a1 = summand.mean();
    let ts: Vec<f64> = xs.iter().map(|x| a1 * x / qs).collect();
    let geometric =
        Geometric::new(q).map_err(|e| Error::domain("simulate_geom_sum", e.to_string()))?;
    let body = summand.sampler();
    let head = delay.sampler();

    let parts = run_chunked(seed, StreamPurpose::GeomSum, n, |rng, count| {
        let mut mean = MeanAccumulator::new();
        let mut hits = vec![0u64; ts.len()];
        for _ in 0..count {
            // Geometric counts failures before the first success
            let nu = 1 + geometric.sample(rng);
            let mut s = head.sample(rng);
            for _ in 1..nu {
                s += body.sample(rng);
            }
            mean.push(s);
            for (h, t) in hits.iter_mut().zip(&ts) {
                *h += u64::from(s <= *t);
            }
        }
        (mean, hits)
    });

    let mut mean = MeanAccumulator::new();
    let mut hits = vec![0u64; ts.len()];
    for (m, h) in &parts {
        mean.merge(m);
        hits.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }
    let points = xs
        .iter()
        .zip(&ts)
        .zip(&hits)
        .map(|((&x, &t), &h)| {
            let cdf = binomial_estimate(h, n);
            GeomSumPoint {
                x,
                t,
                cdf,
                delta: SimEstimate {
                    value: 1.0 - (-x).exp() - cdf.value,
                    ..cdf
                },
            }
        })
        .collect();
    Ok(GeomSumSample {
        q,
        q_star: qs,
        mean: mean.estimate(),
        points,
    })
}

/// Proportion `k/n` with its binomial standard error.
pub(crate) fn binomial_estimate(k: u64, n: u64) -> SimEstimate {
    let p = k as f64 / n as f64;
    SimEstimate {
        value: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exp_stats(rate: f64) -> SummandStats {
        SummandStats::from_laws(&ServiceDistribution::exponential(rate).unwrap(), None).unwrap()
    }

    #[test]
    fn q_star_examples() {
        assert_relative_eq!(q_star(0.5).unwrap(), 2f64.ln(), max_relative = 1e-15);
        let v = q_star(0.1).unwrap();
        assert_relative_eq!(v, 0.105_360_515_657_826_3, max_relative = 1e-14);
        assert!((0.1..=0.11).contains(&v));
        assert_relative_eq!(q_star(1e-12).unwrap() / 1e-12, 1.0, max_relative = 1e-9);
        assert!(q_star(0.0).is_err());
        assert!(q_star(1.0).is_err());
    }

    #[test]
    fn lorden_examples() {
        let lambda = 2.0;
        let (lo, hi) = lorden_bounds(5.0 / lambda, 1.0 / lambda, 2.0 / (lambda * lambda)).unwrap();
        assert_relative_eq!(lo, 4.0, max_relative = 1e-15);
        assert_relative_eq!(hi, 6.0, max_relative = 1e-15);
        assert!(lo <= 5.0 && 5.0 <= hi);
        let (lo, hi) = lorden_bounds(0.0, 1.0, 3.0).unwrap();
        assert_eq!((lo, hi), (-1.0, 2.0));
        // deterministic summands: a2 = a1^2, H(2.5b) = 2
        let b = 1.7;
        let (lo, hi) = lorden_bounds(2.5 * b, b, b * b).unwrap();
        assert_relative_eq!(lo, 1.5, max_relative = 1e-14);
        assert_relative_eq!(hi, 2.5, max_relative = 1e-14);
        assert!(lorden_bounds(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn exponential_sandwich_example() {
        let s = exp_stats(1.3);
        let exact = delta_exact_exponential(0.5, 0.05).unwrap();
        assert!(lemma21_lower(0.5, 0.05, &s).unwrap() <= exact);
        for &q in &[0.01, 0.05, 0.1] {
            for &x in &[0.1, 0.5, 0.9] {
                let exact = delta_exact_exponential(x, q).unwrap();
                assert!(exact <= lemma22_upper(x, q, &s).unwrap(), "q={q} x={x}");
            }
        }
    }

    #[test]
    fn zero_delay_lower_is_nonpositive() {
        let s =
            SummandStats::with_zero_delay(&ServiceDistribution::erlang(2, 1.0).unwrap()).unwrap();
        for &x in &[0.1, 0.5, 2.0] {
            let v = lemma21_lower(x, 0.05, &s).unwrap();
            assert!(v <= 0.0 && v >= -1.0);
        }
    }

    #[test]
    fn deterministic_lower_is_zero() {
        let b = 0.8;
        let s =
            SummandStats::from_laws(&ServiceDistribution::deterministic(b).unwrap(), None).unwrap();
        let v = lemma21_lower(0.5, 0.01, &s).unwrap();
        assert!(v.abs() < 1e-15, "{v}");
    }

    #[test]
    fn upper_vanishes_linearly_in_q_star() {
        let s = exp_stats(1.0);
        let x = 0.4;
        let r1 = lemma22_upper(x, 1e-4, &s).unwrap() / q_star(1e-4).unwrap();
        let r2 = lemma22_upper(x, 1e-6, &s).unwrap() / q_star(1e-6).unwrap();
        assert_relative_eq!(r1, r2, max_relative = 1e-3);
        assert!(lemma22_upper(x, 1e-9, &s).unwrap() < 1e-8);
    }

    #[test]
    fn delta_exact_examples() {
        // exp(−0.5/ln 2) − e^{−1}
        assert_relative_eq!(
            delta_exact_exponential(1.0, 0.5).unwrap(),
            0.118_217_35,
            epsilon = 1e-8
        );
        assert_eq!(delta_exact_exponential(0.0, 0.3).unwrap(), 0.0);
        assert!(delta_exact_exponential(0.5, 1e-9).unwrap().abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        let s = exp_stats(1.0);
        assert!(lemma22_upper(1.0, 0.1, &s).is_err());
        assert!(lemma22_upper(0.5, 0.5, &s).is_err());
        assert!(lemma21_lower(0.0, 0.1, &s).is_err());
        assert!(SummandStats::new(1.0, 0.5, 1.0, |_| 0.0, |_| 0.0).is_err());
    }

    #[test]
    fn wald_mean_for_deterministic_sums() {
        let d = ServiceDistribution::deterministic(1.5).unwrap();
        let head = ServiceDistribution::deterministic(0.25).unwrap();
        let sample = simulate_geom_sum(&d, Some(&head), 0.5, 200_000, &[0.5], 3).unwrap();
        let expected = 0.25 + (2.0 - 1.0) * 1.5;
        assert!(sample.mean.covers(expected, 3.0), "{:?}", sample.mean);
    }

    #[test]
    fn simulation_is_reproducible() {
        let d = ServiceDistribution::erlang(2, 1.0).unwrap();
        let a = simulate_geom_sum(&d, None, 0.1, 40_000, &default_x_grid(), 9).unwrap();
        let b = simulate_geom_sum(&d, None, 0.1, 40_000, &default_x_grid(), 9).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn q_star_bracket(q in 1e-9f64..0.5) {
            let v = q_star(q).unwrap();
            prop_assert!(q <= v && v <= q + q * q);
        }

        #[test]
        fn upper_monotone_in_delay_mean_and_a2(
            x in 0.01f64..0.99,
            q in 0.001f64..0.45,
            a1d in 0.0f64..5.0,
            bump in 0.0f64..3.0,
            cv2 in 1.0f64..4.0,
        ) {
            let tail = |t: f64| (-t).exp();
            let g = |t: f64| (t + 1.0) * (-t).exp();
            let base = SummandStats::new(1.0, cv2, a1d, tail, g).unwrap();
            let more_delay = SummandStats::new(1.0, cv2, a1d + bump, tail, g).unwrap();
            let more_a2 = SummandStats::new(1.0, cv2 + bump, a1d, tail, g).unwrap();
            let u0 = lemma22_upper(x, q, &base).unwrap();
            prop_assert!(lemma22_upper(x, q, &more_delay).unwrap() >= u0);
            prop_assert!(lemma22_upper(x, q, &more_a2).unwrap() >= u0);
        }
    }
}
