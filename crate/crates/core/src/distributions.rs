//! Parametric service-time laws.
//!
//! Every family has all moments finite and a closed-form or series moment
//! generating function, so the M/G/1 analyzer can be cross-checked exactly.
//! The CDF follows the `P(η < x)` convention (left-continuous at atoms);
//! [`ServiceDistribution::survival`] gives `P(η > x)`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::integrate_relative;

const WEIGHT_TOL: f64 = 1e-12;

/// A positive random variable used as a service time or summand law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ServiceDistribution {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Erlang { shape: u32, rate: f64 },
    Uniform { lo: f64, hi: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

/// `n (n+1) ... (n+j-1)`
fn rising(n: f64, j: u32) -> f64 {
    (0..j).map(|i| n + i as f64).product()
}

fn factorial(j: u32) -> f64 {
    (1..=j).map(f64::from).product()
}

impl ServiceDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        let d = ServiceDistribution::Exponential { rate };
        d.validate().map(|_| d)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        let d = ServiceDistribution::Deterministic { value };
        d.validate().map(|_| d)
    }

    pub fn erlang(shape: u32, rate: f64) -> Result<Self> {
        let d = ServiceDistribution::Erlang { shape, rate };
        d.validate().map(|_| d)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = ServiceDistribution::Uniform { lo, hi };
        d.validate().map(|_| d)
    }

    pub fn hyperexponential(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let d = ServiceDistribution::HyperExponential { weights, rates };
        d.validate().map(|_| d)
    }

    /// Checks the parameter invariants. Deserialized values must be passed
    /// through this before use.
    pub fn validate(&self) -> Result<()> {
        match self {
            ServiceDistribution::Exponential { rate } => positive("rate", *rate),
            ServiceDistribution::Deterministic { value } => positive("value", *value),
            ServiceDistribution::Erlang { shape, rate } => {
                if *shape == 0 {
                    return Err(Error::invalid("shape", "must be a positive integer"));
                }
                positive("rate", *rate)
            }
            ServiceDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && *lo >= 0.0) {
                    return Err(Error::invalid(
                        "lo",
                        format!("must be finite and >= 0, got {lo}"),
                    ));
                }
                if !(hi.is_finite() && hi > lo) {
                    return Err(Error::invalid(
                        "hi",
                        format!("must be finite and > lo, got {hi}"),
                    ));
                }
                Ok(())
            }
            ServiceDistribution::HyperExponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::invalid(
                        "weights",
                        format!(
                            "need one weight per rate, got {} weights and {} rates",
                            weights.len(),
                            rates.len()
                        ),
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::invalid("weights", "must be finite and >= 0"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return Err(Error::invalid(
                        "weights",
                        format!("must sum to 1, sum is {total}"),
                    ));
                }
                rates.iter().try_for_each(|r| positive("rates", *r))
            }
        }
    }

    /// Raw moment `E η^r`.
    pub fn moment(&self, r: u32) -> f64 {
        match self {
            ServiceDistribution::Exponential { rate } => factorial(r) / rate.powi(r as i32),
            ServiceDistribution::Deterministic { value } => value.powi(r as i32),
            ServiceDistribution::Erlang { shape, rate } => {
                rising(*shape as f64, r) / rate.powi(r as i32)
            }
            ServiceDistribution::Uniform { lo, hi } => {
                let k = r as i32 + 1;
                // hi^k - lo^k = hi^k (1 - (lo/hi)^k), no cancellation for lo << hi
                hi.powi(k) * (1.0 - (lo / hi).powi(k)) / (k as f64 * (hi - lo))
            }
            ServiceDistribution::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, rate)| w * factorial(r) / rate.powi(r as i32))
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(2) - m * m
    }

    /// Abscissa of convergence of the moment generating function.
    pub fn s0(&self) -> f64 {
        match self {
            ServiceDistribution::Exponential { rate }
            | ServiceDistribution::Erlang { rate, .. } => *rate,
            ServiceDistribution::HyperExponential { rates, .. } => {
                rates.iter().copied().fold(f64::INFINITY, f64::min)
            }
            ServiceDistribution::Deterministic { .. } | ServiceDistribution::Uniform { .. } => {
                f64::INFINITY
            }
        }
    }

    /// Moment generating function `E e^{sη}`.
    pub fn mgf(&self, s: f64) -> Result<f64> {
        self.mgf_derivative(s, 0)
    }

    /// `j`-th derivative of the moment generating function, `E η^j e^{sη}`.
    pub fn mgf_derivative(&self, s: f64, j: u32) -> Result<f64> {
        if !(s < self.s0()) {
            return Err(Error::domain(
                "mgf",
                format!(
                    "s = {s} is not below the abscissa of convergence {}",
                    self.s0()
                ),
            ));
        }
        let v = match self {
            ServiceDistribution::Exponential { rate } => {
                factorial(j) * rate / (rate - s).powi(j as i32 + 1)
            }
            ServiceDistribution::Deterministic { value } => {
                value.powi(j as i32) * (s * value).exp()
            }
            ServiceDistribution::Erlang { shape, rate } => {
                let n = *shape as f64;
                rising(n, j) * (rate / (rate - s)).powf(n) / (rate - s).powi(j as i32)
            }
            ServiceDistribution::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, rate)| w * factorial(j) * rate / (rate - s).powi(j as i32 + 1))
                .sum(),
            ServiceDistribution::Uniform { lo, hi } => uniform_mgf_derivative(*lo, *hi, s, j)?,
        };
        Ok(v)
    }

    /// `P(η < x)`; zero for `x <= 0`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ServiceDistribution::Deterministic { value } => {
                if x > *value {
                    1.0
                } else {
                    0.0
                }
            }
            _ if x <= 0.0 => 0.0,
            ServiceDistribution::Exponential { rate } => -(-rate * x).exp_m1(),
            ServiceDistribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            _ => 1.0 - self.survival(x),
        }
    }

    /// `P(η > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            ServiceDistribution::Exponential { rate } => (-rate * x).exp(),
            ServiceDistribution::Deterministic { value } => {
                if x < *value {
                    1.0
                } else {
                    0.0
                }
            }
            ServiceDistribution::Erlang { shape, rate } => erlang_survival(*shape, *rate, x),
            ServiceDistribution::Uniform { lo, hi } => ((hi - x) / (hi - lo)).clamp(0.0, 1.0),
            ServiceDistribution::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, rate)| w * (-rate * x).exp())
                .sum(),
        }
    }

    /// Truncated first moment `E[η; η > t]`.
    pub fn partial_mean_above(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.mean();
        }
        match self {
            ServiceDistribution::Exponential { rate } => (t + 1.0 / rate) * (-rate * t).exp(),
            ServiceDistribution::Deterministic { value } => {
                if *value > t {
                    *value
                } else {
                    0.0
                }
            }
            // size-biased Erlang(n) is Erlang(n+1)
            ServiceDistribution::Erlang { shape, rate } => {
                *shape as f64 / rate * erlang_survival(shape + 1, *rate, t)
            }
            ServiceDistribution::Uniform { lo, hi } => {
                let a = t.max(*lo);
                if a >= *hi {
                    0.0
                } else {
                    (hi - a) * (hi + a) / (2.0 * (hi - lo))
                }
            }
            ServiceDistribution::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, rate)| w * (t + 1.0 / rate) * (-rate * t).exp())
                .sum(),
        }
    }

    /// Draws one variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ServiceDistribution::Exponential { rate } => {
                Exp::new(*rate).expect("validated rate").sample(rng)
            }
            ServiceDistribution::Deterministic { value } => *value,
            ServiceDistribution::Erlang { shape, rate } => Gamma::new(*shape as f64, 1.0 / rate)
                .expect("validated shape and rate")
                .sample(rng),
            ServiceDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ServiceDistribution::HyperExponential { weights, rates } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = rates.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                Exp::new(rates[pick]).expect("validated rate").sample(rng)
            }
        }
    }

    /// A sampler with per-law setup hoisted out of the draw loop.
    pub fn sampler(&self) -> Sampler {
        match self {
            ServiceDistribution::Exponential { rate } => {
                Sampler::Exponential(Exp::new(*rate).expect("validated rate"))
            }
            ServiceDistribution::Erlang { shape, rate } => Sampler::Gamma(
                Gamma::new(*shape as f64, 1.0 / rate).expect("validated shape and rate"),
            ),
            other => Sampler::Generic(other.clone()),
        }
    }
}

/// Draw-loop form of a [`ServiceDistribution`].
#[derive(Debug, Clone)]
pub enum Sampler {
    Exponential(Exp<f64>),
    Gamma(Gamma<f64>),
    Generic(ServiceDistribution),
}

impl Sampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Exponential(d) => d.sample(rng),
            Sampler::Gamma(d) => d.sample(rng),
            Sampler::Generic(d) => d.sample(rng),
        }
    }
}

/// `P(Erlang(n, rate) > x) = e^{-rx} Σ_{k<n} (rx)^k / k!`
fn erlang_survival(shape: u32, rate: f64, x: f64) -> f64 {
    let y = rate * x;
    let mut term = (-y).exp();
    let mut sum = term;
    for k in 1..shape {
        term *= y / k as f64;
        sum += term;
    }
    sum.min(1.0)
}

/// `E η^j e^{sη}` for a uniform law. For `s >= 0` a positive power series
/// in `s` is summed; for `s < 0` the integral is evaluated numerically.
fn uniform_mgf_derivative(lo: f64, hi: f64, s: f64, j: u32) -> Result<f64> {
    if s < 0.0 {
        let v = integrate_relative("mgf", |x| x.powi(j as i32) * (s * x).exp(), lo, hi, 1e-13)?;
        return Ok(v / (hi - lo));
    }
    // Σ_k s^k/k! E η^{j+k}, with E η^m = (hi^{m+1} - lo^{m+1}) / ((m+1)(hi - lo))
    let ratio = lo / hi;
    let mut coef = 1.0; // s^k hi^k / k!
    let mut sum = 0.0;
    let mut k = 0u32;
    loop {
        let m = (j + k + 1) as i32;
        let term = coef * (1.0 - ratio.powi(m)) / m as f64;
        sum += term;
        k += 1;
        if (k as f64) > s * hi && term <= 1e-17 * sum {
            break;
        }
        coef *= s * hi / k as f64;
        if k > 100_000 {
            return Err(Error::domain(
                "mgf",
                format!("series for s = {s} did not converge"),
            ));
        }
    }
    Ok(sum * hi.powi(j as i32 + 1) / (hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::{ks_pvalue, ks_statistic, MeanAccumulator};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn all_laws() -> Vec<ServiceDistribution> {
        vec![
            ServiceDistribution::exponential(2.0).unwrap(),
            ServiceDistribution::deterministic(0.7).unwrap(),
            ServiceDistribution::erlang(3, 4.0).unwrap(),
            ServiceDistribution::uniform(0.2, 1.5).unwrap(),
            ServiceDistribution::hyperexponential(vec![0.3, 0.7], vec![0.5, 3.0]).unwrap(),
        ]
    }

    #[test]
    fn moment_examples() {
        assert_eq!(
            ServiceDistribution::exponential(2.0).unwrap().moment(1),
            0.5
        );
        assert_eq!(
            ServiceDistribution::deterministic(3.0).unwrap().moment(2),
            9.0
        );
        assert_relative_eq!(
            ServiceDistribution::erlang(2, 3.0).unwrap().moment(2),
            2.0 / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn moments_match_quadrature_of_density() {
        // Erlang(2,3) density 9 x e^{-3x}; truncate where the tail is negligible
        let v = integrate_relative(
            "t",
            |x| x * x * 9.0 * x * (-3.0 * x).exp(),
            0.0,
            40.0,
            1e-13,
        )
        .unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, max_relative = 1e-12);
        let u = ServiceDistribution::uniform(0.2, 1.5).unwrap();
        for r in 1..5 {
            let v = integrate_relative("t", |x| x.powi(r) / 1.3, 0.2, 1.5, 1e-13).unwrap();
            assert_relative_eq!(u.moment(r as u32), v, max_relative = 1e-12);
        }
    }

    #[test]
    fn mgf_examples() {
        let e = ServiceDistribution::exponential(2.0).unwrap();
        assert_relative_eq!(e.mgf(1.0).unwrap(), 2.0, max_relative = 1e-15);
        for d in all_laws() {
            assert_relative_eq!(d.mgf(0.0).unwrap(), 1.0, max_relative = 1e-14);
        }
        let det = ServiceDistribution::deterministic(1.0).unwrap();
        assert_relative_eq!(
            det.mgf(0.5).unwrap(),
            1.648_721_270_700_128,
            max_relative = 1e-14
        );
        assert!(matches!(e.mgf(2.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn mgf_matches_quadrature_at_half_s0() {
        for d in all_laws() {
            let s = if d.s0().is_finite() {
                0.5 * d.s0()
            } else {
                1.5
            };
            for j in 0..3 {
                let closed = d.mgf_derivative(s, j).unwrap();
                let quad = match &d {
                    ServiceDistribution::Deterministic { value } => {
                        value.powi(j as i32) * (s * value).exp()
                    }
                    ServiceDistribution::Uniform { lo, hi } => {
                        integrate_relative(
                            "t",
                            |x| x.powi(j as i32) * (s * x).exp(),
                            *lo,
                            *hi,
                            1e-13,
                        )
                        .unwrap()
                            / (hi - lo)
                    }
                    // ∫_0^∞ x^j e^{sx} dG(x) via the substitution x = y/(1-y)
                    _ => integrate_relative(
                        "t",
                        |y| {
                            let x = y / (1.0 - y);
                            let dens = analytic_density(&d, x);
                            x.powi(j as i32) * (s * x).exp() * dens / ((1.0 - y) * (1.0 - y))
                        },
                        0.0,
                        1.0,
                        1e-12,
                    )
                    .unwrap(),
                };
                assert_relative_eq!(closed, quad, max_relative = 1e-9);
            }
        }
    }

    fn analytic_density(d: &ServiceDistribution, x: f64) -> f64 {
        match d {
            ServiceDistribution::Exponential { rate } => rate * (-rate * x).exp(),
            ServiceDistribution::Erlang { shape, rate } => {
                let n = *shape as i32;
                rate.powi(n) * x.powi(n - 1) * (-rate * x).exp() / factorial(*shape - 1)
            }
            ServiceDistribution::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * r * (-r * x).exp())
                .sum(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn uniform_mgf_negative_argument() {
        let u = ServiceDistribution::uniform(0.0, 2.0).unwrap();
        // (e^{2s} - 1) / (2s) at s = -1
        let exact = ((-2.0f64).exp() - 1.0) / -2.0;
        assert_relative_eq!(u.mgf(-1.0).unwrap(), exact, max_relative = 1e-12);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(ServiceDistribution::exponential(1.0).unwrap().cdf(0.0), 0.0);
        assert_eq!(
            ServiceDistribution::uniform(0.0, 2.0).unwrap().cdf(1.0),
            0.5
        );
        assert_relative_eq!(
            ServiceDistribution::erlang(2, 1.0).unwrap().cdf(1.0),
            1.0 - 2.0 * (-1.0f64).exp(),
            max_relative = 1e-14
        );
        let det = ServiceDistribution::deterministic(3.0).unwrap();
        assert_eq!(det.cdf(3.0), 0.0);
        assert_eq!(det.cdf(3.0 + 1e-12), 1.0);
        assert_eq!(det.survival(3.0), 0.0);
    }

    #[test]
    fn partial_mean_matches_quadrature() {
        let t = 0.4;
        let erl = ServiceDistribution::erlang(3, 4.0).unwrap();
        let q = integrate_relative("t", |x| x * analytic_density(&erl, x), t, 60.0, 1e-13).unwrap();
        assert_relative_eq!(erl.partial_mean_above(t), q, max_relative = 1e-11);
        let u = ServiceDistribution::uniform(0.2, 1.5).unwrap();
        assert_relative_eq!(
            u.partial_mean_above(t),
            (1.5f64.powi(2) - t * t) / (2.0 * 1.3),
            max_relative = 1e-14
        );
        for d in all_laws() {
            assert_relative_eq!(d.partial_mean_above(0.0), d.mean(), max_relative = 1e-14);
        }
    }

    #[test]
    fn sample_means_within_clt_band() {
        let mut rng = RngStream::new(11, 0);
        assert_eq!(
            ServiceDistribution::deterministic(3.0)
                .unwrap()
                .sample(&mut rng),
            3.0
        );

        let exp = ServiceDistribution::exponential(1.0).unwrap().sampler();
        let mut acc = MeanAccumulator::new();
        (0..1_000_000).for_each(|_| acc.push(exp.sample(&mut rng)));
        assert!((acc.mean() - 1.0).abs() <= 0.004, "mean {}", acc.mean());

        // variance of Erlang(2,1) is 2; stderr of the sample variance from
        // the fourth central moment (mu4 = 3k(k+2) = 24 for k = 2)
        let erl = ServiceDistribution::erlang(2, 1.0).unwrap().sampler();
        let mut acc = MeanAccumulator::new();
        let n = 1_000_000;
        (0..n).for_each(|_| acc.push(erl.sample(&mut rng)));
        let se = ((24.0 - 4.0) / n as f64).sqrt();
        assert!(
            (acc.variance() - 2.0).abs() <= 3.0 * se,
            "var {}",
            acc.variance()
        );
    }

    #[test]
    fn ks_accepts_every_sampler() {
        for (i, d) in all_laws().into_iter().enumerate() {
            if matches!(d, ServiceDistribution::Deterministic { .. }) {
                continue;
            }
            let mut rng = RngStream::new(2024, i as u64);
            let s = d.sampler();
            let mut xs: Vec<f64> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
            let stat = ks_statistic(&mut xs, |x| d.cdf(x));
            let p = ks_pvalue(stat, xs.len());
            assert!(p > 0.001, "{d:?}: D = {stat}, p = {p}");
        }
    }

    #[test]
    fn config_parsing_is_strict() {
        let d: ServiceDistribution =
            serde_json::from_str(r#"{"type": "erlang", "shape": 2, "rate": 3.0}"#).unwrap();
        assert_eq!(
            d,
            ServiceDistribution::Erlang {
                shape: 2,
                rate: 3.0
            }
        );
        let bad = serde_json::from_str::<ServiceDistribution>(
            r#"{"type": "exponential", "rate": 2.0, "scale": 1.0}"#,
        );
        assert!(bad.is_err());
        let hyper: ServiceDistribution = serde_json::from_str(
            r#"{"type": "hyperexponential", "weights": [0.5, 0.5], "rates": [1.0, 2.0]}"#,
        )
        .unwrap();
        assert!(hyper.validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(ServiceDistribution::exponential(0.0).is_err());
        assert!(ServiceDistribution::erlang(0, 1.0).is_err());
        assert!(ServiceDistribution::uniform(1.0, 1.0).is_err());
        assert!(ServiceDistribution::hyperexponential(vec![0.5, 0.4], vec![1.0, 2.0]).is_err());
        assert!(ServiceDistribution::hyperexponential(vec![1.0], vec![1.0, 2.0]).is_err());
    }

    fn arb_law() -> impl Strategy<Value = ServiceDistribution> {
        prop_oneof![
            (0.01f64..100.0).prop_map(|r| ServiceDistribution::Exponential { rate: r }),
            (0.01f64..100.0).prop_map(|v| ServiceDistribution::Deterministic { value: v }),
            (1u32..20, 0.01f64..100.0)
                .prop_map(|(k, r)| ServiceDistribution::Erlang { shape: k, rate: r }),
            (0.0f64..10.0, 0.01f64..10.0)
                .prop_map(|(lo, w)| ServiceDistribution::Uniform { lo, hi: lo + w }),
            (0.0f64..1.0, 0.01f64..10.0, 0.01f64..10.0).prop_map(|(w, a, b)| {
                ServiceDistribution::HyperExponential {
                    weights: vec![w, 1.0 - w],
                    rates: vec![a, b],
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn cauchy_schwarz(d in arb_law()) {
            let m1 = d.moment(1);
            prop_assert!(d.moment(2) >= m1 * m1 * (1.0 - 1e-12));
        }

        #[test]
        fn cdf_in_unit_interval_and_monotone(d in arb_law(), x in 0.0f64..20.0, h in 0.0f64..5.0) {
            let a = d.cdf(x);
            let b = d.cdf(x + h);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a <= b + 1e-15);
        }
    }
}
