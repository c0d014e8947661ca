//! First-passage times `𝔗(u) = inf{t : Q(t) ≥ u}` from an empty queue.
//!
//! General service laws concatenate simulated cycles until one reaches the
//! level. For exponential service the passage is sampled level by level
//! instead: with per-level coin stacks, the number of up-steps `U_i` taken
//! from level `i` satisfies `U_{u−1} = 1`, `U_{i−1} = 1 + F_i` where `F_i` is
//! the number of failures before the `U_i`-th success of a `p`-coin. The
//! passage time is then a Gamma sum over the visits to `0` and to the busy
//! levels, so each history costs `O(u)` draws regardless of how rare the
//! level is.

use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use super::cycles::{CycleSim, SimOptions};
use super::run_chunked;
use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};
use crate::geomsum::binomial_estimate;
use crate::mg1::MG1Model;
use crate::rng::{RngStream, StreamPurpose};
use crate::stats::{MeanAccumulator, SimEstimate};

enum Passage {
    Cycles(CycleSim),
    Levels { lambda: f64, mu: f64, u: u64 },
}

impl Passage {
    fn new(model: &MG1Model, u: u64, cap: u64) -> Self {
        match model.service() {
            ServiceDistribution::Exponential { rate } => Passage::Levels {
                lambda: model.lambda(),
                mu: *rate,
                u,
            },
            _ => Passage::Cycles(CycleSim::new(model, u, cap)),
        }
    }

    fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        match self {
            Passage::Cycles(sim) => {
                let mut elapsed = 0.0;
                loop {
                    let r = sim.run(rng, true)?;
                    if r.hit {
                        return Ok(elapsed + r.length);
                    }
                    elapsed += r.length;
                }
            }
            Passage::Levels { lambda, mu, u } => {
                // up-probability of the jump chain
                let p = lambda / (lambda + mu);
                let mut ups = 1.0f64;
                let mut busy_visits = 0.0f64;
                for _ in 1..*u {
                    let downs = negative_binomial(rng, ups, p);
                    busy_visits += ups + downs;
                    ups = 1.0 + downs;
                }
                let idle = Gamma::new(ups, 1.0 / lambda)
                    .expect("positive shape")
                    .sample(rng);
                let busy = if busy_visits > 0.0 {
                    Gamma::new(busy_visits, 1.0 / (lambda + mu))
                        .expect("positive shape")
                        .sample(rng)
                } else {
                    0.0
                };
                Ok(idle + busy)
            }
        }
    }
}

/// Failures before the `r`-th success of a `p`-coin, as a Gamma–Poisson
/// mixture.
fn negative_binomial(rng: &mut RngStream, r: f64, p: f64) -> f64 {
    let rate = Gamma::new(r, (1.0 - p) / p)
        .expect("positive shape")
        .sample(rng);
    if rate <= 0.0 {
        return 0.0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng)
}

fn check(op: &'static str, u: u64, n: u64) -> Result<()> {
    if u == 0 {
        return Err(Error::domain(op, "level u must be >= 1"));
    }
    if n < 2 {
        return Err(Error::invalid(
            "histories",
            "need at least two replications",
        ));
    }
    Ok(())
}

/// `n` independent first-passage times to level `u`.
pub fn hitting_times(model: &MG1Model, u: u64, n: u64, opts: &SimOptions) -> Result<Vec<f64>> {
    check("hitting_times", u, n)?;
    let passage = Passage::new(model, u, opts.event_cap);
    let parts = run_chunked(opts.seed, StreamPurpose::Histories, n, |rng, count| {
        (0..count)
            .map(|_| passage.sample(rng))
            .collect::<Result<Vec<_>>>()
    });
    let mut out = Vec::with_capacity(n as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Empirical CDF of `𝔗(u) / scale` at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingPoint {
    pub x: f64,
    /// Unscaled time `x · scale`.
    pub t: f64,
    pub cdf: SimEstimate,
    /// `1 − e^{−x} − cdf`
    pub delta: SimEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingCdf {
    pub u: u64,
    pub n: u64,
    pub scale: f64,
    pub mean: SimEstimate,
    pub points: Vec<HittingPoint>,
}

impl HittingCdf {
    /// `max_x |Ĝ(x) − (1 − e^{−x})|` over the grid.
    pub fn max_deviation(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.delta.value.abs())
            .fold(0.0, f64::max)
    }
}

/// Estimates `P(𝔗(u) ≤ x · scale)` for each `x` from `n` histories. With
/// `scale = m₁⁻ / q*` this is the scaled law whose distance to the unit
/// exponential the regenerative bounds control.
pub fn hitting_cdf(
    model: &MG1Model,
    u: u64,
    n: u64,
    xs: &[f64],
    scale: f64,
    opts: &SimOptions,
) -> Result<HittingCdf> {
    check("hitting_cdf", u, n)?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(
            "scale",
            format!("must be finite and > 0, got {scale}"),
        ));
    }
    let ts: Vec<f64> = xs.iter().map(|x| x * scale).collect();
    let passage = Passage::new(model, u, opts.event_cap);
    let parts = run_chunked(opts.seed, StreamPurpose::Histories, n, |rng, count| {
        let mut mean = MeanAccumulator::new();
        let mut below = vec![0u64; ts.len()];
        for _ in 0..count {
            let t = passage.sample(rng)?;
            mean.push(t);
            below
                .iter_mut()
                .zip(&ts)
                .for_each(|(b, x)| *b += u64::from(t <= *x));
        }
        Ok::<_, Error>((mean, below))
    });
    let mut mean = MeanAccumulator::new();
    let mut below = vec![0u64; ts.len()];
    for p in parts {
        let (m, b) = p?;
        mean.merge(&m);
        below.iter_mut().zip(b).for_each(|(a, b)| *a += b);
    }
    let points = xs
        .iter()
        .zip(&ts)
        .zip(&below)
        .map(|((&x, &t), &k)| {
            let cdf = binomial_estimate(k, n);
            HittingPoint {
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
    Ok(HittingCdf {
        u,
        n,
        scale,
        mean: mean.estimate(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mg1::solve_taboo;
    use crate::mg1::Clock;
    use crate::stats::{ks_pvalue, ks_statistic};

    fn mean_passage(model: &MG1Model, u: usize) -> f64 {
        // E 𝔗 = ((1−q)/q) m₁⁻ + m̂₁⁺
        let t = solve_taboo(model, u).unwrap();
        let q = t.q_u();
        let m1m = t.m1_minus().unwrap_or(0.0);
        (1.0 - q) / q * m1m + t.m_hat1_plus(Clock::Continuous)
    }

    #[test]
    fn level_sampler_matches_mean_passage_time() {
        let m = MG1Model::new(1.0, ServiceDistribution::exponential(2.0).unwrap()).unwrap();
        for u in [2u64, 4, 7] {
            let h = hitting_cdf(&m, u, 200_000, &[1.0], 1.0, &SimOptions::with_seed(u)).unwrap();
            assert!(
                h.mean.covers(mean_passage(&m, u as usize), 4.0),
                "u={u}: {:?}",
                h.mean
            );
        }
    }

    #[test]
    fn cycle_sampler_matches_mean_passage_time() {
        let m = MG1Model::new(1.0, ServiceDistribution::erlang(2, 4.0).unwrap()).unwrap();
        let h = hitting_cdf(&m, 4, 100_000, &[1.0], 1.0, &SimOptions::with_seed(8)).unwrap();
        assert!(h.mean.covers(mean_passage(&m, 4), 4.0), "{:?}", h.mean);
    }

    #[test]
    fn both_samplers_agree_in_law() {
        // event-by-event cycles against the level sampler, same M/M/1 queue
        let m = MG1Model::new(1.0, ServiceDistribution::exponential(2.0).unwrap()).unwrap();
        let fast = hitting_times(&m, 4, 20_000, &SimOptions::with_seed(1)).unwrap();
        let mut rng = RngStream::new(2, 0);
        let slow_path = Passage::Cycles(CycleSim::new(&m, 4, u64::MAX));
        let mut slow: Vec<f64> = (0..20_000)
            .map(|_| slow_path.sample(&mut rng).unwrap())
            .collect();
        let mut fast_sorted = fast.clone();
        fast_sorted.sort_by(f64::total_cmp);
        let ecdf =
            |t: f64| fast_sorted.partition_point(|v| *v <= t) as f64 / fast_sorted.len() as f64;
        let d = ks_statistic(&mut slow, ecdf);
        // two-sample KS with equal sizes: effective n = n/2
        assert!(ks_pvalue(d, 10_000) > 1e-3, "D = {d}");
    }

    #[test]
    fn level_one_is_first_arrival() {
        let m = MG1Model::new(1.5, ServiceDistribution::erlang(2, 4.0).unwrap()).unwrap();
        let mut t = hitting_times(&m, 1, 50_000, &SimOptions::with_seed(6)).unwrap();
        let d = ks_statistic(&mut t, |x| 1.0 - (-1.5 * x).exp());
        assert!(ks_pvalue(d, 50_000) > 1e-3);
    }

    #[test]
    fn cdf_is_monotone_and_reproducible() {
        let m = MG1Model::new(1.0, ServiceDistribution::exponential(2.0).unwrap()).unwrap();
        let xs = [0.2, 0.4, 0.6, 0.8, 1.5];
        let opts = SimOptions::with_seed(12);
        let a = hitting_cdf(&m, 5, 30_000, &xs, 10.0, &opts).unwrap();
        let b = hitting_cdf(&m, 5, 30_000, &xs, 10.0, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a
            .points
            .windows(2)
            .all(|w| w[0].cdf.value <= w[1].cdf.value));
    }
}
