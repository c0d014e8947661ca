//! Empirical renewal function `H(t) = E N(t)`, `N(t) = max{k ≥ 1 : S_k ≤ t}`.

use serde::{Deserialize, Serialize};

use super::run_chunked;
use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};
use crate::rng::StreamPurpose;
use crate::stats::{MeanAccumulator, SimEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalPoint {
    pub t: f64,
    pub h: SimEstimate,
}

/// Mean number of renewals by each `t` over `n` paths. With `delay` set the
/// first inter-renewal time is drawn from it instead of `summand`.
pub fn empirical_renewal(
    summand: &ServiceDistribution,
    delay: Option<&ServiceDistribution>,
    ts: &[f64],
    n: u64,
    seed: u64,
) -> Result<Vec<RenewalPoint>> {
    summand.validate()?;
    if let Some(d) = delay {
        d.validate()?;
    }
    if n < 2 {
        return Err(Error::invalid("paths", "need at least two replications"));
    }
    if let Some(bad) = ts.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::invalid(
            "t_grid",
            format!("times must be finite and >= 0, got {bad}"),
        ));
    }
    let horizon = ts.iter().copied().fold(0.0, f64::max);
    let body = summand.sampler();
    let head = delay.unwrap_or(summand).sampler();
    let parts = run_chunked(seed, StreamPurpose::Renewal, n, |rng, count| {
        let mut acc = vec![MeanAccumulator::new(); ts.len()];
        let mut epochs = Vec::new();
        for _ in 0..count {
            epochs.clear();
            let mut s = head.sample(rng);
            while s <= horizon {
                epochs.push(s);
                s += body.sample(rng);
            }
            for (a, t) in acc.iter_mut().zip(ts) {
                a.push(epochs.partition_point(|e| e <= t) as f64);
            }
        }
        acc
    });
    let mut acc = vec![MeanAccumulator::new(); ts.len()];
    for p in &parts {
        acc.iter_mut().zip(p).for_each(|(a, b)| a.merge(b));
    }
    Ok(ts
        .iter()
        .zip(acc)
        .map(|(&t, a)| RenewalPoint { t, h: a.estimate() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomsum::lorden_bounds;

    #[test]
    fn poisson_renewal_function_is_linear() {
        let exp = ServiceDistribution::exponential(2.0).unwrap();
        let pts = empirical_renewal(&exp, None, &[0.5, 1.0, 4.0], 50_000, 1).unwrap();
        for p in pts {
            assert!(p.h.covers(2.0 * p.t, 3.5), "{p:?}");
        }
    }

    #[test]
    fn erlang_inside_lorden_envelope() {
        let e = ServiceDistribution::erlang(2, 1.0).unwrap();
        let pts = empirical_renewal(&e, None, &[10.0], 100_000, 2).unwrap();
        let (lo, hi) = lorden_bounds(10.0, 2.0, 6.0).unwrap();
        assert_eq!((lo, hi), (4.0, 5.5));
        let (a, b) = pts[0].h.interval(3.0);
        assert!(b >= lo && a <= hi);
    }

    #[test]
    fn delay_shifts_the_count_boundedly() {
        let e = ServiceDistribution::erlang(2, 1.0).unwrap();
        let d = ServiceDistribution::exponential(0.25).unwrap();
        let ts = [5.0, 10.0, 20.0, 40.0];
        let plain = empirical_renewal(&e, None, &ts, 40_000, 3).unwrap();
        let delayed = empirical_renewal(&e, Some(&d), &ts, 40_000, 3).unwrap();
        for (p, q) in plain.iter().zip(&delayed) {
            let gap = p.h.value - q.h.value;
            // the delay has mean 4, i.e. two summands' worth of time
            assert!(gap > 0.0 && gap < 2.5, "t={}: gap {gap}", p.t);
        }
    }

    #[test]
    fn zero_time_has_no_renewals() {
        let u = ServiceDistribution::uniform(0.5, 1.5).unwrap();
        let pts = empirical_renewal(&u, None, &[0.0], 1_000, 4).unwrap();
        assert_eq!(pts[0].h.value, 0.0);
    }
}
