//! Event-by-event regeneration cycles of the M/G/1 queue.

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::run_chunked;
use crate::distributions::Sampler;
use crate::error::{Error, Result};
use crate::geomsum::binomial_estimate;
use crate::mg1::MG1Model;
use crate::rng::{RngStream, StreamPurpose};
use crate::stats::{MeanAccumulator, PairAccumulator, SimEstimate};

/// Knobs shared by all cycle-based simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub seed: u64,
    /// Events allowed in one busy period before giving up.
    pub event_cap: u64,
    /// Order of the extra cycle moment `E T^γ`.
    pub gamma: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            seed: 0,
            event_cap: 1_000_000_000,
            gamma: 3.0,
        }
    }
}

impl SimOptions {
    pub fn with_seed(seed: u64) -> Self {
        SimOptions {
            seed,
            ..Self::default()
        }
    }
}

/// One regeneration cycle: an idle period followed by a busy period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub length: f64,
    pub idle: f64,
    pub max_level: u64,
    pub hit: bool,
    /// Time from the cycle start to the arrival that reached the level.
    pub t_cont: Option<f64>,
    /// Time from the cycle start to the end of the service during which the
    /// level was reached.
    pub t_emb: Option<f64>,
}

/// Shared per-thread state of the cycle simulator.
pub(crate) struct CycleSim {
    arrivals: Exp<f64>,
    service: Sampler,
    u: u64,
    cap: u64,
}

impl CycleSim {
    pub(crate) fn new(model: &MG1Model, u: u64, cap: u64) -> Self {
        CycleSim {
            arrivals: Exp::new(model.lambda()).expect("validated lambda"),
            service: model.service().sampler(),
            u,
            cap,
        }
    }

    /// Runs one cycle. With `stop_at_hit` the cycle is abandoned at the
    /// arrival that reaches the level, and `length` is that epoch.
    pub(crate) fn run(&self, rng: &mut RngStream, stop_at_hit: bool) -> Result<CycleRecord> {
        let idle = self.arrivals.sample(rng);
        let mut rec = CycleRecord {
            length: idle,
            idle,
            max_level: 1,
            hit: false,
            t_cont: None,
            t_emb: None,
        };
        if self.u <= 1 {
            rec.hit = true;
            rec.t_cont = Some(idle);
            rec.t_emb = Some(idle);
            if stop_at_hit {
                return Ok(rec);
            }
        }
        let mut t = idle;
        let mut level = 1u64;
        let mut next_arrival = t + self.arrivals.sample(rng);
        let mut events = 0u64;
        while level > 0 {
            let end = t + self.service.sample(rng);
            let mut hit_here = false;
            while next_arrival <= end {
                level += 1;
                events += 1;
                if level >= self.u && !rec.hit {
                    rec.hit = true;
                    rec.t_cont = Some(next_arrival);
                    hit_here = true;
                    if stop_at_hit {
                        rec.length = next_arrival;
                        rec.max_level = level;
                        return Ok(rec);
                    }
                }
                next_arrival += self.arrivals.sample(rng);
            }
            rec.max_level = rec.max_level.max(level);
            if hit_here {
                rec.t_emb = Some(end);
            }
            t = end;
            level -= 1;
            events += 1;
            if events > self.cap {
                return Err(Error::Resource {
                    op: "simulate_cycles",
                    detail: format!(
                        "busy period exceeded {} events; load is too close to 1",
                        self.cap
                    ),
                });
            }
        }
        rec.length = t;
        Ok(rec)
    }
}

/// Aggregates over `n` cycles for level `u`.
///
/// Conditional means are ratio estimators `E[·; A] / P(A)` with
/// delta-method standard errors; they are `None` when the event never
/// occurred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub u: u64,
    pub n: u64,
    pub gamma: f64,
    pub q: SimEstimate,
    pub m1: SimEstimate,
    pub m2: SimEstimate,
    /// `E T^γ`
    pub m_gamma: SimEstimate,
    pub m1_minus: Option<SimEstimate>,
    pub m2_minus: Option<SimEstimate>,
    /// Mean length of cycles that reach the level.
    pub m1_plus: Option<SimEstimate>,
    pub m1_plus_hat_continuous: Option<SimEstimate>,
    pub m1_plus_hat_embedded: Option<SimEstimate>,
}

#[derive(Default, Clone)]
struct CycleAcc {
    hits: u64,
    m1: MeanAccumulator,
    m2: MeanAccumulator,
    mg: MeanAccumulator,
    minus1: PairAccumulator,
    minus2: PairAccumulator,
    plus: PairAccumulator,
    hat_cont: PairAccumulator,
    hat_emb: PairAccumulator,
}

impl CycleAcc {
    fn push(&mut self, r: &CycleRecord, gamma: f64) {
        let len = r.length;
        self.m1.push(len);
        self.m2.push(len * len);
        self.mg.push(len.powf(gamma));
        let miss = if r.hit { 0.0 } else { 1.0 };
        let hit = 1.0 - miss;
        self.hits += u64::from(r.hit);
        self.minus1.push(len * miss, miss);
        self.minus2.push(len * len * miss, miss);
        self.plus.push(len * hit, hit);
        self.hat_cont.push(r.t_cont.unwrap_or(0.0), hit);
        self.hat_emb.push(r.t_emb.unwrap_or(0.0), hit);
    }

    fn merge(&mut self, o: &CycleAcc) {
        self.hits += o.hits;
        self.m1.merge(&o.m1);
        self.m2.merge(&o.m2);
        self.mg.merge(&o.mg);
        self.minus1.merge(&o.minus1);
        self.minus2.merge(&o.minus2);
        self.plus.merge(&o.plus);
        self.hat_cont.merge(&o.hat_cont);
        self.hat_emb.merge(&o.hat_emb);
    }
}

fn check_run(op: &'static str, u: u64, n: u64, opts: &SimOptions) -> Result<()> {
    if u == 0 {
        return Err(Error::domain(op, "level u must be >= 1"));
    }
    if n < 2 {
        return Err(Error::invalid("cycles", "need at least two replications"));
    }
    if !(opts.gamma.is_finite() && opts.gamma > 0.0) {
        return Err(Error::invalid(
            "gamma",
            format!("must be finite and > 0, got {}", opts.gamma),
        ));
    }
    if opts.event_cap == 0 {
        return Err(Error::invalid("event_cap", "must be >= 1"));
    }
    Ok(())
}

/// Simulates `n` independent cycles and aggregates the regeneration
/// statistics at level `u`. Output depends on `(opts.seed, n)` only.
pub fn simulate_cycles(
    model: &MG1Model,
    u: u64,
    n: u64,
    opts: &SimOptions,
) -> Result<CycleSummary> {
    check_run("simulate_cycles", u, n, opts)?;
    let sim = CycleSim::new(model, u, opts.event_cap);
    let gamma = opts.gamma;
    let parts = run_chunked(opts.seed, StreamPurpose::Cycles, n, |rng, count| {
        let mut acc = CycleAcc::default();
        for _ in 0..count {
            acc.push(&sim.run(rng, false)?, gamma);
        }
        Ok::<_, Error>(acc)
    });
    let mut acc = CycleAcc::default();
    for p in parts {
        acc.merge(&p?);
    }
    Ok(acc.summary(u, n, gamma))
}

/// Aggregates records from [`simulate_cycle_records`] as [`simulate_cycles`]
/// would (up to summation order).
pub fn summarize_cycles(records: &[CycleRecord], u: u64, gamma: f64) -> Result<CycleSummary> {
    if records.len() < 2 {
        return Err(Error::invalid("cycles", "need at least two replications"));
    }
    let mut acc = CycleAcc::default();
    records.iter().for_each(|r| acc.push(r, gamma));
    Ok(acc.summary(u, records.len() as u64, gamma))
}

impl CycleAcc {
    fn summary(&self, u: u64, n: u64, gamma: f64) -> CycleSummary {
        let acc = self;
        CycleSummary {
            u,
            n,
            gamma,
            q: binomial_estimate(acc.hits, n),
            m1: acc.m1.estimate(),
            m2: acc.m2.estimate(),
            m_gamma: acc.mg.estimate(),
            m1_minus: acc.minus1.ratio(),
            m2_minus: acc.minus2.ratio(),
            m1_plus: acc.plus.ratio(),
            m1_plus_hat_continuous: acc.hat_cont.ratio(),
            m1_plus_hat_embedded: acc.hat_emb.ratio(),
        }
    }
}

/// The individual cycles behind [`simulate_cycles`] with the same seed.
pub fn simulate_cycle_records(
    model: &MG1Model,
    u: u64,
    n: u64,
    opts: &SimOptions,
) -> Result<Vec<CycleRecord>> {
    check_run("simulate_cycle_records", u, n, opts)?;
    let sim = CycleSim::new(model, u, opts.event_cap);
    let parts = run_chunked(opts.seed, StreamPurpose::Cycles, n, |rng, count| {
        (0..count)
            .map(|_| sim.run(rng, false))
            .collect::<Result<Vec<_>>>()
    });
    let mut out = Vec::with_capacity(n as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Empirical `P(L > t)` of the busy period `L` at each `t`, from `n` busy
/// periods.
pub fn busy_period_survival(
    model: &MG1Model,
    n: u64,
    ts: &[f64],
    opts: &SimOptions,
) -> Result<Vec<SimEstimate>> {
    check_run("busy_period_survival", 1, n, opts)?;
    // the level is never reached, so the cycle runs to its end
    let sim = CycleSim::new(model, u64::MAX, opts.event_cap);
    let parts = run_chunked(opts.seed, StreamPurpose::BusyPeriods, n, |rng, count| {
        let mut above = vec![0u64; ts.len()];
        for _ in 0..count {
            let r = sim.run(rng, false)?;
            let busy = r.length - r.idle;
            above
                .iter_mut()
                .zip(ts)
                .for_each(|(a, t)| *a += u64::from(busy > *t));
        }
        Ok::<_, Error>(above)
    });
    let mut above = vec![0u64; ts.len()];
    for p in parts {
        above.iter_mut().zip(p?).for_each(|(a, b)| *a += b);
    }
    Ok(above.into_iter().map(|k| binomial_estimate(k, n)).collect())
}
