//! Seeded Monte Carlo oracle.
//!
//! Work is cut into fixed-size chunks of replications. Chunk `k` always
//! draws from stream `stream_id(purpose, k)` and partial results are merged
//! in chunk order, so the output depends on `(seed, n)` only, never on the
//! number of worker threads.

use rayon::prelude::*;

use crate::rng::{stream_id, RngStream, StreamPurpose};

mod cycles;
mod hitting;
mod renewal;
mod verify;

pub use cycles::{
    busy_period_survival, simulate_cycle_records, simulate_cycles, summarize_cycles, CycleRecord,
    CycleSummary, SimOptions,
};
pub use hitting::{hitting_cdf, hitting_times, HittingCdf, HittingPoint};
pub use renewal::{empirical_renewal, RenewalPoint};
pub use verify::{verify_report, CheckedPoint, Verdict, VerifyOutcome, DEFAULT_Z};

/// Replications per chunk.
pub const CHUNK: u64 = 16_384;

/// Runs `f(rng, count)` over `ceil(n / CHUNK)` chunks in parallel and
/// returns the per-chunk results in chunk order.
pub(crate) fn run_chunked<A, F>(seed: u64, purpose: StreamPurpose, n: u64, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut RngStream, u64) -> A + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|k| {
            let count = CHUNK.min(n - k * CHUNK);
            let mut rng = RngStream::new(seed, stream_id(purpose, k));
            f(&mut rng, count)
        })
        .collect()
}
