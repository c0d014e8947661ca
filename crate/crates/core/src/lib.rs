//! Two-sided bounds on the time a regenerative process needs to reach a high
//! level, with exact M/G/1 and M/M/1 instantiations and a seeded Monte Carlo
//! oracle for checking them.

pub mod distributions;
pub mod error;
pub mod geomsum;
pub mod linsolve;
pub mod mg1;
pub mod mm1;
pub mod numeric;
pub mod regen;
pub mod report;
pub mod rng;
pub mod sim;
pub mod stats;

pub use distributions::{Sampler, ServiceDistribution};
pub use error::{Error, Result};
pub use geomsum::{GeomSumBounds, SummandStats};
pub use linsolve::DenseSystem;
pub use mg1::{Clock, LightTailParams, MG1Model, TabooSolution};
pub use mm1::MM1Model;
pub use regen::{BoundKind, BoundMode, BoundReport, CycleMoments, MomentSource, SplitCycleStats};
pub use report::{Provenance, StatementOptions, StatementReport};
pub use rng::{stream_id, RngStream, StreamPurpose};
pub use sim::{CycleRecord, CycleSummary, SimOptions, Verdict};
pub use stats::{MeanAccumulator, PairAccumulator, SimEstimate};
