//! Criterion benchmarks for the analyzers and the simulator; see
//! `benches/analyzers.rs`. Run with `cargo bench -p regenbound-bench`.
