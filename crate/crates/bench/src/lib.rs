//! Criterion benchmarks for `bdris`; see `benches/solvers.rs`.
