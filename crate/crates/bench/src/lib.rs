//! Criterion benchmarks for the surfrank core; see `benches/`.
