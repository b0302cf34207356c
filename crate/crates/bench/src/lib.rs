//! Criterion benchmarks for the precoding pipeline live in `benches/`.
