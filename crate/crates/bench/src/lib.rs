//! Criterion benchmarks for posetfd live in `benches/`.
