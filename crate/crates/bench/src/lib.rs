//! Criterion benchmarks for conditioning and EM; see `benches/`.
