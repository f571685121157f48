//! Criterion benchmarks for `bellcert` live in `benches/`.
