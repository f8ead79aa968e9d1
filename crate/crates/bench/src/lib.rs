//! Criterion benchmarks for the offwos solver live in `benches/`.
