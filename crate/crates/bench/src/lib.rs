//! Criterion benchmarks for the analytics in `tandem-core`; see `benches/`.
