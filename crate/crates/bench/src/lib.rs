//! Criterion benchmarks for `rigidity-core`; see `benches/`.
