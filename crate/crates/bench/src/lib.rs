//! Criterion benchmarks for the spectral routines and the 1D solver; see `benches/`.
