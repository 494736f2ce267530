//! Criterion benchmarks for the contour-integral kernels; see `benches/kernels.rs`.
