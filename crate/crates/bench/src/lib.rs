//! Criterion benchmarks for kahler-core; see benches/kernels.rs.
