//! Structural diagnostics: spectrum, run stability, noise robustness, and the
//! triangle benchmark.

mod benchmark;
mod noise;
mod spectrum;
mod stability;

use thiserror::Error;

pub use benchmark::{benchmark_graphs, triangle_benchmark, triangle_benchmark_on, BenchmarkResult, BENCH_EDGES, BENCH_NODES};
pub use noise::{false_claims, inject_noise, percentile_of, robustness_report, RobustnessReport};
pub use spectrum::{
    laplacian_spectrum, normalized_laplacian, tridiagonal_eigenvalues, SpectrumReport, FULL_LANCZOS_LIMIT,
};
pub use stability::{graph_manifold_consistency, pearson, stability_metrics, StabilityReport, DEFAULT_HORIZON};

use crate::manifold::ManifoldError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("graph is empty")]
    EmptyGraph,
    #[error("graph has {components} components; analyze one component at a time")]
    Disconnected { components: usize },
    #[error("k = {k} is out of range for {nodes} nodes")]
    InvalidK { k: usize, nodes: usize },
    #[error("runs share no nodes")]
    EmptyIntersection,
    #[error("benchmark: {0}")]
    Benchmark(String),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}
