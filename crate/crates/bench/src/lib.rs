//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lcm_core::config::LcmConfig;
use lcm_core::extract::RelationType;
use lcm_core::graph::RelGraph;
use lcm_core::oracle::OracleConfig;

/// Connected random graph: a random spanning tree plus `extra` edges, with
/// a mix of relations and two domains.
pub fn random_graph(nodes: usize, extra: usize, seed: u64) -> RelGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<String> = (0..nodes).map(|i| format!("variable {i}")).collect();
    let rels = [RelationType::Causes, RelationType::LeadsTo, RelationType::Reduces];
    let mut g = RelGraph::new();
    for v in 1..nodes {
        let u = rng.random_range(0..v);
        g.add(&labels[u], &labels[v], rels[v % 3], if v % 2 == 0 { "econ" } else { "bio" }, 1);
    }
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..nodes), rng.random_range(0..nodes));
        g.add(&labels[a], &labels[b], rels[rng.random_range(0..3)], "econ", 1);
    }
    g
}

/// Synthetic-oracle config sized for repeated runs.
pub fn small_config(depth: u32, max_topics: usize) -> LcmConfig {
    let mut c = LcmConfig::default();
    c.slice.id = "bench".into();
    c.slice.project_3d = false;
    c.topics.depth_limit = depth;
    c.topics.max_topics = max_topics;
    c.oracle = OracleConfig::synthetic(1);
    c
}

/// Causal sentences in the shapes the extractor handles.
pub fn sentences(n: usize) -> Vec<String> {
    let cues = ["causes", "leads to", "reduces", "influences", "results in", "does not cause"];
    (0..n)
        .map(|i| format!("Higher interest rate {i} {} lower housing demand in region {}.", cues[i % cues.len()], i % 17))
        .collect()
}
