//! False-claim injection and its structural footprint.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::spectrum::laplacian_spectrum;
use crate::corpus::{CausalRecord, Corpus};
use crate::extract::RelationType;
use crate::graph::{NodeId, RelGraph};
use crate::manifold::Coords;
use crate::rng::rng_for;

/// Appends each claim as its own statement record tagged `injected`. The
/// records hang off `path` (its last element is the topic).
pub fn inject_noise(corpus: &Corpus, claims: &[String], path: &[String]) -> Corpus {
    let mut out = corpus.clone();
    let topic = path.last().cloned().unwrap_or_default();
    out.statements.extend(claims.iter().map(|c| CausalRecord {
        topic: topic.clone(),
        path: path.to_vec(),
        question: None,
        statements: vec![c.clone()],
        injected: true,
    }));
    out
}

fn cue_for(rel: RelationType) -> &'static str {
    match rel {
        RelationType::Causes => "causes",
        RelationType::LeadsTo => "leads to",
        RelationType::Increases => "increases",
        RelationType::Reduces => "reduces",
        RelationType::Influences => "influences",
        RelationType::Affects => "affects",
        RelationType::Prevents => "prevents",
        RelationType::Supports => "supports",
        RelationType::Improves => "improves",
        RelationType::Impedes => "impedes",
        RelationType::Stresses => "stresses",
        RelationType::IsA => "is a",
        RelationType::PartOf => "is part of",
    }
}

/// Polarity-flipped claims in the style "exercising less improves fitness":
/// for `count` seeded edges u→v, emit "Less u <cue> v." The head is a new
/// phrase; the tail is an existing node.
pub fn false_claims(graph: &RelGraph, count: usize, seed: u64) -> Vec<String> {
    let mut rng = rng_for(seed, "false-claims");
    let edges = graph.edges();
    if edges.is_empty() {
        return Vec::new();
    }
    (0..count)
        .filter_map(|_| edges.choose(&mut rng))
        .map(|e| format!("Less {} {} {}.", graph.label(e.head), cue_for(e.relation), graph.label(e.tail)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// Nodes present only in the noisy graph.
    pub injected_nodes: Vec<String>,
    pub degree_percentiles: Vec<f64>,
    pub max_degree_percentile: f64,
    pub centroid_distance_percentiles: Vec<f64>,
    pub lambda2_clean: f64,
    pub lambda2_noisy: f64,
    pub lambda2_relative_change: f64,
    pub lcc_nodes_clean: usize,
    pub lcc_nodes_noisy: usize,
}

/// Mid-rank percentile of `x` within `all`, in [0, 100].
pub fn percentile_of(all: &[f64], x: f64) -> f64 {
    if all.is_empty() {
        return 0.0;
    }
    let below = all.iter().filter(|&&v| v < x).count() as f64;
    let equal = all.iter().filter(|&&v| v == x).count() as f64;
    100.0 * (below + 0.5 * equal) / all.len() as f64
}

fn lambda2(graph: &RelGraph) -> (f64, usize) {
    let lcc = graph.largest_component();
    let n = lcc.node_count();
    if n < 2 {
        return (0.0, n);
    }
    let l2 = laplacian_spectrum(&lcc, 2).ok().and_then(|s| s.fiedler()).unwrap_or(0.0);
    (l2, n)
}

/// Degree and manifold position of false-claim nodes, and the λ2 shift of the
/// largest component. `coords_noisy` rows follow the noisy graph's ids.
pub fn robustness_report(clean: &RelGraph, noisy: &RelGraph, coords_noisy: &Coords) -> RobustnessReport {
    let injected: Vec<NodeId> =
        (0..noisy.node_count() as NodeId).filter(|&v| clean.node_id(noisy.label(v)).is_none()).collect();
    let deg: Vec<f64> = noisy.degrees().into_iter().map(|d| d as f64).collect();
    let degree_percentiles: Vec<f64> = injected.iter().map(|&v| percentile_of(&deg, deg[v as usize])).collect();

    // Distance of each node to the centroid of its own domain.
    let domains: Vec<String> =
        (0..noisy.node_count() as NodeId).map(|v| noisy.node_domain(v).unwrap_or_default()).collect();
    let dim = coords_noisy.ncols();
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for (v, d) in domains.iter().enumerate() {
        let e = sums.entry(d.as_str()).or_insert((vec![0.0; dim], 0));
        e.0.iter_mut().zip(coords_noisy.row(v).iter()).for_each(|(s, x)| *s += x);
        e.1 += 1;
    }
    let dist: Vec<f64> = domains
        .iter()
        .enumerate()
        .map(|(v, d)| {
            let (s, c) = &sums[d.as_str()];
            coords_noisy.row(v).iter().zip(s).map(|(x, s)| (x - s / *c as f64).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    let centroid_distance_percentiles = injected.iter().map(|&v| percentile_of(&dist, dist[v as usize])).collect();

    let (l2c, nc) = lambda2(clean);
    let (l2n, nn) = lambda2(noisy);
    let rel = if l2c > 0.0 {
        (l2c - l2n).abs() / l2c
    } else if l2n == l2c {
        0.0
    } else {
        f64::INFINITY
    };
    RobustnessReport {
        injected_nodes: injected.iter().map(|&v| noisy.label(v).to_string()).collect(),
        max_degree_percentile: degree_percentiles.iter().copied().fold(0.0, f64::max),
        degree_percentiles,
        centroid_distance_percentiles,
        lambda2_clean: l2c,
        lambda2_noisy: l2n,
        lambda2_relative_change: rel,
        lcc_nodes_clean: nc,
        lcc_nodes_noisy: nn,
    }
}
