//! Run-to-run comparison on the shared node set.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::graph::{NodeId, RelGraph};
use crate::manifold::Coords;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub shared_nodes: usize,
    pub distance_correlation: f64,
    pub knn_jaccard: f64,
    /// Shortest-path vs Euclidean correlation, per run.
    pub consistency_a: f64,
    pub consistency_b: f64,
    pub k: usize,
}

/// Pearson correlation. Two identical inputs give 1.0 even when constant;
/// otherwise a constant input gives 0.0.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n == 0 {
        return 0.0;
    }
    if x == y {
        return 1.0;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (x[i] - mx, y[i] - my);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

fn euclid(c: &Coords, i: usize, j: usize) -> f64 {
    c.row(i).iter().zip(c.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn upper_distances(c: &Coords, ids: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ids.len() * ids.len().saturating_sub(1) / 2);
    for a in 0..ids.len() {
        for b in a + 1..ids.len() {
            out.push(euclid(c, ids[a], ids[b]));
        }
    }
    out
}

fn knn_sets(c: &Coords, ids: &[usize], k: usize) -> Vec<BTreeSet<usize>> {
    (0..ids.len())
        .map(|a| {
            let mut d: Vec<(f64, usize)> =
                (0..ids.len()).filter(|&b| b != a).map(|b| (euclid(c, ids[a], ids[b]), b)).collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            d.into_iter().take(k).map(|x| x.1).collect()
        })
        .collect()
}

/// Correlation of hop distance (symmetrized view) and coordinate distance over
/// pairs of `ids`; unreachable pairs and pairs beyond `horizon` hops are skipped.
pub fn graph_manifold_consistency(graph: &RelGraph, coords: &Coords, ids: &[NodeId], horizon: u32) -> f64 {
    let view = graph.symmetrize();
    let (mut hops, mut eu) = (Vec::new(), Vec::new());
    for (a, &u) in ids.iter().enumerate() {
        let dist = view.bfs(u);
        for &v in &ids[a + 1..] {
            if let Some(h) = dist[v as usize].filter(|&h| h <= horizon) {
                hops.push(h as f64);
                eu.push(euclid(coords, u as usize, v as usize));
            }
        }
    }
    pearson(&hops, &eu)
}

pub const DEFAULT_HORIZON: u32 = 64;

/// Compares two runs on nodes matched by phrase. Coordinate rows follow each
/// graph's node ids.
pub fn stability_metrics(
    a: (&RelGraph, &Coords),
    b: (&RelGraph, &Coords),
    k: usize,
) -> Result<StabilityReport, AnalysisError> {
    let index_b: HashMap<&str, NodeId> =
        (0..b.0.node_count() as NodeId).map(|v| (b.0.label(v), v)).collect();
    let mut shared: Vec<(&str, NodeId, NodeId)> = (0..a.0.node_count() as NodeId)
        .filter_map(|v| index_b.get(a.0.label(v)).map(|&w| (a.0.label(v), v, w)))
        .collect();
    if shared.is_empty() {
        return Err(AnalysisError::EmptyIntersection);
    }
    // Phrase order makes the result independent of argument order.
    shared.sort_by(|x, y| x.0.cmp(y.0));
    let ia: Vec<usize> = shared.iter().map(|s| s.1 as usize).collect();
    let ib: Vec<usize> = shared.iter().map(|s| s.2 as usize).collect();
    let distance_correlation = pearson(&upper_distances(a.1, &ia), &upper_distances(b.1, &ib));
    let k = k.min(shared.len().saturating_sub(1));
    let knn_jaccard = if k == 0 {
        1.0
    } else {
        let (sa, sb) = (knn_sets(a.1, &ia, k), knn_sets(b.1, &ib, k));
        sa.iter()
            .zip(&sb)
            .map(|(x, y)| x.intersection(y).count() as f64 / x.union(y).count() as f64)
            .sum::<f64>()
            / shared.len() as f64
    };
    let ids_a: Vec<NodeId> = shared.iter().map(|s| s.1).collect();
    let ids_b: Vec<NodeId> = shared.iter().map(|s| s.2).collect();
    Ok(StabilityReport {
        shared_nodes: shared.len(),
        distance_correlation,
        knn_jaccard,
        consistency_a: graph_manifold_consistency(a.0, a.1, &ids_a, DEFAULT_HORIZON),
        consistency_b: graph_manifold_consistency(b.0, b.1, &ids_b, DEFAULT_HORIZON),
        k,
    })
}
