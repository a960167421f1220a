//! has-triangle classification from pooled refined embeddings.

use std::collections::BTreeSet;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::extract::RelationType;
use crate::graph::{RelGraph, TriangleMode};
use crate::manifold::{gt_refine, ConstantEncoder, GtConfig};
use crate::rng::rng_for;

pub const BENCH_NODES: usize = 12;
pub const BENCH_EDGES: usize = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub accuracy_with_triangles: f64,
    pub accuracy_edges_only: f64,
    pub train: usize,
    pub test: usize,
}

fn build(edges: &[(usize, usize)]) -> RelGraph {
    let labels: Vec<String> = (0..BENCH_NODES).map(|i| format!("x{i}")).collect();
    RelGraph::from_edges(
        edges.iter().map(|&(a, b)| (labels[a].as_str(), labels[b].as_str(), RelationType::Causes, "bench", 1)),
    )
}

fn has_cycle(edges: &[(usize, usize)]) -> bool {
    let set: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    for &(a, b) in edges {
        for &(c, d) in edges {
            if c == b && d != a && set.contains(&(d, a)) {
                return true;
            }
        }
    }
    false
}

/// A matched pair on one skeleton: the positive carries the 3-cycle
/// a→b→c→a, the negative has c→a reversed and no directed 3-cycle at all.
fn pair(rng: &mut rand_chacha::ChaCha8Rng) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    loop {
        let mut nodes: Vec<usize> = (0..BENCH_NODES).collect();
        nodes.shuffle(rng);
        let (a, b, c) = (nodes[0], nodes[1], nodes[2]);
        let mut pos = vec![(a, b), (b, c), (c, a)];
        let mut und: BTreeSet<(usize, usize)> = pos.iter().map(|&(x, y)| (x.min(y), x.max(y))).collect();
        // Spanning-ish random edges so that most nodes are touched.
        let mut guard = 0;
        while pos.len() < BENCH_EDGES && guard < 1000 {
            guard += 1;
            let x = rng.random_range(0..BENCH_NODES);
            let y = rng.random_range(0..BENCH_NODES);
            if x == y || !und.insert((x.min(y), x.max(y))) {
                continue;
            }
            pos.push((x, y));
        }
        let mut neg = pos.clone();
        neg[2] = (a, c);
        if pos.len() == BENCH_EDGES && !has_cycle(&neg) {
            return (pos, neg);
        }
    }
}

/// Balanced labelled set of `n` graphs (half with a directed 3-cycle).
pub fn benchmark_graphs(n: usize, seed: u64) -> Vec<(RelGraph, bool)> {
    let mut rng = rng_for(seed, "triangle-benchmark");
    let mut out = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        let (p, q) = pair(&mut rng);
        out.push((build(&p), true));
        out.push((build(&q), false));
    }
    out
}

fn pooled_features(g: &RelGraph, cfg: &GtConfig) -> Result<Vec<f64>, AnalysisError> {
    let (_, h) = gt_refine(g, cfg, &ConstantEncoder::new(16))?;
    let mean = h.mean_axis(ndarray::Axis(0)).unwrap_or_else(|| Array1::zeros(cfg.dim));
    Ok(mean.to_vec())
}

/// L2-regularized logistic regression by full-batch gradient descent on
/// standardized features. Returns held-out accuracy.
fn logistic_accuracy(train: &[(Vec<f64>, bool)], test: &[(Vec<f64>, bool)]) -> f64 {
    let d = train[0].0.len();
    let n = train.len() as f64;
    let mut mu = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for (x, _) in train {
        mu.iter_mut().zip(x).for_each(|(m, v)| *m += v / n);
    }
    for (x, _) in train {
        sd.iter_mut().zip(x.iter().zip(&mu)).for_each(|(s, (v, m))| *s += (v - m).powi(2) / n);
    }
    let sd: Vec<f64> = sd.into_iter().map(|s| if s > 1e-24 { s.sqrt() } else { 1.0 }).collect();
    let z = |x: &[f64]| -> Vec<f64> { x.iter().zip(&mu).zip(&sd).map(|((v, m), s)| (v - m) / s).collect() };
    let tr: Vec<(Vec<f64>, f64)> = train.iter().map(|(x, y)| (z(x), if *y { 1.0 } else { 0.0 })).collect();
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let (lr, l2) = (0.1, 1e-2);
    for _ in 0..2000 {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (x, y) in &tr {
            let p = 1.0 / (1.0 + (-(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b)).exp());
            let r = p - y;
            gw.iter_mut().zip(x).for_each(|(g, v)| *g += r * v / n);
            gb += r / n;
        }
        w.iter_mut().zip(&gw).for_each(|(wi, g)| *wi -= lr * (g + l2 * *wi));
        b -= lr * gb;
    }
    let correct = test
        .iter()
        .filter(|(x, y)| {
            let s = z(x).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
            (s > 0.0) == *y
        })
        .count();
    correct as f64 / test.len() as f64
}

/// Accuracy with the triangle channel (γ>0, cycle mode) and with edges only
/// (γ=0), on a 70/30 split of a balanced set.
pub fn triangle_benchmark(n_graphs: usize, seed: u64) -> Result<BenchmarkResult, AnalysisError> {
    if n_graphs < 50 {
        return Err(AnalysisError::Benchmark(format!("need at least 50 graphs, got {n_graphs}")));
    }
    triangle_benchmark_on(&benchmark_graphs(n_graphs, seed), seed)
}

pub fn triangle_benchmark_on(set: &[(RelGraph, bool)], seed: u64) -> Result<BenchmarkResult, AnalysisError> {
    let pos = set.iter().filter(|s| s.1).count();
    if pos == 0 || pos * 2 != set.len() {
        return Err(AnalysisError::Benchmark(format!(
            "set must be balanced: {pos} positive of {}",
            set.len()
        )));
    }
    let base = GtConfig { dim: 64, layers: 2, gamma: 1.0, seed, triangle_mode: TriangleMode::Cycle, ..Default::default() };
    let edges_only = GtConfig { gamma: 0.0, ..base.clone() };

    let mut order: Vec<usize> = (0..set.len()).collect();
    order.shuffle(&mut rng_for(seed, "benchmark-split"));
    let n_train = set.len() * 7 / 10;

    let mut accs = Vec::new();
    for cfg in [&base, &edges_only] {
        let feats: Vec<(Vec<f64>, bool)> =
            set.iter().map(|(g, y)| Ok((pooled_features(g, cfg)?, *y))).collect::<Result<_, AnalysisError>>()?;
        let train: Vec<_> = order[..n_train].iter().map(|&i| feats[i].clone()).collect();
        let test: Vec<_> = order[n_train..].iter().map(|&i| feats[i].clone()).collect();
        accs.push(logistic_accuracy(&train, &test));
    }
    Ok(BenchmarkResult {
        accuracy_with_triangles: accs[0],
        accuracy_edges_only: accs[1],
        train: n_train,
        test: set.len() - n_train,
    })
}
