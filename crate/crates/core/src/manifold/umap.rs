//! Neighbor-graph layout: cosine kNN, fuzzy simplicial set, and a seeded
//! stochastic layout with negative sampling.

use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gt::Embeddings;
use super::ManifoldError;
use crate::rng::rng_for;

pub type Coords = Array2<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManifoldConfig {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub components: usize,
    pub seed: u64,
    /// Overrides the size-based default (500 up to 10k points, else 200).
    pub epochs: Option<usize>,
    pub negative_sample_rate: usize,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 30,
            min_dist: 0.1,
            spread: 1.0,
            components: 2,
            seed: 0,
            epochs: None,
            negative_sample_rate: 5,
        }
    }
}

pub fn cosine_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - a.dot(&b) / (na * nb)).max(0.0)
}

/// `k` nearest neighbors of every row under cosine distance, self excluded.
/// Ties break on the lower index.
pub fn knn(h: &Embeddings, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = h.nrows();
    let mut hn = h.clone();
    for mut r in hn.axis_iter_mut(Axis(0)) {
        let s = r.dot(&r).sqrt();
        if s > 0.0 {
            r /= s;
        }
    }
    let gram = hn.dot(&hn.t());
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(usize, f64)> =
                (0..n).filter(|&j| j != i).map(|j| (j, (1.0 - gram[[i, j]]).max(0.0))).collect();
            let k = k.min(d.len());
            if k < d.len() {
                d.select_nth_unstable_by(k, |a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                d.truncate(k);
            }
            d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            d
        })
        .collect()
}

const SMOOTH_K_TOLERANCE: f64 = 1e-5;
const MIN_K_DIST_SCALE: f64 = 1e-3;

/// Per-point (rho, sigma) so that sum_j exp(-(d_j - rho)/sigma) = log2(k).
fn smooth_knn(neigh: &[Vec<(usize, f64)>], k: usize) -> Vec<(f64, f64)> {
    let target = (k as f64).log2();
    let mean_all = {
        let (s, c) = neigh.iter().flatten().fold((0.0, 0usize), |(s, c), x| (s + x.1, c + 1));
        if c == 0 { 0.0 } else { s / c as f64 }
    };
    neigh
        .iter()
        .map(|row| {
            let rho = row.iter().map(|x| x.1).find(|&d| d > 0.0).unwrap_or(0.0);
            let (mut lo, mut hi, mut mid) = (0.0, f64::INFINITY, 1.0);
            for _ in 0..64 {
                let psum: f64 = row.iter().map(|&(_, d)| (-((d - rho).max(0.0)) / mid).exp()).sum();
                if (psum - target).abs() < SMOOTH_K_TOLERANCE {
                    break;
                }
                if psum > target {
                    hi = mid;
                    mid = (lo + hi) / 2.0;
                } else {
                    lo = mid;
                    mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
                }
            }
            let mean_i = if row.is_empty() { 0.0 } else { row.iter().map(|x| x.1).sum::<f64>() / row.len() as f64 };
            let floor = MIN_K_DIST_SCALE * if rho > 0.0 { mean_i } else { mean_all };
            (rho, mid.max(floor))
        })
        .collect()
}

/// Symmetric fuzzy union `a + b - a*b` over directed memberships, as a sorted
/// edge list (i < j).
pub fn fuzzy_graph(h: &Embeddings, n_neighbors: usize) -> Vec<(usize, usize, f64)> {
    let k = n_neighbors.saturating_sub(1).max(1);
    let neigh = knn(h, k);
    let rs = smooth_knn(&neigh, n_neighbors.max(2));
    let mut w: std::collections::BTreeMap<(usize, usize), (f64, f64)> = Default::default();
    for (i, row) in neigh.iter().enumerate() {
        let (rho, sigma) = rs[i];
        for &(j, d) in row {
            let m = if d <= rho || sigma == 0.0 { 1.0 } else { (-(d - rho) / sigma).exp() };
            let key = if i < j { (i, j) } else { (j, i) };
            let e = w.entry(key).or_insert((0.0, 0.0));
            if i < j {
                e.0 = m;
            } else {
                e.1 = m;
            }
        }
    }
    w.into_iter()
        .map(|((i, j), (a, b))| (i, j, a + b - a * b))
        .filter(|e| e.2 > 0.0)
        .collect()
}

/// Fits `1 / (1 + a d^(2b))` to the min_dist/spread target curve by
/// Levenberg-Marquardt least squares.
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() })
        .collect();
    let resid = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let f = 1.0 / (1.0 + a * x.powf(2.0 * b));
                (f - y) * (f - y)
            })
            .sum()
    };
    let (mut a, mut b, mut lambda) = (1.0, 1.0, 1e-3);
    let mut cost = resid(a, b);
    for _ in 0..500 {
        // Normal equations J^T J, J^T r.
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let p = x.powf(2.0 * b);
            let den = 1.0 + a * p;
            let f = 1.0 / den;
            let da = -p / (den * den);
            let db = -a * p * 2.0 * x.ln() / (den * den);
            let r = f - y;
            let j = [da, db];
            for u in 0..2 {
                jtr[u] += j[u] * r;
                for v in 0..2 {
                    jtj[u][v] += j[u] * j[v];
                }
            }
        }
        let m = [[jtj[0][0] * (1.0 + lambda), jtj[0][1]], [jtj[1][0], jtj[1][1] * (1.0 + lambda)]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = (m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
        let step_b = (m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
        let (na, nb) = (a - step_a, b - step_b);
        let nc = if na > 0.0 && nb > 0.0 { resid(na, nb) } else { f64::INFINITY };
        if nc < cost {
            let done = (cost - nc).abs() < 1e-15;
            a = na;
            b = nb;
            cost = nc;
            lambda *= 0.3;
            if done {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

fn clip(x: f64) -> f64 {
    x.clamp(-4.0, 4.0)
}

/// Projects rows of `h` to `config.components` dimensions.
pub fn project(h: &Embeddings, config: &ManifoldConfig) -> Result<Coords, ManifoldError> {
    let n = h.nrows();
    if !(2..=3).contains(&config.components) {
        return Err(ManifoldError::InvalidConfig("components must be 2 or 3".into()));
    }
    if config.n_neighbors < 2 {
        return Err(ManifoldError::InvalidConfig("n_neighbors must be at least 2".into()));
    }
    if n <= config.n_neighbors {
        return Err(ManifoldError::TooFewNodes { nodes: n, n_neighbors: config.n_neighbors });
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(ManifoldError::InvalidConfig("embeddings contain non-finite values".into()));
    }
    let dim = config.components;
    let graph = fuzzy_graph(h, config.n_neighbors);
    let n_epochs = config.epochs.unwrap_or(if n <= 10_000 { 500 } else { 200 });
    let (a, b) = fit_ab(config.min_dist, config.spread);

    let mut rng = rng_for(config.seed, "umap");
    let mut y = Array2::from_shape_fn((n, dim), |_| rng.random_range(-10.0..10.0));

    let wmax = graph.iter().map(|e| e.2).fold(0.0, f64::max);
    let edges: Vec<(usize, usize, f64)> =
        graph.into_iter().filter(|e| e.2 >= wmax / n_epochs as f64).collect();
    let eps: Vec<f64> = edges.iter().map(|e| wmax / e.2).collect();
    let neg_rate = config.negative_sample_rate as f64;
    let eps_neg: Vec<f64> = eps.iter().map(|e| e / neg_rate.max(1e-12)).collect();
    let mut next_sample = eps.clone();
    let mut next_neg = eps_neg.clone();

    for epoch in 0..n_epochs {
        let alpha = 1.0 - epoch as f64 / n_epochs as f64;
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            if next_sample[k] > epoch as f64 + 1.0 {
                continue;
            }
            attract(&mut y, i, j, a, b, alpha);
            next_sample[k] += eps[k];
            if config.negative_sample_rate > 0 {
                let n_neg = ((epoch as f64 + 1.0 - next_neg[k]) / eps_neg[k]).floor().max(0.0) as usize;
                for _ in 0..n_neg {
                    let m = rng.random_range(0..n);
                    if m != i {
                        repel(&mut y, i, m, a, b, alpha);
                    }
                }
                next_neg[k] += n_neg as f64 * eps_neg[k];
            }
        }
    }
    Ok(y)
}

fn dist2(y: &Array2<f64>, i: usize, j: usize) -> f64 {
    y.row(i).iter().zip(y.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn attract(y: &mut Array2<f64>, i: usize, j: usize, a: f64, b: f64, alpha: f64) {
    let d2 = dist2(y, i, j);
    if d2 <= 0.0 {
        return;
    }
    let coef = -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0);
    for c in 0..y.ncols() {
        let g = clip(coef * (y[[i, c]] - y[[j, c]])) * alpha;
        y[[i, c]] += g;
        y[[j, c]] -= g;
    }
}

fn repel(y: &mut Array2<f64>, i: usize, m: usize, a: f64, b: f64, alpha: f64) {
    let d2 = dist2(y, i, m);
    let coef = if d2 > 0.0 { 2.0 / ((0.001 + d2) * (a * d2.powf(b) + 1.0)) } else { 0.0 };
    for c in 0..y.ncols() {
        let g = if coef > 0.0 { clip(coef * (y[[i, c]] - y[[m, c]])) } else { 4.0 };
        y[[i, c]] += g * alpha;
    }
}
