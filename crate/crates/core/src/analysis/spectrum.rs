//! Normalized-Laplacian spectrum by Lanczos with full reorthogonalization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::graph::{RelGraph, UndirectedView};
use crate::rng::rng_for;

/// Up to this size the Krylov space is grown to the full dimension, so the
/// tridiagonal spectrum is the exact spectrum.
pub const FULL_LANCZOS_LIMIT: usize = 200;

/// Larger graphs stop once the `k` smallest Ritz values move less than this
/// between checks.
const RITZ_TOL: f64 = 1e-11;
const RITZ_CHECK_EVERY: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Smallest `k` eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub nodes: usize,
    pub edges: usize,
    pub k: usize,
    /// Krylov steps taken.
    pub steps: usize,
}

impl SpectrumReport {
    pub fn fiedler(&self) -> Option<f64> {
        self.eigenvalues.get(1).copied()
    }
}

/// y = (I - D^-1/2 A D^-1/2) x. Isolated vertices get a zero row.
pub(crate) fn laplacian_apply(view: &UndirectedView, inv_sqrt_deg: &[f64], x: &[f64], y: &mut [f64]) {
    for (i, nb) in view.adj.iter().enumerate() {
        if nb.is_empty() {
            y[i] = 0.0;
            continue;
        }
        let s: f64 = nb.iter().map(|&j| inv_sqrt_deg[j as usize] * x[j as usize]).sum();
        y[i] = x[i] - inv_sqrt_deg[i] * s;
    }
}

/// Dense normalized Laplacian, row-major.
pub fn normalized_laplacian(graph: &RelGraph) -> Vec<Vec<f64>> {
    let view = graph.symmetrize();
    let n = view.adj.len();
    let isd = inv_sqrt_degrees(&view);
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        if !view.adj[i].is_empty() {
            m[i][i] = 1.0;
        }
        for &j in &view.adj[i] {
            m[i][j as usize] = -isd[i] * isd[j as usize];
        }
    }
    m
}

fn inv_sqrt_degrees(view: &UndirectedView) -> Vec<f64> {
    view.adj.iter().map(|n| if n.is_empty() { 0.0 } else { 1.0 / (n.len() as f64).sqrt() }).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues of a symmetric tridiagonal matrix (implicit QL with Wilkinson
/// shifts). `d` is the diagonal, `e[i]` couples rows i and i+1.
pub fn tridiagonal_eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::repeat(0.0)).take(n).collect();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

/// Smallest `k` eigenvalues of the normalized Laplacian of a connected graph.
pub fn laplacian_spectrum(graph: &RelGraph, k: usize) -> Result<SpectrumReport, AnalysisError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(AnalysisError::EmptyGraph);
    }
    if k == 0 || k > n {
        return Err(AnalysisError::InvalidK { k, nodes: n });
    }
    let comps = graph.components();
    if comps.count != 1 {
        return Err(AnalysisError::Disconnected { components: comps.count });
    }
    let view = graph.symmetrize();
    let (alpha, beta) = if n <= FULL_LANCZOS_LIMIT {
        lanczos(&view, n, 0x5eed, &mut |_, _| false)
    } else {
        let min_steps = (2 * k + 40).min(n);
        let mut prev: Vec<f64> = Vec::new();
        lanczos(&view, n, 0x5eed, &mut |a, b| {
            if a.len() < min_steps || a.len() % RITZ_CHECK_EVERY != 0 {
                return false;
            }
            let mut ev = tridiagonal_eigenvalues(a, b);
            ev.truncate(k);
            let settled = prev.len() == ev.len() && prev.iter().zip(&ev).all(|(x, y)| (x - y).abs() < RITZ_TOL);
            prev = ev;
            settled
        })
    };
    let mut ev = tridiagonal_eigenvalues(&alpha, &beta);
    for x in &mut ev {
        *x = x.clamp(0.0, 2.0);
    }
    ev.truncate(k);
    Ok(SpectrumReport { eigenvalues: ev, nodes: n, edges: view.edge_count(), k, steps: alpha.len() })
}

/// Lanczos tridiagonalization with full reorthogonalization. On breakdown the
/// iteration restarts from a fresh vector orthogonal to the basis, leaving a
/// zero coupling in `beta`, so repeated eigenvalues are all recovered when the
/// run reaches the full dimension. A run cut short by `stop` can miss copies
/// of a repeated eigenvalue. `stop` sees the current tridiagonal matrix after
/// each step: diagonal `alpha` and the `alpha.len() - 1` couplings in `beta`.
fn lanczos(
    view: &UndirectedView,
    steps: usize,
    seed: u64,
    stop: &mut dyn FnMut(&[f64], &[f64]) -> bool,
) -> (Vec<f64>, Vec<f64>) {
    let n = view.adj.len();
    let isd = inv_sqrt_degrees(view);
    let mut rng = rng_for(seed, "lanczos");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let (mut alpha, mut beta) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
    let fresh = |basis: &[Vec<f64>], rng: &mut rand_chacha::ChaCha8Rng| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for _ in 0..2 {
                for q in basis {
                    let c = dot(&v, q);
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nv = dot(&v, &v).sqrt();
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                return Some(v);
            }
        }
        None
    };
    let Some(mut q) = fresh(&basis, &mut rng) else { return (alpha, beta) };
    let mut w = vec![0.0; n];
    for j in 0..steps {
        laplacian_apply(view, &isd, &q, &mut w);
        let a = dot(&w, &q);
        alpha.push(a);
        basis.push(q.clone());
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        if j + 1 == steps {
            break;
        }
        let b = dot(&w, &w).sqrt();
        if stop(&alpha, &beta) {
            break;
        }
        if b > 1e-10 {
            beta.push(b);
            q = w.iter().map(|x| x / b).collect();
        } else {
            beta.push(0.0);
            match fresh(&basis, &mut rng) {
                Some(v) => q = v,
                None => {
                    beta.pop();
                    break;
                }
            }
        }
    }
    (alpha, beta)
}
