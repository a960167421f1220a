//! Edge + triangle message passing with fixed seeded weights.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoder::TextEncoder;
use super::ManifoldError;
use crate::extract::RelationType;
use crate::graph::{NodeId, RelGraph, TriangleMode, TwoSimplex};
use crate::rng::{derive_seed, gaussian, rng_for};

pub type Embeddings = Array2<f64>;

const DOMAIN_CODE_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GtConfig {
    pub dim: usize,
    pub layers: usize,
    /// Weight of the triangle term.
    pub gamma: f64,
    pub seed: u64,
    pub triangle_mode: TriangleMode,
    /// Weight edge messages by multiplicity instead of a plain mean.
    pub weight_by_multiplicity: bool,
}

impl Default for GtConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            layers: 2,
            gamma: 1.0,
            seed: 0,
            triangle_mode: TriangleMode::ChainSameDomain,
            weight_by_multiplicity: false,
        }
    }
}

impl GtConfig {
    pub fn validate(&self) -> Result<(), ManifoldError> {
        if self.dim < 2 {
            return Err(ManifoldError::InvalidConfig("dim must be at least 2".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(ManifoldError::InvalidConfig("gamma must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn seeded_vec(&self, parts: &[&[u8]]) -> Array1<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(self.seed, parts));
        Array1::from_shape_fn(self.dim, |_| gaussian(&mut rng))
    }

    /// Relation table row. Derived from the seed, so every relation is covered.
    pub fn relation_embedding(&self, rel: RelationType) -> Array1<f64> {
        self.seeded_vec(&[b"relation", rel.as_str().as_bytes()])
    }

    /// The single relation row shared by all 2-simplices.
    pub fn simplex_embedding(&self) -> Array1<f64> {
        self.seeded_vec(&[b"relation", b"2-simplex"])
    }

    /// Domain table row; unseen labels extend the table implicitly.
    pub fn domain_embedding(&self, domain: &str) -> Array1<f64> {
        self.seeded_vec(&[b"domain", domain.as_bytes()])
    }

    fn weight(&self, layer: usize, name: &str, rows: usize, cols: usize) -> Array2<f64> {
        let mut rng = rng_for(self.seed, &format!("gt/{layer}/{name}"));
        let scale = 1.0 / (cols as f64).sqrt();
        Array2::from_shape_fn((rows, cols), |_| gaussian(&mut rng) * scale)
    }
}

use rand::SeedableRng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn unit(v: Array1<f64>) -> Array1<f64> {
    let n = v.dot(&v).sqrt();
    if n > 0.0 && n.is_finite() {
        v / n
    } else {
        v
    }
}

pub fn l2_normalize_rows(h: &mut Embeddings) {
    for mut row in h.axis_iter_mut(Axis(0)) {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row /= n;
        }
    }
}

/// Signed hashed code for a domain label, scaled to unit norm.
fn domain_code(domain: Option<&str>, seed: u64) -> [f64; DOMAIN_CODE_DIM] {
    let mut out = [0.0; DOMAIN_CODE_DIM];
    if let Some(d) = domain {
        let h = derive_seed(seed, &[b"domain-code", d.as_bytes()]);
        let s = 1.0 / (DOMAIN_CODE_DIM as f64).sqrt();
        for (i, x) in out.iter_mut().enumerate() {
            *x = if (h >> i) & 1 == 1 { s } else { -s };
        }
    }
    out
}

/// h0 = unit(P · [encode(phrase), degree / max degree, domain code]).
pub fn init_embeddings(
    graph: &RelGraph,
    encoder: &dyn TextEncoder,
    config: &GtConfig,
) -> Result<Embeddings, ManifoldError> {
    config.validate()?;
    let n = graph.node_count();
    let in_dim = encoder.dim() + 1 + DOMAIN_CODE_DIM;
    let proj = config.weight(0, "input-projection", config.dim, in_dim);
    let deg = graph.degrees();
    let max_deg = deg.iter().copied().max().unwrap_or(0).max(1) as f64;
    let rows: Vec<Array1<f64>> = (0..n)
        .into_par_iter()
        .map(|v| {
            let id = v as NodeId;
            let enc = encoder
                .encode(graph.label(id))
                .map_err(|message| ManifoldError::EncoderFailure { node: id, message })?;
            if enc.len() != encoder.dim() {
                return Err(ManifoldError::EncoderFailure {
                    node: id,
                    message: format!("encoder returned {} values, expected {}", enc.len(), encoder.dim()),
                });
            }
            let mut x = Vec::with_capacity(in_dim);
            x.extend(enc);
            x.push(deg[v] as f64 / max_deg);
            x.extend(domain_code(graph.node_domain(id).as_deref(), config.seed));
            Ok(unit(proj.dot(&Array1::from(x))))
        })
        .collect::<Result<_, _>>()?;
    let mut h = Array2::zeros((n, config.dim));
    for (v, r) in rows.into_iter().enumerate() {
        h.row_mut(v).assign(&r);
    }
    Ok(h)
}

/// Precomputed per-layer operators.
pub struct GeometricTransformer {
    config: GtConfig,
    w_self: Vec<Array2<f64>>,
    w_edge: Vec<Array2<f64>>,
    w_tri: Vec<Array2<f64>>,
}

struct Incidence<'a> {
    triangles: Vec<Vec<(NodeId, NodeId, &'a str)>>,
}

impl GeometricTransformer {
    pub fn new(config: GtConfig) -> Result<Self, ManifoldError> {
        config.validate()?;
        let d = config.dim;
        let mk = |name: &str| (0..config.layers.max(1)).map(|l| config.weight(l, name, d, d)).collect::<Vec<_>>();
        Ok(Self { w_self: mk("self"), w_edge: mk("edge"), w_tri: mk("triangle"), config })
    }

    pub fn config(&self) -> &GtConfig {
        &self.config
    }

    fn incidence<'a>(&self, graph: &RelGraph, simplices: &'a [TwoSimplex]) -> Incidence<'a> {
        let mut triangles = vec![Vec::new(); graph.node_count()];
        for s in simplices {
            let [a, b, c] = s.nodes;
            triangles[a as usize].push((b, c, s.domain.as_str()));
            triangles[b as usize].push((a, c, s.domain.as_str()));
            triangles[c as usize].push((a, b, s.domain.as_str()));
        }
        Incidence { triangles }
    }

    /// One Jacobi-style update of every row. Input rows are L2-normalized first.
    pub fn layer(
        &self,
        graph: &RelGraph,
        h: &Embeddings,
        simplices: &[TwoSimplex],
        layer: usize,
    ) -> Result<Embeddings, ManifoldError> {
        let d = self.config.dim;
        if h.nrows() != graph.node_count() || h.ncols() != d {
            return Err(ManifoldError::DimensionMismatch {
                expected: (graph.node_count(), d),
                got: (h.nrows(), h.ncols()),
            });
        }
        let l = layer.min(self.w_self.len() - 1);
        let mut hn = h.clone();
        l2_normalize_rows(&mut hn);
        let selfm = hn.dot(&self.w_self[l].t());
        let edgem = hn.dot(&self.w_edge[l].t());
        let trim = hn.dot(&self.w_tri[l].t());

        let mut gates: HashMap<(RelationType, &str), Array1<f64>> = HashMap::new();
        for e in graph.edges() {
            gates.entry((e.relation, e.domain.as_str())).or_insert_with(|| {
                (self.config.relation_embedding(e.relation) + self.config.domain_embedding(&e.domain)).mapv(sigmoid)
            });
        }
        let simplex = self.config.simplex_embedding();
        let mut tri_gates: HashMap<&str, Array1<f64>> = HashMap::new();
        for s in simplices {
            tri_gates
                .entry(s.domain.as_str())
                .or_insert_with(|| (&simplex + &self.config.domain_embedding(&s.domain)).mapv(sigmoid));
        }
        let inc = self.incidence(graph, simplices);
        let gamma = self.config.gamma;
        let weighted = self.config.weight_by_multiplicity;

        let rows: Vec<Array1<f64>> = (0..graph.node_count())
            .into_par_iter()
            .map(|v| {
                let mut out = selfm.row(v).to_owned();
                let mut agg = Array1::<f64>::zeros(d);
                let mut wsum = 0.0;
                for e in graph.in_edges(v as NodeId) {
                    let w = if weighted { e.multiplicity as f64 } else { 1.0 };
                    let g = &gates[&(e.relation, e.domain.as_str())];
                    agg.scaled_add(w, &(&edgem.row(e.head as usize) * g));
                    wsum += w;
                }
                if wsum > 0.0 {
                    out += &unit(agg / wsum);
                }
                let tris = &inc.triangles[v];
                if gamma > 0.0 && !tris.is_empty() {
                    let mut t = Array1::<f64>::zeros(d);
                    for &(x, y, dom) in tris {
                        let pair: Array1<f64> = (&trim.row(x as usize) + &trim.row(y as usize)) * 0.5;
                        t += &(pair * &tri_gates[dom]);
                    }
                    out.scaled_add(gamma, &unit(t / tris.len() as f64));
                }
                out.mapv(f64::tanh)
            })
            .collect();
        let mut next = Array2::zeros((graph.node_count(), d));
        for (v, r) in rows.into_iter().enumerate() {
            next.row_mut(v).assign(&r);
        }
        Ok(next)
    }

    /// Runs every layer from `h0`; rows of the result have unit norm.
    pub fn refine_from(&self, graph: &RelGraph, h0: &Embeddings) -> Result<Embeddings, ManifoldError> {
        let simplices = graph.detect_triangles(self.config.triangle_mode);
        let mut h = h0.clone();
        for l in 0..self.config.layers {
            h = self.layer(graph, &h, &simplices, l)?;
        }
        l2_normalize_rows(&mut h);
        Ok(h)
    }
}

/// A single layer (layer 0 weights) with triangles from the configured mode.
pub fn gt_layer(graph: &RelGraph, h: &Embeddings, config: &GtConfig) -> Result<Embeddings, ManifoldError> {
    let gt = GeometricTransformer::new(config.clone())?;
    let simplices = graph.detect_triangles(config.triangle_mode);
    gt.layer(graph, h, &simplices, 0)
}

/// Initial and refined embeddings.
pub fn gt_refine(
    graph: &RelGraph,
    config: &GtConfig,
    encoder: &dyn TextEncoder,
) -> Result<(Embeddings, Embeddings), ManifoldError> {
    let h0 = init_embeddings(graph, encoder, config)?;
    let h = GeometricTransformer::new(config.clone())?.refine_from(graph, &h0)?;
    Ok((h0, h))
}

pub fn row_norm(r: ArrayView1<f64>) -> f64 {
    r.dot(&r).sqrt()
}
