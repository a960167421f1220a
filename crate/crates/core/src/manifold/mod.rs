//! Node embeddings, message-passing refinement, and low-dimensional layout.

mod encoder;
mod gt;
mod umap;

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encoder::{ConstantEncoder, HashedNgramEncoder, TextEncoder};
pub use gt::{
    gt_layer, gt_refine, init_embeddings, l2_normalize_rows, row_norm, Embeddings, GeometricTransformer, GtConfig,
};
pub use umap::{cosine_distance, fit_ab, fuzzy_graph, knn, project, Coords, ManifoldConfig};

use crate::graph::{NodeId, RelGraph};
use crate::jsonl::{self, RecordError};

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("encoder failed on node {node}: {message}")]
    EncoderFailure { node: NodeId, message: String },
    #[error("expected a {expected:?} matrix, got {got:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("{nodes} nodes is too few for n_neighbors = {n_neighbors}")]
    TooFewNodes { nodes: usize, n_neighbors: usize },
    #[error("invalid manifold config: {0}")]
    InvalidConfig(String),
    #[error("bad embedding file: {0}")]
    BadEmbeddingFile(String),
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// One row of `manifold_<slice>.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub id: NodeId,
    pub phrase: String,
    pub coords: Vec<f64>,
    pub degree: usize,
    pub domain: Option<String>,
}

pub fn manifold_points(graph: &RelGraph, coords: &Coords) -> Vec<ManifoldPoint> {
    let deg = graph.degrees();
    (0..graph.node_count())
        .map(|v| ManifoldPoint {
            id: v as NodeId,
            phrase: graph.label(v as NodeId).to_string(),
            coords: coords.row(v).to_vec(),
            degree: deg[v],
            domain: graph.node_domain(v as NodeId),
        })
        .collect()
}

pub fn write_manifold(path: &Path, points: &[ManifoldPoint]) -> Result<(), ManifoldError> {
    Ok(jsonl::write(path, points)?)
}

pub fn read_manifold(path: &Path) -> Result<Vec<ManifoldPoint>, ManifoldError> {
    Ok(jsonl::read(path)?)
}

/// Little-endian `u64 rows, u64 cols`, then row-major `f64` values.
pub fn encode_embeddings(h: &Embeddings) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * h.len());
    out.extend((h.nrows() as u64).to_le_bytes());
    out.extend((h.ncols() as u64).to_le_bytes());
    for x in h.iter() {
        out.extend(x.to_le_bytes());
    }
    out
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<Embeddings, ManifoldError> {
    let bad = |m: &str| ManifoldError::BadEmbeddingFile(m.to_string());
    if bytes.len() < 16 {
        return Err(bad("truncated header"));
    }
    let rd = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let (n, d) = (rd(0) as usize, rd(8) as usize);
    let expect = n.checked_mul(d).and_then(|x| x.checked_mul(8)).and_then(|x| x.checked_add(16));
    if expect != Some(bytes.len()) {
        return Err(bad("length does not match header"));
    }
    let vals: Vec<f64> = bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Array2::from_shape_vec((n, d), vals).map_err(|e| bad(&e.to_string()))
}

pub fn write_embeddings(path: &Path, h: &Embeddings) -> Result<(), ManifoldError> {
    let mut f = fs::File::create(path).map_err(|e| RecordError::io(path, e))?;
    f.write_all(&encode_embeddings(h)).map_err(|e| RecordError::io(path, e))?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<Embeddings, ManifoldError> {
    let bytes = fs::read(path).map_err(|e| RecordError::io(path, e))?;
    decode_embeddings(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_bytes_round_trip() {
        let h = Array2::from_shape_fn((3, 4), |(i, j)| i as f64 * 0.5 - j as f64);
        let b = encode_embeddings(&h);
        assert_eq!(b.len(), 16 + 12 * 8);
        assert_eq!(decode_embeddings(&b).unwrap(), h);
        assert!(decode_embeddings(&b[..20]).is_err());
        let empty = Array2::<f64>::zeros((0, 7));
        assert_eq!(decode_embeddings(&encode_embeddings(&empty)).unwrap().dim(), (0, 7));
    }
}
