//! Slice persistence: one directory per slice revision, a content-hashed
//! manifest written last, a store that publishes revisions, and cross-slice
//! union.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::LcmConfig;
use crate::corpus::{Corpus, CausalRecord, QUESTIONS_FILE, STATEMENTS_FILE};
use crate::extract::{RelationType, Triple};
use crate::graph::RelGraph;
use crate::jsonl::{self, RecordError};
use crate::manifold::{decode_embeddings, encode_embeddings, manifold_points, Coords, Embeddings, ManifoldError, ManifoldPoint};
use crate::pipeline::{TimingProfile, TIMING_FILE};
use crate::topics::TopicGraph;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const CURRENT_FILE: &str = "CURRENT";

#[derive(Debug, Error)]
pub enum SliceError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("slice at {dir} is incomplete: {missing} is missing")]
    IncompleteSlice { dir: String, missing: String },
    #[error("artifact {file} does not match its recorded hash")]
    HashMismatch { file: String },
    #[error("unknown slice format version {0}")]
    UnknownFormatVersion(u32),
    #[error("bad manifest: {0}")]
    BadManifest(String),
    #[error("no slice named {0:?}")]
    UnknownSlice(String),
    #[error("inconsistent slice: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

fn io_err(path: &Path, source: std::io::Error) -> SliceError {
    SliceError::Io { path: path.display().to_string(), source }
}

/// Everything one pipeline run produces for a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub id: String,
    pub config: LcmConfig,
    pub topics: TopicGraph,
    pub corpus: Corpus,
    pub triples: Vec<Triple>,
    /// Always `RelGraph::build(&triples)`.
    pub graph: RelGraph,
    pub embeddings_init: Embeddings,
    pub embeddings: Embeddings,
    pub coords2: Coords,
    pub coords3: Option<Coords>,
    pub timing: Option<TimingProfile>,
    pub revision: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceStats {
    pub topics: usize,
    pub topic_depth_limit: u32,
    pub topic_cap: usize,
    pub questions: usize,
    pub statements: usize,
    pub triples: usize,
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceManifest {
    pub format_version: u32,
    pub slice_id: String,
    pub domain: String,
    /// RFC 3339.
    pub created: String,
    pub revision: u64,
    pub config: LcmConfig,
    /// File name to SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
    pub timing: Option<TimingProfile>,
    pub stats: SliceStats,
}

impl SliceManifest {
    pub fn has_3d(&self) -> bool {
        self.artifacts.contains_key(&SliceFiles::new(&self.slice_id).manifold_3d)
    }
}

/// Artifact names for one slice id.
#[derive(Debug, Clone)]
pub struct SliceFiles {
    pub topic_graph: String,
    pub topic_list: String,
    pub triples: String,
    pub edges: String,
    pub embeddings: String,
    pub embeddings_init: String,
    pub manifold: String,
    pub manifold_3d: String,
}

impl SliceFiles {
    pub fn new(id: &str) -> Self {
        Self {
            topic_graph: format!("topic_graph_{id}.jsonl"),
            topic_list: format!("topic_list_{id}.txt"),
            triples: format!("triples_{id}.jsonl"),
            edges: format!("edges_{id}.tsv"),
            embeddings: format!("embeddings_{id}.bin"),
            embeddings_init: format!("embeddings_init_{id}.bin"),
            manifold: format!("manifold_{id}.jsonl"),
            manifold_3d: format!("manifold_{id}_3d.jsonl"),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Result of the first write phase, consumed by [`finish_slice`].
#[derive(Debug)]
pub struct WrittenArtifacts {
    files: Vec<String>,
    previous_revision: Option<u64>,
}

fn read_manifest(dir: &Path) -> Result<SliceManifest, SliceError> {
    let path = dir.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(SliceError::IncompleteSlice { dir: dir.display().to_string(), missing: MANIFEST_FILE.into() })
        }
        Err(e) => return Err(io_err(&path, e)),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| SliceError::BadManifest(e.to_string()))?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(SliceError::UnknownFormatVersion(v as u32)),
        None => return Err(SliceError::BadManifest("format_version missing".into())),
    }
    serde_json::from_value(value).map_err(|e| SliceError::BadManifest(e.to_string()))
}

/// Writes every data artifact. Any existing manifest is removed first, so an
/// interrupted rewrite is detected as incomplete.
pub fn write_artifacts(dir: &Path, slice: &Slice) -> Result<WrittenArtifacts, SliceError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let previous_revision = read_manifest(dir).ok().map(|m| m.revision);
    let mpath = dir.join(MANIFEST_FILE);
    if mpath.exists() {
        fs::remove_file(&mpath).map_err(|e| io_err(&mpath, e))?;
    }
    let names = SliceFiles::new(&slice.id);
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), SliceError> {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
        files.push(name.to_string());
        Ok(())
    };
    put(&names.topic_graph, jsonl::to_string(&slice.topics.nodes).into_bytes())?;
    put(&names.topic_list, slice.topics.topic_list().into_bytes())?;
    put(QUESTIONS_FILE, jsonl::to_string(&slice.corpus.questions).into_bytes())?;
    put(STATEMENTS_FILE, jsonl::to_string(&slice.corpus.statements).into_bytes())?;
    put(&names.triples, jsonl::to_string(&slice.triples).into_bytes())?;
    put(&names.edges, slice.graph.to_edge_list().into_bytes())?;
    put(&names.embeddings_init, encode_embeddings(&slice.embeddings_init))?;
    put(&names.embeddings, encode_embeddings(&slice.embeddings))?;
    put(&names.manifold, jsonl::to_string(&manifold_points(&slice.graph, &slice.coords2)).into_bytes())?;
    if let Some(c3) = &slice.coords3 {
        put(&names.manifold_3d, jsonl::to_string(&manifold_points(&slice.graph, c3)).into_bytes())?;
    }
    Ok(WrittenArtifacts { files, previous_revision })
}

/// Writes the timing file, hashes everything, and commits the manifest via
/// rename. Sets `slice.revision` to the new revision.
pub fn finish_slice(dir: &Path, slice: &mut Slice, written: WrittenArtifacts) -> Result<SliceManifest, SliceError> {
    let mut files = written.files;
    if let Some(t) = &slice.timing {
        let p = dir.join(TIMING_FILE);
        fs::write(&p, t.render()).map_err(|e| io_err(&p, e))?;
        files.push(TIMING_FILE.to_string());
    }
    let mut artifacts = BTreeMap::new();
    for f in files {
        let p = dir.join(&f);
        let bytes = fs::read(&p).map_err(|e| io_err(&p, e))?;
        artifacts.insert(f, sha256_hex(&bytes));
    }
    let revision = written.previous_revision.unwrap_or(0).max(slice.revision) + 1;
    let manifest = SliceManifest {
        format_version: FORMAT_VERSION,
        slice_id: slice.id.clone(),
        domain: slice.config.topics.domain_phrase.clone(),
        created: chrono::Utc::now().to_rfc3339(),
        revision,
        config: slice.config.clone(),
        artifacts,
        timing: slice.timing.clone(),
        stats: SliceStats {
            topics: slice.topics.len(),
            topic_depth_limit: slice.topics.depth_limit,
            topic_cap: slice.topics.max_topics,
            questions: slice.corpus.questions.len(),
            statements: slice.corpus.statements.len(),
            triples: slice.triples.len(),
            nodes: slice.graph.node_count(),
            edges: slice.graph.edge_count(),
        },
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
    let dst = dir.join(MANIFEST_FILE);
    fs::rename(&tmp, &dst).map_err(|e| io_err(&dst, e))?;
    slice.revision = revision;
    Ok(manifest)
}

pub fn write_slice(dir: &Path, slice: &mut Slice) -> Result<SliceManifest, SliceError> {
    let w = write_artifacts(dir, slice)?;
    finish_slice(dir, slice, w)
}

/// Reads the manifest and every listed artifact, checking hashes. Returns the
/// verified artifact bytes by name.
pub fn verify_slice(dir: &Path) -> Result<(SliceManifest, BTreeMap<String, Vec<u8>>), SliceError> {
    let m = read_manifest(dir)?;
    let mut blobs = BTreeMap::new();
    for (name, hash) in &m.artifacts {
        let p = dir.join(name);
        let bytes = match fs::read(&p) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(SliceError::IncompleteSlice { dir: dir.display().to_string(), missing: name.clone() })
            }
            Err(e) => return Err(io_err(&p, e)),
        };
        if &sha256_hex(&bytes) != hash {
            return Err(SliceError::HashMismatch { file: name.clone() });
        }
        blobs.insert(name.clone(), bytes);
    }
    Ok((m, blobs))
}

fn coords_from_points(points: &[ManifoldPoint], nodes: usize, dims: usize) -> Result<Coords, SliceError> {
    if points.len() != nodes {
        return Err(SliceError::Inconsistent(format!("{} manifold rows for {nodes} nodes", points.len())));
    }
    let mut c = Coords::zeros((nodes, dims));
    for (i, p) in points.iter().enumerate() {
        if p.id as usize != i || p.coords.len() != dims {
            return Err(SliceError::Inconsistent(format!("manifold row {i} is out of order or has wrong width")));
        }
        c.row_mut(i).iter_mut().zip(&p.coords).for_each(|(d, s)| *d = *s);
    }
    Ok(c)
}

pub fn load_slice(dir: &Path) -> Result<Slice, SliceError> {
    let (m, blobs) = verify_slice(dir)?;
    let names = SliceFiles::new(&m.slice_id);
    let need = |name: &str| -> Result<&[u8], SliceError> {
        blobs.get(name).map(Vec::as_slice).ok_or_else(|| SliceError::IncompleteSlice {
            dir: dir.display().to_string(),
            missing: name.to_string(),
        })
    };
    let text = |name: &str| -> Result<&str, SliceError> {
        std::str::from_utf8(need(name)?).map_err(|e| SliceError::Inconsistent(format!("{name}: {e}")))
    };
    let topics = TopicGraph::parse_records(text(&names.topic_graph)?, m.stats.topic_depth_limit, m.stats.topic_cap)?;
    let corpus = Corpus {
        questions: jsonl::parse::<CausalRecord>(text(QUESTIONS_FILE)?)?,
        statements: jsonl::parse::<CausalRecord>(text(STATEMENTS_FILE)?)?,
    };
    let triples: Vec<Triple> = jsonl::parse(text(&names.triples)?)?;
    let graph = RelGraph::build(&triples);
    let n = graph.node_count();
    let embeddings_init = decode_embeddings(need(&names.embeddings_init)?)?;
    let embeddings = decode_embeddings(need(&names.embeddings)?)?;
    if embeddings.nrows() != n || embeddings_init.nrows() != n {
        return Err(SliceError::Inconsistent("embedding rows do not match node count".into()));
    }
    let coords2 = coords_from_points(&jsonl::parse(text(&names.manifold)?)?, n, 2)?;
    let coords3 = if blobs.contains_key(&names.manifold_3d) {
        Some(coords_from_points(&jsonl::parse(text(&names.manifold_3d)?)?, n, 3)?)
    } else {
        None
    };
    Ok(Slice {
        id: m.slice_id,
        config: m.config,
        topics,
        corpus,
        triples,
        graph,
        embeddings_init,
        embeddings,
        coords2,
        coords3,
        timing: m.timing,
        revision: m.revision,
    })
}

/// Shallowest topic depth among the records that produced each node.
pub fn node_depths(slice: &Slice) -> Vec<Option<u32>> {
    let mut out = vec![None; slice.graph.node_count()];
    for t in &slice.triples {
        let records = if t.source.file == QUESTIONS_FILE { &slice.corpus.questions } else { &slice.corpus.statements };
        let Some(rec) = records.get(t.source.record) else { continue };
        let d = rec.path.len().saturating_sub(1) as u32;
        for label in [&t.head, &t.tail] {
            if let Some(v) = slice.graph.node_id(label) {
                let slot = &mut out[v as usize];
                *slot = Some(slot.map_or(d, |x: u32| x.min(d)));
            }
        }
    }
    out
}

/// Listing entry for a stored slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub id: String,
    pub revision: Option<u64>,
    pub domain: Option<String>,
    pub created: Option<String>,
    pub stats: Option<SliceStats>,
    pub has_3d: bool,
    pub corrupt: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `root/<id>/rev-<n>/` directories, with `root/<id>/CURRENT` naming the
/// published one. Publishing writes a fresh revision directory and then
/// swaps `CURRENT` by rename.
#[derive(Debug, Clone)]
pub struct SliceStore {
    root: PathBuf,
}

impl SliceStore {
    pub fn open(root: &Path) -> Result<Self, SliceError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn valid_id(id: &str) -> bool {
        !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    }

    pub fn ids(&self) -> Result<Vec<String>, SliceError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(|e| io_err(&self.root, e))? {
            let entry = entry.map_err(|e| io_err(&self.root, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if Self::valid_id(&name) && entry.path().join(CURRENT_FILE).is_file() {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn current_revision(&self, id: &str) -> Result<u64, SliceError> {
        if !Self::valid_id(id) {
            return Err(SliceError::UnknownSlice(id.to_string()));
        }
        let p = self.root.join(id).join(CURRENT_FILE);
        let text = fs::read_to_string(&p).map_err(|_| SliceError::UnknownSlice(id.to_string()))?;
        text.trim()
            .strip_prefix("rev-")
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| SliceError::BadManifest(format!("bad CURRENT pointer for {id}")))
    }

    pub fn current_dir(&self, id: &str) -> Result<PathBuf, SliceError> {
        let rev = self.current_revision(id)?;
        Ok(self.revision_dir(id, rev))
    }

    pub fn revision_dir(&self, id: &str, revision: u64) -> PathBuf {
        self.root.join(id).join(format!("rev-{revision}"))
    }

    pub fn load(&self, id: &str) -> Result<Slice, SliceError> {
        load_slice(&self.current_dir(id)?)
    }

    pub fn manifest(&self, id: &str) -> Result<SliceManifest, SliceError> {
        read_manifest(&self.current_dir(id)?)
    }

    /// Next revision number and a clean directory for it.
    pub fn prepare(&self, id: &str, base_revision: u64) -> Result<(PathBuf, u64), SliceError> {
        if !Self::valid_id(id) {
            return Err(SliceError::UnknownSlice(id.to_string()));
        }
        let on_disk = self.current_revision(id).unwrap_or(0);
        let rev = on_disk.max(base_revision) + 1;
        let dir = self.revision_dir(id, rev);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
        Ok((dir, rev))
    }

    /// Points `CURRENT` at `revision`.
    pub fn commit(&self, id: &str, revision: u64) -> Result<(), SliceError> {
        let base = self.root.join(id);
        let tmp = base.join(format!("{CURRENT_FILE}.tmp"));
        fs::write(&tmp, format!("rev-{revision}\n")).map_err(|e| io_err(&tmp, e))?;
        let dst = base.join(CURRENT_FILE);
        fs::rename(&tmp, &dst).map_err(|e| io_err(&dst, e))
    }

    /// Writes `slice` as a new revision and publishes it.
    pub fn publish(&self, slice: &mut Slice) -> Result<SliceManifest, SliceError> {
        let (dir, rev) = self.prepare(&slice.id, slice.revision)?;
        slice.revision = rev - 1;
        let m = write_slice(&dir, slice)?;
        self.commit(&slice.id, m.revision)?;
        Ok(m)
    }

    pub fn summaries(&self) -> Result<Vec<SliceSummary>, SliceError> {
        let mut out = Vec::new();
        for id in self.ids()? {
            let checked = self.current_dir(&id).and_then(|d| verify_slice(&d));
            out.push(match checked {
                Ok((m, _)) => SliceSummary {
                    id,
                    revision: Some(m.revision),
                    has_3d: m.has_3d(),
                    domain: Some(m.domain),
                    created: Some(m.created),
                    stats: Some(m.stats),
                    corrupt: false,
                    error: None,
                },
                Err(e) => SliceSummary {
                    id,
                    revision: None,
                    domain: None,
                    created: None,
                    stats: None,
                    has_3d: false,
                    corrupt: true,
                    error: Some(e.to_string()),
                },
            });
        }
        Ok(out)
    }
}

/// Union of slice graphs keyed by phrase. `provenance[i]` maps slice id to
/// the multiplicity it contributed to `graph.edges()[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedGraph {
    pub graph: RelGraph,
    pub provenance: Vec<BTreeMap<String, u32>>,
}

type EdgeKey = (String, String, RelationType, String);

impl UnifiedGraph {
    pub fn from_graph(slice_id: &str, graph: &RelGraph) -> Self {
        let provenance = graph
            .edges()
            .iter()
            .map(|e| BTreeMap::from([(slice_id.to_string(), e.multiplicity)]))
            .collect();
        Self { graph: graph.clone(), provenance }
    }

    fn keyed(&self) -> impl Iterator<Item = (EdgeKey, &BTreeMap<String, u32>)> {
        self.graph.edges().iter().zip(&self.provenance).map(|(e, p)| {
            (
                (self.graph.label(e.head).to_string(), self.graph.label(e.tail).to_string(), e.relation, e.domain.clone()),
                p,
            )
        })
    }

    /// Node and edge multisets, for order-insensitive comparison.
    pub fn canonical(&self) -> (Vec<String>, Vec<(EdgeKey, u32, BTreeMap<String, u32>)>) {
        let mut nodes = self.graph.labels().to_vec();
        nodes.sort();
        let mut edges: Vec<_> = self
            .graph
            .edges()
            .iter()
            .zip(self.keyed())
            .map(|(e, (k, p))| (k, e.multiplicity, p.clone()))
            .collect();
        edges.sort();
        (nodes, edges)
    }
}

/// Merges the parts in order. Edges with the same (head, tail, relation,
/// domain) combine their multiplicities; differing relations between the same
/// pair stay separate edges.
pub fn unify(parts: &[UnifiedGraph]) -> UnifiedGraph {
    let mut graph = RelGraph::new();
    let mut prov: BTreeMap<EdgeKey, BTreeMap<String, u32>> = BTreeMap::new();
    for part in parts {
        for (e, (key, p)) in part.graph.edges().iter().zip(part.keyed()) {
            graph.add(&key.0, &key.1, key.2, &key.3, e.multiplicity);
            let slot = prov.entry(key).or_default();
            for (s, m) in p {
                *slot.entry(s.clone()).or_default() += m;
            }
        }
    }
    let provenance = graph
        .edges()
        .iter()
        .map(|e| {
            let k = (graph.label(e.head).to_string(), graph.label(e.tail).to_string(), e.relation, e.domain.clone());
            prov.remove(&k).unwrap_or_default()
        })
        .collect();
    UnifiedGraph { graph, provenance }
}

pub fn unify_slices(slices: &[&Slice]) -> UnifiedGraph {
    let parts: Vec<UnifiedGraph> = slices.iter().map(|s| UnifiedGraph::from_graph(&s.id, &s.graph)).collect();
    unify(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(id: &str, edges: &[(&str, &str, RelationType)]) -> UnifiedGraph {
        UnifiedGraph::from_graph(id, &RelGraph::from_edges(edges.iter().map(|(a, b, r)| (*a, *b, *r, id, 1))))
    }

    #[test]
    fn single_part_is_identity() {
        let a = g("a", &[("x", "y", RelationType::Causes), ("y", "z", RelationType::Reduces)]);
        assert_eq!(unify(std::slice::from_ref(&a)), a);
    }

    #[test]
    fn disjoint_parts_add_up() {
        let a = g("a", &[("x", "y", RelationType::Causes)]);
        let b = g("b", &[("p", "q", RelationType::Causes), ("q", "r", RelationType::Causes)]);
        let u = unify(&[a, b]);
        assert_eq!(u.graph.node_count(), 5);
        assert_eq!(u.graph.edge_count(), 3);
    }

    #[test]
    fn shared_phrase_merges_and_keeps_conflicts() {
        let a = g("econ", &[("inflation", "interest rates", RelationType::Increases)]);
        let b = g("policy", &[("inflation", "interest rates", RelationType::Reduces), ("wages", "inflation", RelationType::Causes)]);
        let u = unify(&[a, b]);
        assert_eq!(u.graph.node_count(), 3);
        assert_eq!(u.graph.edge_count(), 3);
        let infl = u.graph.node_id("inflation").unwrap();
        assert_eq!(u.graph.in_edges(infl).count() + u.graph.out_edges(infl).count(), 3);
        let domains: Vec<&str> = u.graph.edges().iter().map(|e| e.domain.as_str()).collect();
        assert_eq!(domains, ["econ", "policy", "policy"]);
        assert_eq!(u.provenance[1], BTreeMap::from([("policy".to_string(), 1)]));
    }

    #[test]
    fn same_edge_from_two_slices_tracks_both() {
        let mk = |id: &str| {
            UnifiedGraph::from_graph(id, &RelGraph::from_edges([("a", "b", RelationType::Causes, "shared", 2)]))
        };
        let u = unify(&[mk("s1"), mk("s2")]);
        assert_eq!(u.graph.edges()[0].multiplicity, 4);
        assert_eq!(u.provenance[0], BTreeMap::from([("s1".to_string(), 2), ("s2".to_string(), 2)]));
    }

    #[test]
    fn associative_on_multisets() {
        let a = g("a", &[("x", "y", RelationType::Causes), ("y", "w", RelationType::Affects)]);
        let b = g("b", &[("y", "z", RelationType::Causes), ("x", "y", RelationType::Causes)]);
        let c = g("c", &[("z", "x", RelationType::Reduces), ("w", "v", RelationType::Causes)]);
        let left = unify(&[unify(&[a.clone(), b.clone()]), c.clone()]);
        let right = unify(&[a, unify(&[b, c])]);
        assert_eq!(left.canonical(), right.canonical());
    }

    #[test]
    fn incomplete_and_unknown_version() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_slice(dir.path()), Err(SliceError::IncompleteSlice { .. })));
        fs::write(dir.path().join(MANIFEST_FILE), "{\"format_version\": 99}").unwrap();
        assert!(matches!(load_slice(dir.path()), Err(SliceError::UnknownFormatVersion(99))));
    }
}
