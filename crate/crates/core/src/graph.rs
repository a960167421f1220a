//! Multi-relational directed graph over normalized phrases.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{RelationType, Triple};
use crate::jsonl::RecordError;

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub head: NodeId,
    pub tail: NodeId,
    pub relation: RelationType,
    pub domain: String,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TwoSimplex {
    pub nodes: [NodeId; 3],
    pub domain: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TriangleMode {
    /// u→v→w with both edges in one domain; ordered chains.
    #[default]
    ChainSameDomain,
    /// Directed 3-cycles, stored once per node set.
    Cycle,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("hops must be positive")]
    ZeroHops,
    #[error("malformed edge list at line {line}: {message}")]
    MalformedEdge { line: usize, message: String },
    #[error(transparent)]
    Record(#[from] RecordError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelGraph {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    edges: Vec<Edge>,
    edge_index: HashMap<(NodeId, NodeId, RelationType, String), usize>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    self_loops: u64,
}

/// Undirected simple-graph view; neighbor lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedView {
    pub adj: Vec<Vec<NodeId>>,
}

impl UndirectedView {
    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj.get(u as usize).is_some_and(|n| n.binary_search(&v).is_ok())
    }

    /// BFS hop distances from `src`; `None` where unreachable.
    pub fn bfs(&self, src: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.adj.len()];
        let mut q = VecDeque::new();
        dist[src as usize] = Some(0);
        q.push_back(src);
        while let Some(u) = q.pop_front() {
            let d = dist[u as usize].unwrap_or(0);
            for &v in &self.adj[u as usize] {
                if dist[v as usize].is_none() {
                    dist[v as usize] = Some(d + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub avg_degree: f64,
    pub max_degree: usize,
    /// degree -> node count
    pub degree_hist: BTreeMap<usize, usize>,
    pub in_hist: BTreeMap<usize, usize>,
    pub out_hist: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub count: usize,
    /// (nodes, undirected edges) per component, indexed by component id.
    pub sizes: Vec<(usize, usize)>,
    pub largest: Option<usize>,
    /// Component id per node.
    pub membership: Vec<usize>,
}

impl ComponentReport {
    pub fn largest_nodes(&self) -> Vec<NodeId> {
        let Some(l) = self.largest else { return Vec::new() };
        (0..self.membership.len() as NodeId).filter(|&v| self.membership[v as usize] == l).collect()
    }
}

/// Induced subgraph; ids refer to the parent graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EgoGraph {
    pub center: NodeId,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubEdge {
    pub head: String,
    pub relation: RelationType,
    pub tail: String,
    pub multiplicity: u32,
    pub weight: f64,
}

impl RelGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn build(triples: &[Triple]) -> Self {
        let mut g = Self::new();
        for t in triples {
            g.add(&t.head, &t.tail, t.relation, &t.domain, 1);
        }
        g
    }

    pub fn from_edges<'a, I>(edges: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, RelationType, &'a str, u32)>,
    {
        let mut g = Self::new();
        for (h, t, r, d, m) in edges {
            g.add(h, t, r, d, m);
        }
        g
    }

    fn intern(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as NodeId;
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        id
    }

    /// Adds `multiplicity` copies of one edge. Self-loops are counted and dropped;
    /// their endpoint is still not added as a node.
    pub fn add(&mut self, head: &str, tail: &str, relation: RelationType, domain: &str, multiplicity: u32) {
        if multiplicity == 0 {
            return;
        }
        if head == tail {
            self.self_loops += multiplicity as u64;
            return;
        }
        let h = self.intern(head);
        let t = self.intern(tail);
        let key = (h, t, relation, domain.to_string());
        if let Some(&e) = self.edge_index.get(&key) {
            self.edges[e].multiplicity += multiplicity;
            return;
        }
        let e = self.edges.len();
        self.edges.push(Edge { head: h, tail: t, relation, domain: domain.to_string(), multiplicity });
        self.edge_index.insert(key, e);
        self.out_adj[h as usize].push(e);
        self.in_adj[t as usize].push(e);
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id as usize]
    }

    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, v: NodeId) -> impl Iterator<Item = &Edge> {
        self.out_adj[v as usize].iter().map(|&e| &self.edges[e])
    }

    pub fn in_edges(&self, v: NodeId) -> impl Iterator<Item = &Edge> {
        self.in_adj[v as usize].iter().map(|&e| &self.edges[e])
    }

    pub fn self_loops_dropped(&self) -> u64 {
        self.self_loops
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.edges.iter().map(|e| e.multiplicity as u64).sum()
    }

    /// Distinct domain labels in first-seen order.
    pub fn domains(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for e in &self.edges {
            if seen.insert(e.domain.as_str()) {
                out.push(e.domain.clone());
            }
        }
        out
    }

    /// Majority domain over incident edges (weighted by multiplicity); ties go
    /// to the lexicographically smaller label.
    pub fn node_domain(&self, v: NodeId) -> Option<String> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for e in self.out_edges(v).chain(self.in_edges(v)) {
            *counts.entry(e.domain.as_str()).or_default() += e.multiplicity as u64;
        }
        let max = counts.values().copied().max()?;
        counts.into_iter().find(|(_, c)| *c == max).map(|(d, _)| d.to_string())
    }

    pub fn symmetrize(&self) -> UndirectedView {
        let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); self.node_count()];
        for e in &self.edges {
            adj[e.head as usize].push(e.tail);
            adj[e.tail as usize].push(e.head);
        }
        for n in &mut adj {
            n.sort_unstable();
            n.dedup();
        }
        UndirectedView { adj }
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.symmetrize().adj.iter().map(Vec::len).collect()
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let view = self.symmetrize();
        let n = self.node_count();
        let mut degree_hist = BTreeMap::new();
        let mut in_hist = BTreeMap::new();
        let mut out_hist = BTreeMap::new();
        let mut max_degree = 0;
        for v in 0..n {
            let d = view.adj[v].len();
            max_degree = max_degree.max(d);
            *degree_hist.entry(d).or_insert(0) += 1;
            *in_hist.entry(self.in_adj[v].len()).or_insert(0) += 1;
            *out_hist.entry(self.out_adj[v].len()).or_insert(0) += 1;
        }
        let avg_degree = if n == 0 { 0.0 } else { 2.0 * view.edge_count() as f64 / n as f64 };
        DegreeStats { avg_degree, max_degree, degree_hist, in_hist, out_hist }
    }

    pub fn components(&self) -> ComponentReport {
        let view = self.symmetrize();
        let n = self.node_count();
        let mut membership = vec![usize::MAX; n];
        let mut sizes = Vec::new();
        for s in 0..n {
            if membership[s] != usize::MAX {
                continue;
            }
            let c = sizes.len();
            let mut stack = vec![s];
            membership[s] = c;
            let (mut nodes, mut deg) = (0, 0);
            while let Some(u) = stack.pop() {
                nodes += 1;
                deg += view.adj[u].len();
                for &v in &view.adj[u] {
                    if membership[v as usize] == usize::MAX {
                        membership[v as usize] = c;
                        stack.push(v as usize);
                    }
                }
            }
            sizes.push((nodes, deg / 2));
        }
        // First component among those with the most nodes.
        let largest = sizes
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, usize)>, (i, &(nodes, _))| match best {
                Some((_, bn)) if bn >= nodes => best,
                _ => Some((i, nodes)),
            })
            .map(|(i, _)| i);
        ComponentReport { count: sizes.len(), sizes, largest, membership }
    }

    /// Subgraph induced by the largest component, with fresh ids.
    pub fn largest_component(&self) -> RelGraph {
        let keep: BTreeSet<NodeId> = self.components().largest_nodes().into_iter().collect();
        self.induced(&keep)
    }

    /// Subgraph induced by `keep`, re-indexed in ascending parent-id order.
    pub fn induced(&self, keep: &BTreeSet<NodeId>) -> RelGraph {
        let mut g = RelGraph::new();
        for &v in keep {
            g.intern(self.label(v));
        }
        for e in &self.edges {
            if keep.contains(&e.head) && keep.contains(&e.tail) {
                g.add(self.label(e.head), self.label(e.tail), e.relation, &e.domain, e.multiplicity);
            }
        }
        g
    }

    pub fn detect_triangles(&self, mode: TriangleMode) -> Vec<TwoSimplex> {
        let mut out = BTreeSet::new();
        match mode {
            TriangleMode::ChainSameDomain => {
                for e1 in &self.edges {
                    for e2 in self.out_edges(e1.tail) {
                        if e2.domain == e1.domain && e2.tail != e1.head {
                            out.insert(TwoSimplex { nodes: [e1.head, e1.tail, e2.tail], domain: e1.domain.clone() });
                        }
                    }
                }
            }
            TriangleMode::Cycle => {
                let succ: Vec<BTreeSet<NodeId>> = self
                    .out_adj
                    .iter()
                    .map(|es| es.iter().map(|&e| self.edges[e].tail).collect())
                    .collect();
                let mut seen = BTreeSet::new();
                for u in 0..self.node_count() as NodeId {
                    for &v in &succ[u as usize] {
                        for &w in &succ[v as usize] {
                            if w != u && succ[w as usize].contains(&u) {
                                let mut key = [u, v, w];
                                key.sort_unstable();
                                if seen.insert(key) {
                                    let domain = self.cycle_domain(&[(u, v), (v, w), (w, u)]);
                                    out.insert(TwoSimplex { nodes: key, domain });
                                }
                            }
                        }
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    fn cycle_domain(&self, pairs: &[(NodeId, NodeId)]) -> String {
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for &(a, b) in pairs {
            for e in self.out_edges(a).filter(|e| e.tail == b) {
                *counts.entry(e.domain.as_str()).or_default() += 1;
            }
        }
        let max = counts.values().copied().max().unwrap_or(0);
        counts.into_iter().find(|(_, c)| *c == max).map(|(d, _)| d.to_string()).unwrap_or_default()
    }

    pub fn ego_graph(&self, center: NodeId, hops: u32) -> Result<EgoGraph, GraphError> {
        if hops == 0 {
            return Err(GraphError::ZeroHops);
        }
        if center as usize >= self.node_count() {
            return Err(GraphError::UnknownNode(center.to_string()));
        }
        let dist = self.symmetrize().bfs(center);
        let nodes: Vec<NodeId> = (0..self.node_count() as NodeId)
            .filter(|&v| dist[v as usize].is_some_and(|d| d <= hops))
            .collect();
        let inside: BTreeSet<NodeId> = nodes.iter().copied().collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| inside.contains(&e.head) && inside.contains(&e.tail))
            .cloned()
            .collect();
        Ok(EgoGraph { center, nodes, edges })
    }

    /// The `top_k` highest-multiplicity edges whose endpoints are both among
    /// the `hubs` highest-degree nodes. Display only; weight is fixed at 1.0.
    pub fn hub_edges(&self, hubs: usize, top_k: usize) -> Vec<HubEdge> {
        let deg = self.degrees();
        let mut order: Vec<NodeId> = (0..self.node_count() as NodeId).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(deg[v as usize]), v));
        let hub_set: BTreeSet<NodeId> = order.into_iter().take(hubs).collect();
        let mut es: Vec<&Edge> =
            self.edges.iter().filter(|e| hub_set.contains(&e.head) && hub_set.contains(&e.tail)).collect();
        es.sort_by_key(|e| (std::cmp::Reverse(e.multiplicity), e.head, e.tail, e.relation));
        es.into_iter()
            .take(top_k)
            .map(|e| HubEdge {
                head: self.label(e.head).to_string(),
                relation: e.relation,
                tail: self.label(e.tail).to_string(),
                multiplicity: e.multiplicity,
                weight: 1.0,
            })
            .collect()
    }

    /// Tab-separated `head relation tail domain multiplicity`, with a header.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::from("head\trelation\ttail\tdomain\tmultiplicity\n");
        for e in &self.edges {
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", self.label(e.head), e.relation, self.label(e.tail), e.domain, e.multiplicity);
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut g = RelGraph::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.starts_with("head\t") || line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| GraphError::MalformedEdge { line: i + 1, message };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(bad(format!("expected 5 fields, got {}", f.len())));
            }
            let rel = f[1].parse::<RelationType>().map_err(bad)?;
            let m = f[4].parse::<u32>().map_err(|e| bad(e.to_string()))?;
            g.add(f[0], f[2], rel, f[3], m);
        }
        Ok(g)
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<(), GraphError> {
        fs::write(path, self.to_edge_list()).map_err(|e| RecordError::io(path, e).into())
    }

    pub fn read_edge_list(path: &Path) -> Result<Self, GraphError> {
        let text = fs::read_to_string(path).map_err(|e| GraphError::from(RecordError::io(path, e)))?;
        Self::parse_edge_list(&text)
    }
}
