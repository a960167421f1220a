//! Topic graph: breadth-first expansion of root topics into a deduplicated
//! topic tree with depth and path bookkeeping.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, RecordError};
use crate::oracle::{render_prompt, Budget, Oracle, OracleError, PromptTemplate, TemplateKind};

pub type TopicId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicNode {
    pub id: TopicId,
    pub label: String,
    #[serde(skip)]
    pub normalized_label: String,
    pub depth: u32,
    pub parent_id: Option<TopicId>,
    pub path: Vec<String>,
    /// Set once the node has been sent to the oracle for subtopics.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub expanded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicGraph {
    pub nodes: Vec<TopicNode>,
    pub depth_limit: u32,
    pub max_topics: usize,
    index: HashMap<String, TopicId>,
}

/// Counters gathered while expanding.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionStats {
    pub duplicate_proposals: u64,
    pub skipped_lines: u64,
    pub oracle_calls: u64,
    /// Node ids in the order they were expanded.
    pub expansion_order: Vec<TopicId>,
}

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("at least one root topic is required")]
    NoRoots,
    #[error("max_topics ({max}) is smaller than the number of roots ({roots})")]
    CapBelowRoots { max: usize, roots: usize },
    #[error("oracle failed while expanding topic {topic}: {source}")]
    Oracle {
        topic: TopicId,
        source: OracleError,
        partial: Box<TopicGraph>,
        stats: ExpansionStats,
    },
    #[error(transparent)]
    Record(#[from] RecordError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicConfig {
    pub depth_limit: u32,
    pub max_topics: usize,
    pub per_node_children: usize,
    pub domain_phrase: String,
}

impl Default for TopicConfig {
    fn default() -> Self {
        Self {
            depth_limit: 2,
            max_topics: 100,
            per_node_children: 10,
            domain_phrase: "macroeconomics and financial markets".into(),
        }
    }
}

/// Lowercase, whitespace-collapsed, trailing punctuation removed.
pub fn normalize_label(label: &str) -> String {
    let collapsed = label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_end_matches(|c: char| c.is_ascii_punctuation() && c != ')' && c != ']')
        .trim_end()
        .to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedList {
    pub labels: Vec<String>,
    pub skipped: usize,
}

/// Strips "N.", "N)" and "N -" enumerators. Bare lines are kept; lines that
/// are empty once the enumerator is removed, and code fences, are skipped.
pub fn parse_numbered_list(text: &str) -> ParsedList {
    let mut out = ParsedList::default();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("```") {
            out.skipped += 1;
            continue;
        }
        let body = strip_enumerator(line).trim();
        if body.is_empty() {
            out.skipped += 1;
            continue;
        }
        out.labels.push(body.to_string());
    }
    out
}

fn strip_enumerator(line: &str) -> &str {
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return line;
    }
    let rest = &line[digits..];
    for sep in [".", ")"] {
        if let Some(after) = rest.strip_prefix(sep) {
            if after.is_empty() || after.starts_with(char::is_whitespace) {
                return after;
            }
        }
    }
    let trimmed = rest.trim_start();
    if trimmed.len() < rest.len() || rest.is_empty() {
        if let Some(after) = trimmed.strip_prefix('-') {
            if after.is_empty() || after.starts_with(char::is_whitespace) {
                return after;
            }
        }
    }
    line
}

impl TopicGraph {
    pub fn new(depth_limit: u32, max_topics: usize) -> Self {
        Self { nodes: Vec::new(), depth_limit, max_topics, index: HashMap::new() }
    }

    fn from_nodes(nodes: Vec<TopicNode>, depth_limit: u32, max_topics: usize) -> Self {
        let mut g = Self::new(depth_limit, max_topics);
        for mut n in nodes {
            n.normalized_label = normalize_label(&n.label);
            g.index.insert(n.normalized_label.clone(), n.id);
            g.nodes.push(n);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: TopicId) -> Option<&TopicNode> {
        self.nodes.get(id as usize)
    }

    pub fn find(&self, label: &str) -> Option<&TopicNode> {
        self.index.get(&normalize_label(label)).and_then(|&id| self.node(id))
    }

    /// Parent→child pairs in child id order.
    pub fn edges(&self) -> Vec<(TopicId, TopicId)> {
        self.nodes.iter().filter_map(|n| n.parent_id.map(|p| (p, n.id))).collect()
    }

    pub fn children(&self, id: TopicId) -> impl Iterator<Item = &TopicNode> {
        self.nodes.iter().filter(move |n| n.parent_id == Some(id))
    }

    pub fn is_full(&self) -> bool {
        self.nodes.len() >= self.max_topics
    }

    /// Adds a node unless its normalized label is taken. Returns the new id.
    pub fn insert(&mut self, label: &str, parent: Option<TopicId>) -> Option<TopicId> {
        let label = label.trim();
        let norm = normalize_label(label);
        if norm.is_empty() || self.index.contains_key(&norm) {
            return None;
        }
        let id = self.nodes.len() as TopicId;
        let (depth, mut path) = match parent.and_then(|p| self.node(p)) {
            Some(p) => (p.depth + 1, p.path.clone()),
            None => (0, Vec::new()),
        };
        path.push(label.to_string());
        self.index.insert(norm.clone(), id);
        self.nodes.push(TopicNode {
            id,
            label: label.to_string(),
            normalized_label: norm,
            depth,
            parent_id: parent,
            path,
            expanded: false,
        });
        Some(id)
    }

    /// Checks every structural invariant; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.nodes.len() > self.max_topics {
            return Err(format!("{} nodes exceed cap {}", self.nodes.len(), self.max_topics));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id as usize != i {
                return Err(format!("node at index {i} has id {}", n.id));
            }
            if !seen.insert(n.normalized_label.as_str()) {
                return Err(format!("duplicate normalized label {:?}", n.normalized_label));
            }
            if n.path.len() != n.depth as usize + 1 || n.path.last() != Some(&n.label) {
                return Err(format!("bad path on node {}", n.id));
            }
            match n.parent_id {
                None if n.depth != 0 => return Err(format!("root {} has depth {}", n.id, n.depth)),
                Some(p) => {
                    // Parents always precede children, which also rules out cycles.
                    let parent = self
                        .node(p)
                        .filter(|_| p < n.id)
                        .ok_or_else(|| format!("node {} has invalid parent {p}", n.id))?;
                    if parent.depth + 1 != n.depth {
                        return Err(format!("node {} depth mismatch", n.id));
                    }
                    if n.path[..n.path.len() - 1] != parent.path[..] {
                        return Err(format!("node {} path does not extend parent", n.id));
                    }
                }
                None => {}
            }
        }
        Ok(())
    }

    pub fn persist(&self, jsonl_path: &Path, list_path: &Path) -> Result<(), RecordError> {
        jsonl::write(jsonl_path, &self.nodes)?;
        fs::write(list_path, self.topic_list()).map_err(|e| RecordError::io(list_path, e))
    }

    /// Tab-separated depth and label, one topic per line.
    pub fn topic_list(&self) -> String {
        let mut s = String::new();
        for n in &self.nodes {
            let _ = writeln!(s, "{}\t{}", n.depth, n.label);
        }
        s
    }

    pub fn load(jsonl_path: &Path, depth_limit: u32, max_topics: usize) -> Result<Self, RecordError> {
        let nodes: Vec<TopicNode> = jsonl::read(jsonl_path)?;
        Ok(Self::from_nodes(nodes, depth_limit, max_topics))
    }

    pub fn parse_records(text: &str, depth_limit: u32, max_topics: usize) -> Result<Self, RecordError> {
        Ok(Self::from_nodes(jsonl::parse(text)?, depth_limit, max_topics))
    }
}

/// Asks the oracle for subtopics of one node and inserts the new ones.
/// Returns the ids of inserted children.
pub fn expand_node(
    graph: &mut TopicGraph,
    id: TopicId,
    response: &str,
    per_node_children: usize,
    stats: &mut ExpansionStats,
) -> Vec<TopicId> {
    let parsed = parse_numbered_list(response);
    stats.skipped_lines += parsed.skipped as u64;
    let mut added = Vec::new();
    for label in parsed.labels.iter().take(per_node_children) {
        if graph.is_full() {
            break;
        }
        match graph.insert(label, Some(id)) {
            Some(child) => added.push(child),
            None => stats.duplicate_proposals += 1,
        }
    }
    if let Some(n) = graph.nodes.get_mut(id as usize) {
        n.expanded = true;
    }
    stats.expansion_order.push(id);
    added
}

pub fn expansion_prompt(node: &TopicNode, cfg: &TopicConfig) -> Result<String, OracleError> {
    let template = PromptTemplate::new(TemplateKind::TopicExpansion, cfg.domain_phrase.clone());
    render_prompt(&template, &node.label, &cfg.domain_phrase, cfg.per_node_children)
}

/// Breadth-first expansion. Nodes are expanded in FIFO order; up to
/// `oracle.parallelism` consecutive queue entries are queried concurrently and
/// merged in queue order, so the result does not depend on completion order.
pub fn expand_bfs(
    roots: &[String],
    cfg: &TopicConfig,
    oracle: &Oracle,
    budget: Option<&Budget>,
) -> Result<(TopicGraph, ExpansionStats), TopicError> {
    if roots.iter().all(|r| r.trim().is_empty()) {
        return Err(TopicError::NoRoots);
    }
    if cfg.max_topics < roots.len() {
        return Err(TopicError::CapBelowRoots { max: cfg.max_topics, roots: roots.len() });
    }
    let mut graph = TopicGraph::new(cfg.depth_limit, cfg.max_topics);
    let mut stats = ExpansionStats::default();
    let mut queue: VecDeque<TopicId> = VecDeque::new();
    for r in roots {
        match graph.insert(r, None) {
            Some(id) => queue.push_back(id),
            None => stats.duplicate_proposals += 1,
        }
    }
    let width = oracle.config().parallelism.max(1);
    'outer: while !queue.is_empty() && !graph.is_full() {
        let mut chunk = Vec::with_capacity(width);
        while chunk.len() < width {
            let Some(id) = queue.pop_front() else { break };
            if graph.nodes[id as usize].depth < cfg.depth_limit {
                chunk.push(id);
            }
        }
        if chunk.is_empty() {
            continue;
        }
        let prompts = chunk
            .iter()
            .map(|&id| expansion_prompt(&graph.nodes[id as usize], cfg))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| TopicError::Oracle {
                topic: chunk[0],
                source,
                partial: Box::new(graph.clone()),
                stats: stats.clone(),
            })?;
        let responses = oracle.generate_many(&prompts, budget);
        stats.oracle_calls += responses.len() as u64;
        for (&id, resp) in chunk.iter().zip(responses) {
            if graph.is_full() {
                break 'outer;
            }
            match resp {
                Ok(text) => {
                    let added = expand_node(&mut graph, id, &text, cfg.per_node_children, &mut stats);
                    queue.extend(added);
                }
                Err(source) => {
                    return Err(TopicError::Oracle {
                        topic: id,
                        source,
                        partial: Box::new(graph),
                        stats,
                    })
                }
            }
        }
    }
    Ok((graph, stats))
}

/// Like [`expand_bfs`], but writes whatever was built before an oracle failure.
pub fn expand_bfs_persisting(
    roots: &[String],
    cfg: &TopicConfig,
    oracle: &Oracle,
    jsonl_path: &Path,
    list_path: &Path,
) -> Result<(TopicGraph, ExpansionStats), TopicError> {
    match expand_bfs(roots, cfg, oracle, None) {
        Ok(done) => Ok(done),
        Err(TopicError::Oracle { topic, source, partial, stats }) => {
            partial.persist(jsonl_path, list_path)?;
            Err(TopicError::Oracle { topic, source, partial, stats })
        }
        Err(e) => Err(e),
    }
}
