//! Budgeted active exploration: score frontier topics, pick a batch, deepen
//! it under a depth-aware call policy, rebuild, repeat.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{first_question, parse_questions, parse_statements, question_prompt, statement_prompt, CausalRecord, Corpus};
use crate::extract::{extract_corpus, normalize_phrase, Triple};
use crate::graph::{NodeId, RelGraph};
use crate::manifold::{Coords, ManifoldError};
use crate::oracle::{Budget, Oracle, OracleError, TemplateKind};
use crate::pipeline::build_manifold;
use crate::rng::{derive_seed, rng_for};
use crate::slice::Slice;
use crate::topics::{expand_node, expansion_prompt, ExpansionStats, TopicConfig, TopicGraph, TopicId};

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("invalid explorer config: {0}")]
    InvalidConfig(String),
    #[error("oracle failed on topic {topic}: {source}")]
    Oracle { topic: TopicId, source: OracleError },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

/// Coefficients of U(t) = w1·e^(−α·depth) + w2·deg + w3·triples + w4·novelty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub alpha: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self { w1: 1.0, w2: 0.5, w3: 0.5, w4: 1.0, alpha: 0.5 }
    }
}

impl UtilityWeights {
    pub fn validate(&self) -> Result<(), ExploreError> {
        let all = [self.w1, self.w2, self.w3, self.w4, self.alpha];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(ExploreError::InvalidConfig("weights and alpha must be finite and non-negative".into()));
        }
        if all[..4].iter().all(|&x| x == 0.0) {
            return Err(ExploreError::InvalidConfig("at least one weight must be positive".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { w1: self.w1 * c, w2: self.w2 * c, w3: self.w3 * c, w4: self.w4 * c, alpha: self.alpha }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    #[default]
    TopK,
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallQuota {
    pub question_calls: usize,
    pub statement_calls: usize,
}

/// Q&A calls per deepened topic: `full` up to `full_depth`, `reduced` below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthPolicy {
    pub full_depth: u32,
    pub full: CallQuota,
    pub reduced: CallQuota,
    /// Items requested per call.
    pub items_per_call: usize,
}

impl Default for DepthPolicy {
    fn default() -> Self {
        Self {
            full_depth: 2,
            full: CallQuota { question_calls: 1, statement_calls: 2 },
            reduced: CallQuota { question_calls: 0, statement_calls: 1 },
            items_per_call: 3,
        }
    }
}

impl DepthPolicy {
    pub fn quota(&self, depth: u32) -> CallQuota {
        if depth <= self.full_depth {
            self.full
        } else {
            self.reduced
        }
    }

    /// Oracle calls needed to deepen one topic.
    pub fn calls_for(&self, depth: u32, expand: bool) -> u64 {
        let q = self.quota(depth);
        (expand as u64) + q.question_calls as u64 + q.statement_calls as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorerConfig {
    pub weights: UtilityWeights,
    pub mode: SelectionMode,
    pub batch_size: usize,
    pub budget_per_wave: u64,
    pub waves: usize,
    pub policy: DepthPolicy,
    /// Topics at this depth are never expanded.
    pub max_depth: u32,
    pub max_topics: usize,
    pub novelty_k: usize,
    pub boost_factor: f64,
    /// Boost radius as a percentile of pairwise manifold distances.
    pub boost_percentile: f64,
    pub seed: u64,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            weights: UtilityWeights::default(),
            mode: SelectionMode::TopK,
            batch_size: 4,
            budget_per_wave: 20,
            waves: 3,
            policy: DepthPolicy::default(),
            max_depth: 5,
            max_topics: 1000,
            novelty_k: 10,
            boost_factor: 5.0,
            boost_percentile: 10.0,
            seed: 0,
        }
    }
}

impl ExplorerConfig {
    pub fn validate(&self) -> Result<(), ExploreError> {
        self.weights.validate()?;
        let bad = |m: &str| Err(ExploreError::InvalidConfig(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.novelty_k == 0 {
            return bad("novelty_k must be at least 1");
        }
        if !(self.boost_factor.is_finite() && self.boost_factor >= 0.0) {
            return bad("boost_factor must be finite and non-negative");
        }
        if !(0.0..=100.0).contains(&self.boost_percentile) {
            return bad("boost_percentile must lie in [0, 100]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierEntry {
    pub topic: TopicId,
    pub depth: u32,
    pub degree: f64,
    pub triple_count: f64,
    pub novelty: f64,
}

pub fn utility(e: &FrontierEntry, w: &UtilityWeights) -> f64 {
    w.w1 * (-w.alpha * e.depth as f64).exp() + w.w2 * e.degree + w.w3 * e.triple_count + w.w4 * e.novelty
}

fn dist(c: &Coords, i: usize, j: usize) -> f64 {
    c.row(i).iter().zip(c.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Mean distance from row `node` to its `k` nearest other rows. Larger means
/// sparser surroundings.
pub fn novelty(coords: &Coords, node: usize, k: usize) -> f64 {
    let mut d: Vec<f64> = (0..coords.nrows()).filter(|&j| j != node).map(|j| dist(coords, node, j)).collect();
    let k = k.min(d.len());
    if k == 0 {
        return 0.0;
    }
    d.select_nth_unstable_by(k - 1, f64::total_cmp);
    let mut near = d[..k].to_vec();
    near.sort_by(f64::total_cmp);
    near.iter().sum::<f64>() / k as f64
}

pub fn all_novelties(coords: &Coords, k: usize) -> Vec<f64> {
    use rayon::prelude::*;
    (0..coords.nrows()).into_par_iter().map(|v| novelty(coords, v, k)).collect()
}

/// Token-window index for matching topic labels to graph variables.
pub struct VariableIndex {
    tokens: Vec<Vec<String>>,
}

impl VariableIndex {
    pub fn new(graph: &RelGraph) -> Self {
        Self { tokens: graph.labels().iter().map(|l| l.split_whitespace().map(str::to_string).collect()).collect() }
    }

    /// Variables whose phrase contains the label's tokens as a contiguous run.
    pub fn matches(&self, label: &str) -> Vec<NodeId> {
        let norm = normalize_phrase(label);
        let want: Vec<&str> = norm.split_whitespace().collect();
        if want.is_empty() {
            return Vec::new();
        }
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.windows(want.len()).any(|w| w.iter().zip(&want).all(|(a, b)| a == b)))
            .map(|(i, _)| i as NodeId)
            .collect()
    }
}

/// Unexpanded topics above `max_depth`, in id order.
pub fn frontier_topics(topics: &TopicGraph, max_depth: u32) -> Vec<TopicId> {
    topics.nodes.iter().filter(|n| !n.expanded && n.depth < max_depth).map(|n| n.id).collect()
}

/// Scores inputs for each frontier topic. Unmatched topics get degree 0 and
/// the largest novelty present.
pub fn frontier_entries(
    topics: &TopicGraph,
    graph: &RelGraph,
    triples: &[Triple],
    coords: &Coords,
    max_depth: u32,
    novelty_k: usize,
) -> Vec<FrontierEntry> {
    let index = VariableIndex::new(graph);
    let deg = graph.degrees();
    let nov = if coords.nrows() == graph.node_count() { all_novelties(coords, novelty_k) } else { vec![0.0; graph.node_count()] };
    let max_nov = nov.iter().copied().fold(0.0, f64::max);
    let surfaces: Vec<String> = triples.iter().map(|t| t.surface.to_lowercase()).collect();
    frontier_topics(topics, max_depth)
        .into_iter()
        .map(|id| {
            let node = &topics.nodes[id as usize];
            let m = index.matches(&node.label);
            let (degree, novelty) = if m.is_empty() {
                (0.0, max_nov)
            } else {
                let d = m.iter().map(|&v| deg[v as usize]).max().unwrap_or(0) as f64;
                (d, m.iter().map(|&v| nov[v as usize]).sum::<f64>() / m.len() as f64)
            };
            let needle = node.label.trim().to_lowercase();
            let triple_count = surfaces.iter().filter(|s| s.contains(&needle)).count() as f64;
            FrontierEntry { topic: id, depth: node.depth, degree, triple_count, novelty }
        })
        .collect()
}

/// Picks up to `batch_size` ids from scored candidates. `TopK` sorts by
/// descending score then ascending id; `Proportional` samples without
/// replacement with probability proportional to score.
pub fn select_scored(scored: &[(TopicId, f64)], batch_size: usize, mode: SelectionMode, seed: u64) -> Vec<TopicId> {
    let want = batch_size.min(scored.len());
    let clean = |u: f64| if u.is_nan() || u < 0.0 { 0.0 } else { u };
    match mode {
        SelectionMode::TopK => {
            let mut v: Vec<(TopicId, f64)> = scored.iter().map(|&(t, u)| (t, clean(u))).collect();
            v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            v.into_iter().take(want).map(|x| x.0).collect()
        }
        SelectionMode::Proportional => {
            let mut rng = rng_for(seed, "select-batch");
            let mut pool: Vec<(TopicId, f64)> = scored.iter().map(|&(t, u)| (t, clean(u))).collect();
            pool.sort_by_key(|x| x.0);
            let mut out = Vec::with_capacity(want);
            while out.len() < want {
                let pick = if let Some(i) = pool.iter().position(|x| x.1.is_infinite()) {
                    i
                } else {
                    let total: f64 = pool.iter().map(|x| x.1).sum();
                    if total > 0.0 {
                        let mut r = rng.random::<f64>() * total;
                        let mut chosen = pool.len() - 1;
                        for (i, x) in pool.iter().enumerate() {
                            if r < x.1 {
                                chosen = i;
                                break;
                            }
                            r -= x.1;
                        }
                        // Guard against landing on a zero weight through rounding.
                        if pool[chosen].1 == 0.0 {
                            chosen = pool.iter().rposition(|x| x.1 > 0.0).unwrap_or(0);
                        }
                        chosen
                    } else {
                        0
                    }
                };
                out.push(pool.remove(pick).0);
            }
            out
        }
    }
}

pub fn select_batch(
    frontier: &[FrontierEntry],
    weights: &UtilityWeights,
    batch_size: usize,
    mode: SelectionMode,
    seed: u64,
) -> Vec<TopicId> {
    let scored: Vec<(TopicId, f64)> = frontier.iter().map(|e| (e.topic, utility(e, weights))).collect();
    select_scored(&scored, batch_size, mode, seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub topic: TopicId,
    pub kind: TemplateKind,
}

/// What one deepen step added.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeepenDelta {
    pub deepened: Vec<TopicId>,
    pub new_topics: Vec<TopicId>,
    pub questions: Vec<CausalRecord>,
    pub statements: Vec<CausalRecord>,
    pub calls: u64,
    pub call_log: Vec<CallRecord>,
    /// The batch stopped early for lack of budget.
    pub exhausted: bool,
    pub expansion: ExpansionStats,
}

fn record_count(corpus: &Corpus, delta: &DeepenDelta, topic: &str) -> usize {
    corpus.questions.iter().chain(&corpus.statements).chain(&delta.questions).chain(&delta.statements).filter(|r| r.topic == topic).count()
}

/// Deepens each topic in batch order: one expansion call (unless the topic
/// graph is full), then Q&A calls at the policy's quota for the topic's depth.
/// A topic is started only when the budget, and `cap` if given, cover all of
/// its calls; otherwise the batch stops there with `exhausted` set.
#[allow(clippy::too_many_arguments)]
pub fn deepen(
    topics: &mut TopicGraph,
    corpus: &Corpus,
    batch: &[TopicId],
    policy: &DepthPolicy,
    topic_cfg: &TopicConfig,
    oracle: &Oracle,
    budget: &Budget,
    cap: Option<u64>,
) -> Result<DeepenDelta, ExploreError> {
    let mut delta = DeepenDelta::default();
    let phrase = topic_cfg.domain_phrase.as_str();
    for &id in batch {
        let Some(node) = topics.node(id).cloned() else { continue };
        let expand = !topics.is_full();
        let cost = policy.calls_for(node.depth, expand);
        let room = cap.map_or(u64::MAX, |c| c.saturating_sub(delta.calls));
        if cost > budget.remaining().min(room) {
            delta.exhausted = true;
            break;
        }
        let call = |prompt: Result<String, OracleError>, kind: TemplateKind, delta: &mut DeepenDelta| {
            let prompt = prompt.map_err(|source| ExploreError::Oracle { topic: id, source })?;
            let out = oracle.generate_with_budget(&prompt, Some(budget));
            if !matches!(out, Err(OracleError::BudgetExceeded)) {
                delta.calls += 1;
                delta.call_log.push(CallRecord { topic: id, kind });
            }
            out.map_err(|source| ExploreError::Oracle { topic: id, source })
        };
        if expand {
            let text = call(expansion_prompt(&node, topic_cfg), TemplateKind::TopicExpansion, &mut delta)?;
            let added = expand_node(topics, id, &text, topic_cfg.per_node_children, &mut delta.expansion);
            delta.new_topics.extend(added);
        } else if let Some(n) = topics.nodes.get_mut(id as usize) {
            n.expanded = true;
        }
        let quota = policy.quota(node.depth);
        let n = policy.items_per_call;
        for _ in 0..quota.question_calls {
            let v = record_count(corpus, &delta, &node.label) + 1;
            let text = call(question_prompt(&node, n, v, phrase), TemplateKind::CausalQuestions, &mut delta)?;
            let (qs, _) = parse_questions(&text, n);
            delta.questions.extend(qs.into_iter().map(|q| CausalRecord {
                topic: node.label.clone(),
                path: node.path.clone(),
                question: Some(q),
                statements: Vec::new(),
                injected: false,
            }));
        }
        for _ in 0..quota.statement_calls {
            let v = record_count(corpus, &delta, &node.label) + 1;
            let text = call(statement_prompt(&node, n, v, phrase), TemplateKind::CausalStatements, &mut delta)?;
            let (ss, _) = parse_statements(&text, n);
            if ss.is_empty() {
                continue;
            }
            let question = first_question(&corpus.questions, &node.label)
                .or_else(|| first_question(&delta.questions, &node.label));
            delta.statements.push(CausalRecord {
                topic: node.label.clone(),
                path: node.path.clone(),
                question,
                statements: ss,
                injected: false,
            });
        }
        delta.deepened.push(id);
    }
    Ok(delta)
}

/// Appends a delta's records and rebuilds triples, graph and manifold.
pub fn apply_delta(slice: &mut Slice, delta: &DeepenDelta) -> Result<(), ExploreError> {
    slice.corpus.questions.extend(delta.questions.iter().cloned());
    slice.corpus.statements.extend(delta.statements.iter().cloned());
    let (triples, _) = extract_corpus(&slice.corpus, &slice.config.slice.domain_label);
    slice.graph = RelGraph::build(&triples);
    slice.triples = triples;
    let m = build_manifold(&slice.graph, &slice.config)?;
    slice.embeddings_init = m.embeddings_init;
    slice.embeddings = m.embeddings;
    slice.coords2 = m.coords2;
    slice.coords3 = m.coords3;
    Ok(())
}

/// Radius at the given percentile of pairwise distances. Large inputs use a
/// seeded sample of pairs.
pub fn distance_percentile(coords: &Coords, pct: f64, seed: u64) -> f64 {
    let n = coords.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut d = Vec::new();
    if n <= 2000 {
        for i in 0..n {
            for j in i + 1..n {
                d.push(dist(coords, i, j));
            }
        }
    } else {
        let mut rng = rng_for(seed, "boost-radius");
        while d.len() < 200_000 {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            if i != j {
                d.push(dist(coords, i, j));
            }
        }
    }
    d.sort_by(f64::total_cmp);
    let idx = ((pct / 100.0) * (d.len() - 1) as f64).round() as usize;
    d[idx.min(d.len() - 1)]
}

/// Topics with a matched variable within `radius` of any seed variable.
pub fn boosted_topics(
    topics: &TopicGraph,
    entries: &[FrontierEntry],
    index: &VariableIndex,
    coords: &Coords,
    seeds: &[String],
    radius: f64,
) -> BTreeSet<TopicId> {
    let seed_vars: BTreeSet<NodeId> = seeds.iter().flat_map(|s| index.matches(s)).collect();
    if seed_vars.is_empty() || coords.nrows() == 0 {
        return BTreeSet::new();
    }
    entries
        .iter()
        .filter(|e| {
            index
                .matches(&topics.nodes[e.topic as usize].label)
                .iter()
                .any(|&v| seed_vars.iter().any(|&s| dist(coords, v as usize, s as usize) <= radius))
        })
        .map(|e| e.topic)
        .collect()
}

/// Structured record of one wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveLog {
    pub wave: usize,
    pub selected: Vec<String>,
    pub deepened: Vec<String>,
    pub boosted: usize,
    pub calls_used: u64,
    pub budget_remaining: u64,
    pub new_topics: usize,
    pub topics_after: usize,
    pub triples_before: usize,
    pub triples_after: usize,
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub edges_before: usize,
    pub edges_after: usize,
}

/// Runs up to `cfg.waves` waves, each spending at most `cfg.budget_per_wave`
/// calls from `budget`. Stops early when a wave spends nothing.
pub fn active_loop(
    slice: &mut Slice,
    cfg: &ExplorerConfig,
    oracle: &Oracle,
    budget: &Budget,
    task_seeds: &[String],
) -> Result<Vec<WaveLog>, ExploreError> {
    active_loop_scoped(slice, cfg, oracle, budget, task_seeds, None, &mut |_| {})
}

/// Like [`active_loop`], but only topics in `scope` are eligible. Topics
/// created by deepening a scoped topic join the scope for later waves.
/// `on_wave` sees each log as soon as its wave is applied.
pub fn active_loop_scoped(
    slice: &mut Slice,
    cfg: &ExplorerConfig,
    oracle: &Oracle,
    budget: &Budget,
    task_seeds: &[String],
    scope: Option<&BTreeSet<TopicId>>,
    on_wave: &mut dyn FnMut(&WaveLog),
) -> Result<Vec<WaveLog>, ExploreError> {
    cfg.validate()?;
    let mut scope = scope.cloned();
    let mut logs = Vec::new();
    if cfg.waves == 0 {
        return Ok(logs);
    }
    slice.topics.depth_limit = slice.topics.depth_limit.max(cfg.max_depth);
    slice.topics.max_topics = slice.topics.max_topics.max(cfg.max_topics);
    let topic_cfg = slice.config.topics.clone();
    for wave in 0..cfg.waves {
        let mut entries = frontier_entries(&slice.topics, &slice.graph, &slice.triples, &slice.coords2, cfg.max_depth, cfg.novelty_k);
        if let Some(scope) = &scope {
            entries.retain(|e| scope.contains(&e.topic));
        }
        if entries.is_empty() {
            break;
        }
        let boosted = if task_seeds.is_empty() {
            BTreeSet::new()
        } else {
            let index = VariableIndex::new(&slice.graph);
            let radius = distance_percentile(&slice.coords2, cfg.boost_percentile, cfg.seed);
            boosted_topics(&slice.topics, &entries, &index, &slice.coords2, task_seeds, radius)
        };
        let scored: Vec<(TopicId, f64)> = entries
            .iter()
            .map(|e| {
                let u = utility(e, &cfg.weights);
                (e.topic, if boosted.contains(&e.topic) { u * cfg.boost_factor } else { u })
            })
            .collect();
        let batch = select_scored(&scored, cfg.batch_size, cfg.mode, derive_seed(cfg.seed, &[&(wave as u64).to_le_bytes()]));
        let before = (slice.triples.len(), slice.graph.node_count(), slice.graph.edge_count());
        let delta = deepen(
            &mut slice.topics,
            &slice.corpus,
            &batch,
            &cfg.policy,
            &topic_cfg,
            oracle,
            budget,
            Some(cfg.budget_per_wave),
        )?;
        if delta.calls > 0 {
            apply_delta(slice, &delta)?;
        }
        if let Some(scope) = &mut scope {
            scope.extend(delta.new_topics.iter().copied());
        }
        let labels = |ids: &[TopicId]| -> Vec<String> { ids.iter().map(|&t| slice.topics.nodes[t as usize].label.clone()).collect() };
        let log = WaveLog {
            wave,
            selected: labels(&batch),
            deepened: labels(&delta.deepened),
            boosted: boosted.len(),
            calls_used: delta.calls,
            budget_remaining: budget.remaining(),
            new_topics: delta.new_topics.len(),
            topics_after: slice.topics.len(),
            triples_before: before.0,
            triples_after: slice.triples.len(),
            nodes_before: before.1,
            nodes_after: slice.graph.node_count(),
            edges_before: before.2,
            edges_after: slice.graph.edge_count(),
        };
        log::info!("wave {wave}: {} calls, {} new topics", log.calls_used, log.new_topics);
        on_wave(&log);
        logs.push(log);
        if delta.calls == 0 {
            break;
        }
    }
    Ok(logs)
}

/// Label lookup used by callers resolving a manifold region to topics.
pub fn topics_near(
    topics: &TopicGraph,
    graph: &RelGraph,
    coords: &Coords,
    center: &[f64],
    radius: f64,
    max_depth: u32,
) -> Vec<TopicId> {
    let index = VariableIndex::new(graph);
    let inside: HashMap<NodeId, bool> = (0..coords.nrows())
        .map(|v| {
            let d = coords.row(v).iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (v as NodeId, coords.ncols() == center.len() && d <= radius)
        })
        .collect();
    frontier_topics(topics, max_depth)
        .into_iter()
        .filter(|&t| index.matches(&topics.nodes[t as usize].label).iter().any(|v| inside.get(v).copied().unwrap_or(false)))
        .collect()
}
