//! Causal questions and statements per topic.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::has_cue;
use crate::jsonl::{self, RecordError};
use crate::oracle::{render_variant, Budget, Oracle, OracleError, PromptTemplate, TemplateKind};
use crate::topics::{parse_numbered_list, TopicGraph, TopicNode};

pub const QUESTIONS_FILE: &str = "causal_questions.jsonl";
pub const STATEMENTS_FILE: &str = "causal_statements.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalRecord {
    pub topic: String,
    pub path: Vec<String>,
    pub question: Option<String>,
    #[serde(default)]
    pub statements: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub injected: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub questions: Vec<CausalRecord>,
    pub statements: Vec<CausalRecord>,
}

/// Per-pass counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationTally {
    pub oracle_calls: u64,
    /// Topics whose response held no usable line.
    pub empty_topics: u64,
    /// Lines kept or dropped for not matching the requested shape.
    pub nonconforming_lines: u64,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("per-topic quota must be at least 1")]
    ZeroQuota,
    #[error("oracle failed on topic {topic:?}: {source}")]
    Oracle { topic: String, source: OracleError },
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// How many items to request for a topic at a given depth. With
/// `full_depth = Some(d)`, topics deeper than `d` get `reduced` items instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthQuota {
    pub per_topic: usize,
    pub full_depth: Option<u32>,
    pub reduced: usize,
}

impl Default for DepthQuota {
    fn default() -> Self {
        Self { per_topic: 3, full_depth: None, reduced: 1 }
    }
}

impl DepthQuota {
    pub fn uniform(per_topic: usize) -> Self {
        Self { per_topic, full_depth: None, reduced: per_topic }
    }

    pub fn quota(&self, depth: u32) -> usize {
        match self.full_depth {
            Some(d) if depth > d => self.reduced,
            _ => self.per_topic,
        }
    }
}

pub fn question_prompt(
    node: &TopicNode,
    n: usize,
    variant: usize,
    domain_phrase: &str,
) -> Result<String, OracleError> {
    let t = PromptTemplate::new(TemplateKind::CausalQuestions, domain_phrase);
    render_variant(&t, &node.label, domain_phrase, n, variant)
}

pub fn statement_prompt(
    node: &TopicNode,
    n: usize,
    variant: usize,
    domain_phrase: &str,
) -> Result<String, OracleError> {
    let t = PromptTemplate::new(TemplateKind::CausalStatements, domain_phrase);
    render_variant(&t, &node.label, domain_phrase, n, variant)
}

fn clean_line(line: &str) -> String {
    line.trim().trim_matches(|c| c == '"' || c == '\u{201c}' || c == '\u{201d}').trim().to_string()
}

/// Keeps up to `n` lines that start with "What causes" / "What leads to".
pub fn parse_questions(response: &str, n: usize) -> (Vec<String>, u64) {
    let mut kept = Vec::new();
    let mut bad = 0;
    for line in parse_numbered_list(response).labels {
        let q = clean_line(&line);
        let lower = q.to_lowercase();
        if lower.starts_with("what causes") || lower.starts_with("what leads to") {
            if kept.len() < n {
                kept.push(q);
            }
        } else {
            bad += 1;
        }
    }
    (kept, bad)
}

/// Keeps up to `n` lines; lines without a causal cue are kept but counted.
pub fn parse_statements(response: &str, n: usize) -> (Vec<String>, u64) {
    let mut kept = Vec::new();
    let mut bad = 0;
    for line in parse_numbered_list(response).labels.into_iter().take(n) {
        let s = clean_line(&line);
        if s.is_empty() {
            continue;
        }
        if !has_cue(&s) {
            bad += 1;
        }
        kept.push(s);
    }
    (kept, bad)
}

fn selected<'a>(graph: &'a TopicGraph, quota: &DepthQuota) -> Vec<(&'a TopicNode, usize)> {
    graph
        .nodes
        .iter()
        .map(|n| (n, quota.quota(n.depth)))
        .filter(|(_, q)| *q > 0)
        .collect()
}

/// One oracle call per selected topic; one record per conforming question.
pub fn generate_questions(
    graph: &TopicGraph,
    quota: &DepthQuota,
    domain_phrase: &str,
    oracle: &Oracle,
    budget: Option<&Budget>,
) -> Result<(Vec<CausalRecord>, GenerationTally), CorpusError> {
    if quota.per_topic == 0 {
        return Err(CorpusError::ZeroQuota);
    }
    let topics = selected(graph, quota);
    let prompts = topics
        .iter()
        .map(|(n, q)| question_prompt(n, *q, 0, domain_phrase))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| CorpusError::Oracle { topic: String::new(), source })?;
    let responses = oracle.generate_many(&prompts, budget);
    let mut tally = GenerationTally { oracle_calls: responses.len() as u64, ..Default::default() };
    let mut records = Vec::new();
    for ((node, q), resp) in topics.iter().zip(responses) {
        let text = resp.map_err(|source| CorpusError::Oracle { topic: node.label.clone(), source })?;
        let (qs, bad) = parse_questions(&text, *q);
        tally.nonconforming_lines += bad;
        if qs.is_empty() {
            tally.empty_topics += 1;
        }
        records.extend(qs.into_iter().map(|question| CausalRecord {
            topic: node.label.clone(),
            path: node.path.clone(),
            question: Some(question),
            statements: Vec::new(),
            injected: false,
        }));
    }
    Ok((records, tally))
}

/// One oracle call per selected topic; one record per topic holding its
/// statements. When `questions` are given, each record carries the topic's
/// first question.
pub fn generate_statements(
    graph: &TopicGraph,
    quota: &DepthQuota,
    domain_phrase: &str,
    questions: &[CausalRecord],
    oracle: &Oracle,
    budget: Option<&Budget>,
) -> Result<(Vec<CausalRecord>, GenerationTally), CorpusError> {
    if quota.per_topic == 0 {
        return Err(CorpusError::ZeroQuota);
    }
    let topics = selected(graph, quota);
    let prompts = topics
        .iter()
        .map(|(n, q)| statement_prompt(n, *q, 0, domain_phrase))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| CorpusError::Oracle { topic: String::new(), source })?;
    let responses = oracle.generate_many(&prompts, budget);
    let mut tally = GenerationTally { oracle_calls: responses.len() as u64, ..Default::default() };
    let mut records = Vec::new();
    for ((node, q), resp) in topics.iter().zip(responses) {
        let text = resp.map_err(|source| CorpusError::Oracle { topic: node.label.clone(), source })?;
        let (statements, bad) = parse_statements(&text, *q);
        tally.nonconforming_lines += bad;
        if statements.is_empty() {
            tally.empty_topics += 1;
            continue;
        }
        records.push(CausalRecord {
            topic: node.label.clone(),
            path: node.path.clone(),
            question: first_question(questions, &node.label),
            statements,
            injected: false,
        });
    }
    Ok((records, tally))
}

pub(crate) fn first_question(questions: &[CausalRecord], topic: &str) -> Option<String> {
    questions.iter().find(|r| r.topic == topic).and_then(|r| r.question.clone())
}

impl Corpus {
    pub fn persist(&self, dir: &Path) -> Result<(), RecordError> {
        jsonl::write(&dir.join(QUESTIONS_FILE), &self.questions)?;
        jsonl::write(&dir.join(STATEMENTS_FILE), &self.statements)
    }

    pub fn load(dir: &Path) -> Result<Self, RecordError> {
        Ok(Self {
            questions: jsonl::read(&dir.join(QUESTIONS_FILE))?,
            statements: jsonl::read(&dir.join(STATEMENTS_FILE))?,
        })
    }

    pub fn len(&self) -> usize {
        self.questions.len() + self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
