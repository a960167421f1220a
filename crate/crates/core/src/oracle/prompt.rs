use serde::{Deserialize, Serialize};

use super::OracleError;

/// Which generation step a prompt drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    TopicExpansion,
    CausalQuestions,
    CausalStatements,
}

impl TemplateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateKind::TopicExpansion => "topic_expansion",
            TemplateKind::CausalQuestions => "causal_questions",
            TemplateKind::CausalStatements => "causal_statements",
        }
    }

    pub fn default_body(self) -> &'static str {
        match self {
            TemplateKind::TopicExpansion => TOPIC_EXPANSION,
            TemplateKind::CausalQuestions => CAUSAL_QUESTIONS,
            TemplateKind::CausalStatements => CAUSAL_STATEMENTS,
        }
    }
}

const TOPIC_EXPANSION: &str = "You are an expert in {domain}.\n\
Given the topic \"{TOPIC}\", list {N} important subtopics that help explain its causes, consequences, or mechanisms.\n\
Return ONLY a numbered list of subtopics, one per line, with no explanations.";

const CAUSAL_QUESTIONS: &str = "You are an expert in {domain}.\n\
Topic: \"{TOPIC}\".\n\
Write {N} causal questions a student might ask about this topic.\n\
Each question should start with \"What causes\" or \"What leads to\".\n\
Return only the questions, one per line.";

const CAUSAL_STATEMENTS: &str = "You are an expert in {domain}.\n\
Topic: \"{TOPIC}\".\n\
Write {N} short statements of the form \"X causes Y\" or \"X leads to Y\" that describe causal relationships in this topic.\n\
Each statement should focus on a single mechanism.\n\
Return only the statements, one per line.";

/// Prefix of the optional line appended to repeat calls so that each call in a
/// multi-call quota is a distinct prompt.
pub(crate) const VARIATION_PREFIX: &str = "Give examples that differ from any previous answer (set ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub kind: TemplateKind,
    pub domain_phrase: String,
    pub body: String,
}

impl PromptTemplate {
    pub fn new(kind: TemplateKind, domain_phrase: impl Into<String>) -> Self {
        Self {
            kind,
            domain_phrase: domain_phrase.into(),
            body: kind.default_body().to_string(),
        }
    }
}

/// Fills `{domain}`, `{TOPIC}` and `{N}` in the template body.
///
/// Substitution is single-pass, so braces inside the topic are never
/// re-expanded.
pub fn render_prompt(
    template: &PromptTemplate,
    topic: &str,
    domain_phrase: &str,
    n: usize,
) -> Result<String, OracleError> {
    let topic = topic.trim();
    if topic.is_empty() {
        return Err(OracleError::EmptyTopic);
    }
    let n = n.to_string();
    let body = &template.body;
    let mut out = String::with_capacity(body.len() + topic.len() + domain_phrase.len());
    let mut rest = body.as_str();
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else {
            out.push_str(&rest[open..]);
            rest = "";
            break;
        };
        let name = &after[..close];
        let is_ident = !name.is_empty()
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !is_ident {
            out.push('{');
            rest = after;
            continue;
        }
        match name {
            "domain" => out.push_str(domain_phrase),
            "TOPIC" => out.push_str(topic),
            "N" => out.push_str(&n),
            other => return Err(OracleError::UnboundPlaceholder(other.to_string())),
        }
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders the `index`-th call of a repeated prompt. Index 0 is the plain template.
pub fn render_variant(
    template: &PromptTemplate,
    topic: &str,
    domain_phrase: &str,
    n: usize,
    index: usize,
) -> Result<String, OracleError> {
    let mut prompt = render_prompt(template, topic, domain_phrase, n)?;
    if index > 0 {
        prompt.push('\n');
        prompt.push_str(VARIATION_PREFIX);
        prompt.push_str(&index.to_string());
        prompt.push_str(").");
    }
    Ok(prompt)
}

/// What the synthetic backend recovers from a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ParsedPrompt {
    pub kind: TemplateKind,
    pub topic: String,
    pub n: usize,
    pub variant: u64,
}

pub(crate) fn parse_prompt(prompt: &str) -> Option<ParsedPrompt> {
    let mut kind = None;
    let mut topic = None;
    let mut n = None;
    let mut variant = 0u64;
    for line in prompt.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("Given the topic \"") {
            if let Some(end) = rest.rfind("\", list ") {
                topic = Some(rest[..end].to_string());
                n = leading_number(&rest[end + "\", list ".len()..]);
                kind = Some(TemplateKind::TopicExpansion);
            }
        } else if let Some(rest) = line.strip_prefix("Topic: \"") {
            if let Some(inner) = rest.strip_suffix("\".") {
                topic = Some(inner.to_string());
            }
        } else if let Some(rest) = line.strip_prefix("Write ") {
            n = leading_number(rest);
            if line.contains("causal questions") {
                kind = Some(TemplateKind::CausalQuestions);
            } else if line.contains("statements of the form") {
                kind = Some(TemplateKind::CausalStatements);
            }
        } else if let Some(rest) = line.strip_prefix(VARIATION_PREFIX) {
            variant = leading_number(rest).unwrap_or(0) as u64;
        }
    }
    Some(ParsedPrompt {
        kind: kind?,
        topic: topic?,
        n: n?,
        variant,
    })
}

fn leading_number(s: &str) -> Option<usize> {
    let digits: String = s.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}
