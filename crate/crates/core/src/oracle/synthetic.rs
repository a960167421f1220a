//! Offline stand-in for the language model.
//!
//! Produces numbered lists with the same shape a live model returns for each
//! template kind. Statements mix topic-local variables with a fixed cross-topic
//! hub vocabulary (Zipf-weighted), which gives downstream graphs a hub/fringe
//! degree profile without any network access.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::prompt::{parse_prompt, TemplateKind};
use crate::rng::derive_seed;

const FACETS: &[&str] = &[
    "dynamics",
    "policy",
    "markets",
    "risk",
    "regulation",
    "innovation",
    "measurement",
    "institutions",
    "incentives",
    "behavior",
    "cycles",
    "pricing",
    "networks",
    "governance",
    "history",
    "forecasting",
    "trade",
    "labor",
    "technology",
    "finance",
    "health",
    "climate",
    "demographics",
    "ethics",
];

const LOCAL_NOUNS: &[&str] = &[
    "volatility",
    "costs",
    "demand",
    "supply",
    "adoption",
    "stability",
    "efficiency",
    "investment",
    "output",
    "prices",
    "participation",
    "capacity",
];

/// Cross-topic variables. Earlier entries are drawn more often.
pub const HUB_VOCABULARY: &[&str] = &[
    "economic uncertainty",
    "interest rates",
    "consumer confidence",
    "inflation",
    "unemployment",
    "government spending",
    "productivity growth",
    "technological change",
    "market volatility",
    "income inequality",
    "public trust",
    "energy costs",
    "credit availability",
    "population growth",
    "regulatory pressure",
    "supply chain disruption",
];

const REASONS: &[&str] = &[
    "weaker incentives",
    "tighter budgets",
    "shifting expectations",
    "information frictions",
];

const INTENSIFIERS: &[&str] = &["increased", "rising", "higher", "reduced"];

/// Lines the synthetic model emits for one call: exactly `n` numbered lines.
pub fn synthetic_grammar(seed: u64, kind: TemplateKind, topic: &str, n: usize) -> Vec<String> {
    synthetic_lines(seed, kind, topic, n, 0)
}

pub(crate) fn synthetic_lines(
    seed: u64,
    kind: TemplateKind,
    topic: &str,
    n: usize,
    variant: u64,
) -> Vec<String> {
    let n = n.max(1);
    let stream = derive_seed(
        seed,
        &[
            kind.as_str().as_bytes(),
            topic.as_bytes(),
            &(n as u64).to_le_bytes(),
            &variant.to_le_bytes(),
        ],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let topic = topic.trim();
    let body: Vec<String> = match kind {
        TemplateKind::TopicExpansion => subtopics(&mut rng, topic, n),
        TemplateKind::CausalQuestions => (0..n).map(|_| question(&mut rng, topic)).collect(),
        TemplateKind::CausalStatements => (0..n).map(|_| statement(&mut rng, topic)).collect(),
    };
    body.into_iter()
        .enumerate()
        .map(|(i, line)| format!("{}. {}", i + 1, line))
        .collect()
}

/// Full synthetic completion for a rendered prompt.
pub(crate) fn complete(seed: u64, prompt: &str) -> String {
    match parse_prompt(prompt) {
        Some(p) => synthetic_lines(seed, p.kind, &p.topic, p.n, p.variant).join("\n"),
        None => {
            // Free-form prompt: answer with statements about a topic derived from the text.
            let topic: String = prompt.split_whitespace().take(3).collect::<Vec<_>>().join(" ");
            let topic = if topic.is_empty() { "general".to_string() } else { topic };
            let variant = derive_seed(0, &[prompt.as_bytes()]);
            synthetic_lines(seed, TemplateKind::CausalStatements, &topic, 3, variant).join("\n")
        }
    }
}

fn subtopics(rng: &mut ChaCha8Rng, topic: &str, n: usize) -> Vec<String> {
    let tokens: Vec<&str> = topic.split_whitespace().collect();
    let base = match tokens.len() {
        0 => "topic".to_string(),
        1 | 2 => tokens.join(" "),
        _ => format!("{} {}", tokens[0], tokens[tokens.len() - 1]),
    };
    let mut order: Vec<usize> = (0..FACETS.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    (0..n)
        .map(|i| {
            let facet = FACETS[order[i % FACETS.len()]];
            if i < FACETS.len() {
                format!("{base} {facet}")
            } else {
                format!("{base} {facet} {}", i / FACETS.len() + 1)
            }
        })
        .collect()
}

fn hub(rng: &mut ChaCha8Rng) -> &'static str {
    let total: f64 = (1..=HUB_VOCABULARY.len()).map(|r| 1.0 / r as f64).sum();
    let mut x = rng.random::<f64>() * total;
    for (i, h) in HUB_VOCABULARY.iter().enumerate() {
        x -= 1.0 / (i + 1) as f64;
        if x <= 0.0 {
            return h;
        }
    }
    HUB_VOCABULARY[HUB_VOCABULARY.len() - 1]
}

fn variable(rng: &mut ChaCha8Rng, topic: &str) -> String {
    if rng.random_bool(0.35) {
        hub(rng).to_string()
    } else {
        let noun = LOCAL_NOUNS.choose(rng).copied().unwrap_or("output");
        format!("{} {noun}", topic.to_lowercase())
    }
}

fn two_variables(rng: &mut ChaCha8Rng, topic: &str) -> (String, String) {
    let x = variable(rng, topic);
    loop {
        let y = variable(rng, topic);
        if y != x {
            return (x, y);
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn question(rng: &mut ChaCha8Rng, topic: &str) -> String {
    let y = variable(rng, topic);
    if rng.random_bool(0.5) {
        format!("What causes changes in {y}?")
    } else {
        format!("What leads to {y} in {topic}?")
    }
}

fn statement(rng: &mut ChaCha8Rng, topic: &str) -> String {
    let (x, y) = two_variables(rng, topic);
    let x = if rng.random_bool(0.2) {
        format!("{} {x}", INTENSIFIERS.choose(rng).copied().unwrap_or("increased"))
    } else {
        x
    };
    let cue = if rng.random_bool(0.5) { "causes" } else { "leads to" };
    let reason = if rng.random_bool(0.15) {
        format!(" due to {}", REASONS.choose(rng).copied().unwrap_or("weaker incentives"))
    } else {
        String::new()
    };
    format!("{} {cue} {y}{reason}.", capitalize(&x))
}
