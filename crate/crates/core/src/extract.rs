//! Cue-phrase extraction of (head, relation, tail) triples.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{CausalRecord, Corpus, QUESTIONS_FILE, STATEMENTS_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationType {
    Causes,
    LeadsTo,
    Increases,
    Reduces,
    Influences,
    Affects,
    Prevents,
    Supports,
    Improves,
    Impedes,
    Stresses,
    IsA,
    PartOf,
}

impl RelationType {
    pub const ALL: [RelationType; 13] = [
        RelationType::Causes,
        RelationType::LeadsTo,
        RelationType::Increases,
        RelationType::Reduces,
        RelationType::Influences,
        RelationType::Affects,
        RelationType::Prevents,
        RelationType::Supports,
        RelationType::Improves,
        RelationType::Impedes,
        RelationType::Stresses,
        RelationType::IsA,
        RelationType::PartOf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::Causes => "causes",
            RelationType::LeadsTo => "leads_to",
            RelationType::Increases => "increases",
            RelationType::Reduces => "reduces",
            RelationType::Influences => "influences",
            RelationType::Affects => "affects",
            RelationType::Prevents => "prevents",
            RelationType::Supports => "supports",
            RelationType::Improves => "improves",
            RelationType::Impedes => "impedes",
            RelationType::Stresses => "stresses",
            RelationType::IsA => "is_a",
            RelationType::PartOf => "part_of",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|r| *r == self).unwrap_or(0)
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RelationType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown relation {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Source {
    pub file: String,
    pub record: usize,
    pub line: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub injected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: RelationType,
    pub tail: String,
    pub domain: String,
    pub source: Source,
    pub surface: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionTally {
    pub sentences: u64,
    pub triples: u64,
    pub no_cue: u64,
    pub negated: u64,
    /// Cue matches whose head or tail cleaned down to nothing.
    pub empty_span: u64,
    /// Variables named by interrogative sentences ("What causes X?").
    pub question_variables: u64,
}

impl ExtractionTally {
    pub fn add(&mut self, o: &ExtractionTally) {
        self.sentences += o.sentences;
        self.triples += o.triples;
        self.no_cue += o.no_cue;
        self.negated += o.negated;
        self.empty_span += o.empty_span;
        self.question_variables += o.question_variables;
    }
}

// Longer forms first so leftmost-longest matching prefers them.
const CUES: &[(&str, RelationType)] = &[
    ("is part of", RelationType::PartOf),
    ("are part of", RelationType::PartOf),
    ("is a", RelationType::IsA),
    ("is an", RelationType::IsA),
    ("leads to", RelationType::LeadsTo),
    ("lead to", RelationType::LeadsTo),
    ("led to", RelationType::LeadsTo),
    ("results in", RelationType::LeadsTo),
    ("result in", RelationType::LeadsTo),
    ("contributes to", RelationType::LeadsTo),
    ("contribute to", RelationType::LeadsTo),
    ("causes", RelationType::Causes),
    ("cause", RelationType::Causes),
    ("drives", RelationType::Causes),
    ("triggers", RelationType::Causes),
    ("increases", RelationType::Increases),
    ("increase", RelationType::Increases),
    ("raises", RelationType::Increases),
    ("boosts", RelationType::Increases),
    ("reduces", RelationType::Reduces),
    ("reduce", RelationType::Reduces),
    ("decreases", RelationType::Reduces),
    ("lowers", RelationType::Reduces),
    ("influences", RelationType::Influences),
    ("influence", RelationType::Influences),
    ("affects", RelationType::Affects),
    ("affect", RelationType::Affects),
    ("prevents", RelationType::Prevents),
    ("prevent", RelationType::Prevents),
    ("inhibits", RelationType::Prevents),
    ("supports", RelationType::Supports),
    ("support", RelationType::Supports),
    ("improves", RelationType::Improves),
    ("improve", RelationType::Improves),
    ("impedes", RelationType::Impedes),
    ("impede", RelationType::Impedes),
    ("hinders", RelationType::Impedes),
    ("stresses", RelationType::Stresses),
    ("strains", RelationType::Stresses),
];

/// Surface cue phrase to relation. Covers every relation type.
pub fn cue_lexicon() -> &'static [(&'static str, RelationType)] {
    CUES
}

pub fn lookup_cue(cue: &str) -> Option<RelationType> {
    let c = normalize_phrase(cue);
    CUES.iter().find(|(s, _)| *s == c).map(|(_, r)| *r)
}

/// Whether the sentence contains any lexicon cue as whole words.
pub fn has_cue(sentence: &str) -> bool {
    let lower = sentence.to_lowercase();
    !scan_cues(&words_of(&lower)).is_empty()
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "its", "their", "his", "her", "our", "any",
    "each", "no", "one", "main", "major", "primary", "key",
];
const LEADING_DROP: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "often", "typically", "generally",
    "usually", "also", "significantly", "directly", "indirectly", "ultimately", "and", "then",
];
const CHANGE_MODIFIERS: &[&str] = &[
    "increased", "decreased", "rising", "falling", "higher", "lower", "greater", "reduced",
    "declining", "growing", "increasing", "decreasing",
];
const TRAILING_RELATIVE: &[&str] = &["which", "that", "who", "this", "it", "thereby", "in", "turn"];
const HEAD_ADJUNCTS: &[&str] = &["during", "when", "while", "amid"];
const RATIONALE: &[&[&str]] = &[&["due", "to"], &["because"], &["by"]];
const PARTICIPIAL: &[&[&str]] = &[&["resulting", "in"], &["leading", "to"], &["causing"]];
const INTERROGATIVE: &[&str] = &["what", "which", "who", "how", "why", "when", "where", "does", "do", "can"];
const CAUSATIVE: &[&str] = &["causes", "cause", "drives", "triggers"];

/// Lowercase, collapse whitespace, strip enclosing quotes and terminal
/// punctuation. Idempotent.
pub fn normalize_phrase(text: &str) -> String {
    let mut s = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    loop {
        let t = s
            .trim_matches(|c: char| {
                c.is_whitespace() || matches!(c, '"' | '\'' | '\u{201c}' | '\u{201d}' | '`')
            })
            .trim_end_matches(|c: char| c.is_whitespace() || matches!(c, '.' | ',' | ';' | ':' | '!' | '?'))
            .to_string();
        if t == s {
            return s;
        }
        s = t;
    }
}

fn words_of(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn bare(w: &str) -> &str {
    w.trim_matches(|c: char| !c.is_alphanumeric() && c != '-' && c != '\'')
}

/// Index of the first whole-word match of `pat` at or after `from`. The last
/// matched word may carry trailing punctuation; inner ones may not.
fn find_at(words: &[&str], pat: &[&str], from: usize) -> Option<usize> {
    if pat.is_empty() || words.len() < pat.len() {
        return None;
    }
    (from..=words.len() - pat.len()).find(|&i| {
        pat.iter().enumerate().all(|(k, p)| {
            let w = words[i + k];
            if k + 1 == pat.len() {
                bare(w) == *p && !w.trim_start_matches(['"', '\u{201c}']).starts_with(|c: char| !c.is_alphanumeric())
            } else {
                w == *p
            }
        })
    })
}

struct CueHit {
    start: usize,
    end: usize,
    cue: &'static str,
    relation: RelationType,
    negated: bool,
}

fn scan_cues(words: &[&str]) -> Vec<CueHit> {
    let mut hits = Vec::new();
    let mut i = 0;
    while i < words.len() {
        // Leftmost-longest at position i.
        let best = CUES
            .iter()
            .filter_map(|(c, r)| {
                let pat: Vec<&str> = c.split(' ').collect();
                (find_at(&words[i..], &pat, 0) == Some(0)).then_some((pat.len(), *c, *r))
            })
            .max_by_key(|(n, _, _)| *n);
        let Some((n, cue, relation)) = best else {
            i += 1;
            continue;
        };
        let prev = |k: usize| (i >= k).then(|| bare(words[i - k]));
        let next = words.get(i + n).map(|w| bare(w));
        // A comma right before the cue word means it's not the verb of this clause.
        let prev_comma = i > 0 && words[i - 1].ends_with(',');
        let nominal = prev(1).is_some_and(|p| DETERMINERS.contains(&p))
            || (next == Some("of") && !cue.ends_with(" of"))
            || prev_comma && n == 1 && !cue.ends_with('s');
        if nominal {
            i += 1;
            continue;
        }
        let is_neg = |w: Option<&str>| {
            w.is_some_and(|w| w == "not" || w == "never" || w == "cannot" || w.ends_with("n't"))
        };
        let negated = is_neg(prev(1)) || is_neg(prev(2));
        hits.push(CueHit { start: i, end: i + n, cue, relation, negated });
        i += n;
    }
    hits
}

fn strip_leading<'a>(mut w: &'a [&'a str], set: &[&str]) -> &'a [&'a str] {
    while let Some(first) = w.first() {
        if set.contains(&bare(first)) && !first.ends_with(',') || first.chars().all(|c| !c.is_alphanumeric()) {
            w = &w[1..];
        } else {
            break;
        }
    }
    w
}

fn strip_trailing<'a>(mut w: &'a [&'a str], set: &[&str]) -> &'a [&'a str] {
    while let Some(last) = w.last() {
        let b = bare(last);
        if b.is_empty() || set.contains(&b) {
            w = &w[..w.len() - 1];
        } else {
            break;
        }
    }
    w
}

fn cut_at<'a>(w: &'a [&'a str], pats: &[&[&str]]) -> &'a [&'a str] {
    let cut = pats.iter().filter_map(|p| find_at(w, p, 0)).min();
    match cut {
        Some(k) => &w[..k],
        None => w,
    }
}

fn clean_head<'a>(segment: &'a [&'a str]) -> &'a [&'a str] {
    let mut w = strip_trailing(segment, TRAILING_RELATIVE);
    // A leading adverbial clause ends with the last comma.
    if let Some(k) = w[..w.len().saturating_sub(1)].iter().rposition(|x| x.ends_with(',')) {
        w = &w[k + 1..];
    }
    let adj: Vec<&[&str]> = HEAD_ADJUNCTS.iter().map(std::slice::from_ref).collect();
    w = cut_at(w, &adj);
    let mut drop: Vec<&str> = LEADING_DROP.to_vec();
    drop.extend_from_slice(CHANGE_MODIFIERS);
    strip_leading(w, &drop)
}

fn third_person(verb: &str) -> String {
    let v = verb.trim_end_matches(|c: char| !c.is_alphanumeric());
    if v.ends_with('y') && !v.ends_with("ay") && !v.ends_with("ey") && !v.ends_with("oy") {
        format!("{}ies", &v[..v.len() - 1])
    } else if ["s", "sh", "ch", "x", "z", "o"].iter().any(|e| v.ends_with(e)) {
        format!("{v}es")
    } else {
        format!("{v}s")
    }
}

fn clean_tail(segment: &[&str], relation_cue: &str, head: &[&str]) -> Vec<String> {
    let mut w = strip_trailing(segment, TRAILING_RELATIVE);
    // ", resulting in Z" carries the effect.
    if let Some((k, n)) = PARTICIPIAL
        .iter()
        .filter_map(|p| find_at(w, p, 0).map(|k| (k, p.len())))
        .filter(|(k, _)| *k > 0)
        .min()
    {
        if k + n < w.len() {
            w = &w[k + n..];
        }
    }
    let cut = cut_at(w, RATIONALE);
    if !strip_trailing(cut, &[]).is_empty() {
        w = cut;
    }
    w = strip_trailing(w, TRAILING_RELATIVE);
    w = strip_leading(w, &["a", "an", "the", "this", "that", "these", "those"]);
    let mut out: Vec<String> = w.iter().map(|s| s.to_string()).collect();

    // "X to V" after a causative verb reads as "X Vs".
    if CAUSATIVE.contains(&relation_cue) {
        if let Some(k) = out.iter().position(|x| x == "to") {
            if k > 0 && k + 1 < out.len() {
                let v = third_person(&out[k + 1]);
                out.splice(k..k + 2, [v]);
            }
        }
    }

    // Coordinated change modifiers: "greater A and higher B" -> "A and B".
    let conj: Vec<usize> = out.iter().enumerate().filter(|(_, x)| *x == "and").map(|(i, _)| i).collect();
    if !conj.is_empty() {
        let starts: Vec<usize> = std::iter::once(0).chain(conj.iter().map(|i| i + 1)).collect();
        if starts.iter().all(|&s| out.get(s).is_some_and(|x| CHANGE_MODIFIERS.contains(&bare(x)))) {
            for s in starts.into_iter().rev() {
                out.remove(s);
            }
        }
    }

    // "its N" / "their N" -> "N of <antecedent>".
    if out.len() >= 2 && (out[0] == "its" || out[0] == "their") {
        let antecedent = head
            .iter()
            .position(|x| *x == "for" || *x == "of")
            .and_then(|k| head.get(k + 1))
            .or(head.last())
            .map(|x| bare(x).to_string());
        if let Some(a) = antecedent {
            let noun = out[1].clone();
            out.splice(0..2, [noun, "of".to_string(), a]);
        }
    }
    out
}

fn tally_only(sentence: &str) -> (Vec<(String, RelationType, String)>, ExtractionTally) {
    let lower = sentence.to_lowercase();
    let words = words_of(&lower);
    let mut tally = ExtractionTally { sentences: 1, ..Default::default() };
    let hits = scan_cues(&words);
    if hits.is_empty() {
        tally.no_cue = 1;
        return (Vec::new(), tally);
    }
    let mut out = Vec::new();
    for (i, hit) in hits.iter().enumerate() {
        if hit.negated {
            tally.negated += 1;
            continue;
        }
        let seg_start = if i == 0 { 0 } else { hits[i - 1].end };
        let seg_end = hits.get(i + 1).map_or(words.len(), |h| h.start);
        let head_seg = &words[seg_start..hit.start];
        let head_seg = if hit.start >= 1 && head_seg.len() > 1 {
            // Drop auxiliaries before a base-form cue ("can", "may", "will").
            strip_trailing(head_seg, &["can", "may", "will", "might", "could", "often", "also", "directly"])
        } else {
            head_seg
        };
        let head = clean_head(head_seg);
        if head.first().is_some_and(|h| INTERROGATIVE.contains(&bare(h))) {
            tally.question_variables += 1;
            continue;
        }
        let tail = clean_tail(&words[hit.end..seg_end], hit.cue, head);
        let h = normalize_phrase(&head.join(" "));
        let t = normalize_phrase(&tail.join(" "));
        if h.is_empty() || t.is_empty() {
            tally.empty_span += 1;
            continue;
        }
        out.push((h, hit.relation, t));
    }
    tally.triples = out.len() as u64;
    (out, tally)
}

/// Triples for one sentence with an unset source; see [`extract_sentence`].
pub fn extract_triples(sentence: &str, domain: &str) -> Vec<Triple> {
    extract_sentence(sentence, domain, Source { file: String::new(), record: 0, line: 0, injected: false }).0
}

pub fn extract_sentence(sentence: &str, domain: &str, source: Source) -> (Vec<Triple>, ExtractionTally) {
    let (raw, tally) = tally_only(sentence);
    let triples = raw
        .into_iter()
        .map(|(head, relation, tail)| Triple {
            head,
            relation,
            tail,
            domain: domain.to_string(),
            source: source.clone(),
            surface: sentence.to_string(),
        })
        .collect();
    (triples, tally)
}

/// Chooses the domain label for a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "label")]
pub enum DomainLabel {
    /// Normalized root of the record's topic path.
    #[default]
    RootTopic,
    Fixed(String),
}

impl DomainLabel {
    pub fn for_record(&self, rec: &CausalRecord) -> String {
        match self {
            DomainLabel::Fixed(l) => l.clone(),
            DomainLabel::RootTopic => {
                normalize_phrase(rec.path.first().map(String::as_str).unwrap_or(rec.topic.as_str()))
            }
        }
    }
}

/// Extracts from question bodies (questions file) and statement lines
/// (statements file), in source order. Duplicates are kept.
pub fn extract_corpus(corpus: &Corpus, domain: &DomainLabel) -> (Vec<Triple>, ExtractionTally) {
    let mut out = Vec::new();
    let mut tally = ExtractionTally::default();
    for (file, records, use_questions) in
        [(QUESTIONS_FILE, &corpus.questions, true), (STATEMENTS_FILE, &corpus.statements, false)]
    {
        for (ri, rec) in records.iter().enumerate() {
            let d = domain.for_record(rec);
            let mut lines: Vec<&str> = Vec::new();
            if use_questions {
                lines.extend(rec.question.as_deref());
            }
            lines.extend(rec.statements.iter().map(String::as_str));
            for (li, line) in lines.into_iter().enumerate() {
                let src = Source { file: file.to_string(), record: ri, line: li, injected: rec.injected };
                let (t, tl) = extract_sentence(line, &d, src);
                out.extend(t);
                tally.add(&tl);
            }
        }
    }
    (out, tally)
}
