//! Modules 1–5 end to end, with a per-module timing profile.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, LcmConfig};
use crate::corpus::{generate_questions, generate_statements, Corpus, CorpusError, GenerationTally};
use crate::extract::{extract_corpus, ExtractionTally};
use crate::graph::RelGraph;
use crate::manifold::{gt_refine, project, Coords, Embeddings, HashedNgramEncoder, ManifoldConfig, ManifoldError};
use crate::oracle::Oracle;
use crate::slice::{finish_slice, write_artifacts, Slice, SliceError, SliceManifest, SliceStore};
use crate::topics::{expand_bfs, ExpansionStats, TopicError};

pub const TIMING_FILE: &str = "timing_profile.txt";

pub const MODULE_LABELS: [&str; 6] = [
    "1: Topic graph",
    "2: Causal questions",
    "3: Causal statements",
    "4: Relational triples",
    "5: Relational manifold (GT+UMAP)",
    "5.1: Write slice",
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleTime {
    pub module: String,
    pub seconds: f64,
}

/// Seconds per module plus the wall clock of the whole run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingProfile {
    pub modules: Vec<ModuleTime>,
    pub total_seconds: f64,
}

impl TimingProfile {
    pub fn module_sum(&self) -> f64 {
        self.modules.iter().map(|m| m.seconds).sum()
    }

    pub fn seconds(&self, module: &str) -> Option<f64> {
        self.modules.iter().find(|m| m.module == module).map(|m| m.seconds)
    }

    /// Tab-separated table: header, one row per module, then `Total`.
    pub fn render(&self) -> String {
        let mut s = String::from("Module\ttime [s]\n");
        for m in &self.modules {
            let _ = writeln!(s, "{}\t{:.4}", m.module, m.seconds);
        }
        let _ = writeln!(s, "Total\t{:.4}", self.total_seconds);
        s
    }

    pub fn parse(text: &str) -> Option<Self> {
        let mut out = TimingProfile::default();
        let mut total = None;
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let (name, secs) = line.rsplit_once('\t')?;
            let secs: f64 = secs.trim().parse().ok()?;
            if name == "Total" {
                total = Some(secs);
            } else {
                out.modules.push(ModuleTime { module: name.to_string(), seconds: secs });
            }
        }
        out.total_seconds = total?;
        Some(out)
    }
}

/// Contiguous laps: each lap closes where the previous one ended.
struct Stopwatch {
    start: Instant,
    last: Instant,
    profile: TimingProfile,
}

impl Stopwatch {
    fn new() -> Self {
        let now = Instant::now();
        Self { start: now, last: now, profile: TimingProfile::default() }
    }

    fn lap(&mut self, module: &str) {
        let now = Instant::now();
        let seconds = (now - self.last).as_secs_f64();
        log::info!("{module}: {seconds:.3} s");
        self.profile.modules.push(ModuleTime { module: module.to_string(), seconds });
        self.last = now;
    }

    fn finish(mut self) -> TimingProfile {
        self.profile.total_seconds = (self.last - self.start).as_secs_f64();
        self.profile
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldOutput {
    pub embeddings_init: Embeddings,
    pub embeddings: Embeddings,
    pub coords2: Coords,
    pub coords3: Option<Coords>,
}

/// `n_neighbors` shrunk to fit a small graph; `None` below three nodes.
pub fn effective_neighbors(nodes: usize, requested: usize) -> Option<usize> {
    (nodes >= 3).then(|| requested.min(nodes - 1).max(2))
}

fn layout(h: &Embeddings, cfg: &ManifoldConfig, components: usize) -> Result<Coords, ManifoldError> {
    match effective_neighbors(h.nrows(), cfg.n_neighbors) {
        Some(k) => project(h, &ManifoldConfig { n_neighbors: k, components, ..cfg.clone() }),
        None => Ok(Coords::zeros((h.nrows(), components))),
    }
}

/// Module 5: init, refine, project.
pub fn build_manifold(graph: &RelGraph, cfg: &LcmConfig) -> Result<ManifoldOutput, ManifoldError> {
    let encoder = HashedNgramEncoder::new(cfg.encoder.dim, cfg.encoder.seed);
    let (embeddings_init, embeddings) = gt_refine(graph, &cfg.gt, &encoder)?;
    let coords2 = layout(&embeddings, &cfg.manifold, 2)?;
    let coords3 = if cfg.slice.project_3d { Some(layout(&embeddings, &cfg.manifold, 3)?) } else { None };
    Ok(ManifoldOutput { embeddings_init, embeddings, coords2, coords3 })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub expansion: ExpansionStats,
    pub questions: GenerationTally,
    pub statements: GenerationTally,
    pub extraction: ExtractionTally,
}

/// Where a run's slice goes.
#[derive(Debug, Clone, Copy)]
pub enum Output<'a> {
    Discard,
    Dir(&'a Path),
    /// Published as the next revision of the slice id.
    Store(&'a SliceStore),
}

#[derive(Debug)]
pub struct PipelineRun {
    pub slice: Slice,
    pub report: PipelineReport,
    /// Present when the slice was written.
    pub manifest: Option<SliceManifest>,
}

/// Runs Modules 1–5 and writes the slice to `out`.
pub fn run_pipeline(cfg: &LcmConfig, oracle: &Oracle, out: Output<'_>) -> Result<PipelineRun, PipelineError> {
    cfg.validate()?;
    let mut clock = Stopwatch::new();

    let (topics, expansion) = expand_bfs(&cfg.slice.roots, &cfg.topics, oracle, None)?;
    topics.check_invariants().map_err(PipelineError::Invariant)?;
    clock.lap(MODULE_LABELS[0]);

    let phrase = &cfg.topics.domain_phrase;
    let (questions, q_tally) = generate_questions(&topics, &cfg.corpus.questions, phrase, oracle, None)?;
    clock.lap(MODULE_LABELS[1]);

    let (statements, s_tally) =
        generate_statements(&topics, &cfg.corpus.statements, phrase, &questions, oracle, None)?;
    clock.lap(MODULE_LABELS[2]);

    let corpus = Corpus { questions, statements };
    let (triples, extraction) = extract_corpus(&corpus, &cfg.slice.domain_label);
    let graph = RelGraph::build(&triples);
    clock.lap(MODULE_LABELS[3]);

    let m = build_manifold(&graph, cfg)?;
    clock.lap(MODULE_LABELS[4]);

    let mut slice = Slice {
        id: cfg.slice.id.clone(),
        config: cfg.clone(),
        topics,
        corpus,
        triples,
        graph,
        embeddings_init: m.embeddings_init,
        embeddings: m.embeddings,
        coords2: m.coords2,
        coords3: m.coords3,
        timing: None,
        revision: 0,
    };
    let report = PipelineReport { expansion, questions: q_tally, statements: s_tally, extraction };

    let (dir, store) = match out {
        Output::Discard => {
            slice.timing = Some(clock.finish());
            return Ok(PipelineRun { slice, report, manifest: None });
        }
        Output::Dir(d) => (d.to_path_buf(), None),
        Output::Store(s) => {
            let (d, rev) = s.prepare(&slice.id, 0)?;
            slice.revision = rev - 1;
            (d, Some(s))
        }
    };
    let written = write_artifacts(&dir, &slice)?;
    clock.lap(MODULE_LABELS[5]);
    slice.timing = Some(clock.finish());
    let manifest = finish_slice(&dir, &mut slice, written)?;
    if let Some(s) = store {
        s.commit(&slice.id, manifest.revision)?;
    }
    Ok(PipelineRun { slice, report, manifest: Some(manifest) })
}
