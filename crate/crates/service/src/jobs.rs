//! Persistent deepen-job queue. Every state change is written to
//! `jobs.json` before it becomes visible.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use lcm_core::explore::{active_loop_scoped, UtilityWeights, WaveLog};
use lcm_core::oracle::{Budget, Oracle, OracleConfig};
use lcm_core::slice::SliceStore;

use crate::error::ApiError;

pub const JOBS_FILE: &str = "jobs.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    fn rank(self) -> u8 {
        match self {
            Self::Queued => 0,
            Self::Running => 1,
            Self::Done | Self::Failed => 2,
        }
    }

    pub fn is_active(self) -> bool {
        matches!(self, Self::Queued | Self::Running)
    }
}

/// Where to deepen: a ball in manifold space or named topics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Topics { topics: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepenRequest {
    /// Optional; must match the path when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
    pub region: Region,
    pub budget: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<UtilityWeights>,
    /// Overrides the slice's configured wave count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waves: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub topics_before: usize,
    pub topics_after: usize,
    pub triples_before: usize,
    pub triples_after: usize,
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub edges_before: usize,
    pub edges_after: usize,
    /// Phrases present in the new revision but not the base one.
    pub new_nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: u64,
    pub slice: String,
    pub state: JobState,
    pub request: DeepenRequest,
    /// Topic labels the region resolved to at submission.
    pub region_topics: Vec<String>,
    pub base_revision: u64,
    pub waves_total: usize,
    pub waves_done: usize,
    pub calls_used: u64,
    pub delta: DeltaSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_revision: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub submitted: String,
    pub updated: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Jobs {
    next_id: u64,
    jobs: BTreeMap<u64, JobStatus>,
}

pub struct JobQueue {
    path: PathBuf,
    inner: Mutex<Jobs>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

impl JobQueue {
    /// Loads `dir/jobs.json`. Jobs that were running when the previous
    /// process stopped are marked failed; queued ones are returned for
    /// resumption.
    pub fn open(dir: &Path) -> Result<(Self, Vec<u64>), String> {
        let path = dir.join(JOBS_FILE);
        let mut jobs: Jobs = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Jobs::default(),
            Err(e) => return Err(format!("{}: {e}", path.display())),
        };
        let mut resume = Vec::new();
        for job in jobs.jobs.values_mut() {
            match job.state {
                JobState::Running => {
                    job.state = JobState::Failed;
                    job.error = Some("interrupted by a service restart".into());
                    job.updated = now();
                }
                JobState::Queued => resume.push(job.id),
                _ => {}
            }
        }
        let q = Self { path, inner: Mutex::new(jobs) };
        q.persist(&q.inner.lock().unwrap())?;
        Ok((q, resume))
    }

    fn persist(&self, jobs: &Jobs) -> Result<(), String> {
        let tmp = self.path.with_extension("json.tmp");
        let bytes = serde_json::to_vec_pretty(jobs).map_err(|e| e.to_string())?;
        fs::write(&tmp, bytes).map_err(|e| format!("{}: {e}", tmp.display()))?;
        fs::rename(&tmp, &self.path).map_err(|e| format!("{}: {e}", self.path.display()))
    }

    pub fn get(&self, id: u64) -> Option<JobStatus> {
        self.inner.lock().unwrap().jobs.get(&id).cloned()
    }

    pub fn list(&self) -> Vec<JobStatus> {
        self.inner.lock().unwrap().jobs.values().cloned().collect()
    }

    /// Queues a job unless the slice already has an active one.
    pub fn submit(
        &self,
        slice: &str,
        request: DeepenRequest,
        region_topics: Vec<String>,
        base_revision: u64,
        waves_total: usize,
    ) -> Result<JobStatus, ApiError> {
        let mut jobs = self.inner.lock().unwrap();
        if let Some(active) = jobs.jobs.values().find(|j| j.slice == slice && j.state.is_active()) {
            return Err(ApiError::Conflict(format!("slice {slice} already has job {} in progress", active.id)));
        }
        jobs.next_id += 1;
        let id = jobs.next_id;
        let stamp = now();
        let job = JobStatus {
            id,
            slice: slice.to_string(),
            state: JobState::Queued,
            request,
            region_topics,
            base_revision,
            waves_total,
            waves_done: 0,
            calls_used: 0,
            delta: DeltaSummary::default(),
            new_revision: None,
            error: None,
            submitted: stamp.clone(),
            updated: stamp,
        };
        jobs.jobs.insert(id, job.clone());
        if let Err(e) = self.persist(&jobs) {
            jobs.jobs.remove(&id);
            return Err(ApiError::Internal(format!("could not record job: {e}")));
        }
        Ok(job)
    }

    /// Applies `f` to a job and persists. A state may only move forward.
    pub fn update(&self, id: u64, f: impl FnOnce(&mut JobStatus)) {
        let mut jobs = self.inner.lock().unwrap();
        let Some(job) = jobs.jobs.get_mut(&id) else { return };
        let before = job.state;
        f(job);
        debug_assert!(job.state.rank() >= before.rank(), "job {id} moved from {before:?} to {:?}", job.state);
        job.updated = now();
        if let Err(e) = self.persist(&jobs) {
            log::error!("could not persist job {id}: {e}");
        }
    }
}

/// Runs one queued job to completion. Blocking.
pub fn run_job(store: &SliceStore, queue: &JobQueue, id: u64, oracle_override: Option<&OracleConfig>) {
    let Some(job) = queue.get(id) else { return };
    queue.update(id, |j| j.state = JobState::Running);
    match execute(store, queue, &job, oracle_override) {
        Ok((delta, revision)) => queue.update(id, |j| {
            j.delta = delta;
            j.new_revision = Some(revision);
            j.state = JobState::Done;
        }),
        Err(e) => {
            log::warn!("job {id} failed: {e}");
            queue.update(id, |j| {
                j.error = Some(e);
                j.state = JobState::Failed;
            })
        }
    }
}

fn execute(
    store: &SliceStore,
    queue: &JobQueue,
    job: &JobStatus,
    oracle_override: Option<&OracleConfig>,
) -> Result<(DeltaSummary, u64), String> {
    let mut slice = store.load(&job.slice).map_err(|e| e.to_string())?;
    let mut cfg = slice.config.explorer.clone();
    if let Some(w) = job.request.weights {
        cfg.weights = w;
    }
    cfg.waves = job.waves_total;
    let scope: BTreeSet<_> = job.region_topics.iter().filter_map(|t| slice.topics.find(t)).map(|n| n.id).collect();
    if scope.is_empty() {
        return Err("none of the region's topics exist in the current revision".into());
    }
    let oracle = Oracle::new(oracle_override.cloned().unwrap_or_else(|| slice.config.oracle.clone()))
        .map_err(|e| e.to_string())?;
    let budget = Budget::new(job.request.budget);
    let mut delta = DeltaSummary {
        topics_before: slice.topics.len(),
        topics_after: slice.topics.len(),
        triples_before: slice.triples.len(),
        triples_after: slice.triples.len(),
        nodes_before: slice.graph.node_count(),
        nodes_after: slice.graph.node_count(),
        edges_before: slice.graph.edge_count(),
        edges_after: slice.graph.edge_count(),
        new_nodes: Vec::new(),
    };
    let old_labels: BTreeSet<String> = slice.graph.labels().iter().cloned().collect();
    let progress = |log: &WaveLog| {
        queue.update(job.id, |j| {
            j.waves_done = log.wave + 1;
            j.calls_used = job.request.budget - log.budget_remaining;
            j.delta.topics_after = log.topics_after;
            j.delta.triples_after = log.triples_after;
            j.delta.nodes_after = log.nodes_after;
            j.delta.edges_after = log.edges_after;
        })
    };
    let mut progress = progress;
    active_loop_scoped(&mut slice, &cfg, &oracle, &budget, &[], Some(&scope), &mut progress)
        .map_err(|e| e.to_string())?;
    delta.topics_after = slice.topics.len();
    delta.triples_after = slice.triples.len();
    delta.nodes_after = slice.graph.node_count();
    delta.edges_after = slice.graph.edge_count();
    delta.new_nodes = slice.graph.labels().iter().filter(|l| !old_labels.contains(*l)).cloned().collect();
    let calls = job.request.budget - budget.remaining();
    queue.update(job.id, |j| j.calls_used = calls);
    let manifest = store.publish(&mut slice).map_err(|e| e.to_string())?;
    Ok((delta, manifest.revision))
}
