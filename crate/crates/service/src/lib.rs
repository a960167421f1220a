//! HTTP facade over a slice store.
//!
//! | Method | Path | Body |
//! |---|---|---|
//! | GET | `/health` | status |
//! | GET | `/slices` | slice summaries, with `corrupt` set for slices failing hash checks |
//! | GET | `/slices/{id}` | manifest of the published revision |
//! | GET | `/slices/{id}/manifold?dims=2\|3&cursor=&limit=` | node coordinates in id order |
//! | GET | `/slices/{id}/nodes/{node}/ego?hops=` | local causal graph with activations |
//! | POST | `/slices/{id}/deepen` | queue a region-scoped active loop |
//! | GET | `/jobs`, `/jobs/{id}` | job status |
//!
//! A node's activation is the L2 norm of its refined embedding minus its
//! initial embedding, i.e. how far message passing moved it.

mod error;
pub mod jobs;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;

use lcm_core::explore::{frontier_topics, topics_near};
use lcm_core::graph::NodeId;
use lcm_core::manifold::row_norm;
use lcm_core::oracle::OracleConfig;
use lcm_core::slice::{node_depths, Slice, SliceManifest, SliceStore, SliceSummary};

pub use error::ApiError;
pub use jobs::{DeepenRequest, DeltaSummary, JobQueue, JobState, JobStatus, Region};

/// A loaded revision plus the per-node metadata every read endpoint needs.
struct SliceView {
    slice: Slice,
    degrees: Vec<usize>,
    depths: Vec<Option<u32>>,
    domains: Vec<Option<String>>,
}

impl SliceView {
    fn new(slice: Slice) -> Self {
        let degrees = slice.graph.degrees();
        let depths = node_depths(&slice);
        let domains = (0..slice.graph.node_count() as NodeId).map(|v| slice.graph.node_domain(v)).collect();
        Self { slice, degrees, depths, domains }
    }
}

type ViewCache = Mutex<HashMap<String, (u64, Arc<SliceView>)>>;

#[derive(Clone)]
pub struct AppState {
    store: Arc<SliceStore>,
    jobs: Arc<JobQueue>,
    oracle: Option<Arc<OracleConfig>>,
    cache: Arc<ViewCache>,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub store_dir: PathBuf,
    /// Used for deepen jobs instead of each slice's own oracle settings.
    pub oracle: Option<OracleConfig>,
}

impl AppState {
    /// Opens the store and job queue. Call [`AppState::resume`] from inside a
    /// runtime to restart jobs left queued by a previous process.
    pub fn open(cfg: &ServiceConfig) -> Result<(Self, Vec<u64>), String> {
        let store = SliceStore::open(&cfg.store_dir).map_err(|e| e.to_string())?;
        let (jobs, pending) = JobQueue::open(&cfg.store_dir)?;
        let state = Self {
            store: Arc::new(store),
            jobs: Arc::new(jobs),
            oracle: cfg.oracle.clone().map(Arc::new),
            cache: Arc::default(),
        };
        Ok((state, pending))
    }

    pub fn store(&self) -> &SliceStore {
        &self.store
    }

    pub fn jobs(&self) -> &JobQueue {
        &self.jobs
    }

    pub fn resume(&self, pending: Vec<u64>) {
        for id in pending {
            self.spawn_job(id);
        }
    }

    fn spawn_job(&self, id: u64) {
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            jobs::run_job(&state.store, &state.jobs, id, state.oracle.as_deref());
        });
    }

    async fn view(&self, id: &str) -> Result<Arc<SliceView>, ApiError> {
        let state = self.clone();
        let id = id.to_string();
        tokio::task::spawn_blocking(move || {
            let rev = state.store.current_revision(&id)?;
            if let Some((r, v)) = state.cache.lock().unwrap().get(&id) {
                if *r == rev {
                    return Ok(v.clone());
                }
            }
            let view = Arc::new(SliceView::new(load_revision(&state.store, &id, rev)?));
            state.cache.lock().unwrap().insert(id, (rev, view.clone()));
            Ok(view)
        })
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
    }
}

fn load_revision(store: &SliceStore, id: &str, rev: u64) -> Result<Slice, ApiError> {
    lcm_core::slice::load_slice(&store.revision_dir(id, rev)).map_err(ApiError::from)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/slices", get(list_slices))
        .route("/slices/{id}", get(get_manifest))
        .route("/slices/{id}/manifold", get(manifold))
        .route("/slices/{id}/nodes/{node}/ego", get(ego))
        .route("/slices/{id}/deepen", post(deepen))
        .route("/jobs", get(list_jobs))
        .route("/jobs/{id}", get(get_job))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// Opens the store, resumes pending jobs and serves on `addr`.
pub async fn run(addr: SocketAddr, cfg: ServiceConfig) -> Result<(), String> {
    let (state, pending) = AppState::open(&cfg)?;
    state.resume(pending);
    let listener = TcpListener::bind(addr).await.map_err(|e| format!("bind {addr}: {e}"))?;
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
    .map_err(|e| e.to_string())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let jobs = state.jobs.list();
    let active = jobs.iter().filter(|j| j.state.is_active()).count();
    Json(json!({ "status": "ok", "active_jobs": active }))
}

async fn list_slices(State(state): State<AppState>) -> Result<Json<Vec<SliceSummary>>, ApiError> {
    let store = state.store.clone();
    blocking(move || store.summaries().map_err(ApiError::from)).await.map(Json)
}

async fn get_manifest(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SliceManifest>, ApiError> {
    let store = state.store.clone();
    blocking(move || store.manifest(&id).map_err(ApiError::from)).await.map(Json)
}

#[derive(Debug, Deserialize)]
pub struct ManifoldQuery {
    pub dims: Option<usize>,
    pub cursor: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldNode {
    pub id: NodeId,
    pub phrase: String,
    pub degree: usize,
    pub domain: Option<String>,
    pub depth: Option<u32>,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPage {
    pub slice: String,
    pub revision: u64,
    pub dims: usize,
    pub total: usize,
    pub cursor: usize,
    /// Pass as `cursor` to fetch the next page; absent on the last page.
    pub next_cursor: Option<usize>,
    pub nodes: Vec<ManifoldNode>,
}

async fn manifold(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ManifoldQuery>,
) -> Result<Json<ManifoldPage>, ApiError> {
    let dims = q.dims.unwrap_or(2);
    if dims != 2 && dims != 3 {
        return Err(ApiError::BadRequest(format!("dims must be 2 or 3, got {dims}")));
    }
    if q.limit == Some(0) {
        return Err(ApiError::BadRequest("limit must be positive".into()));
    }
    let view = state.view(&id).await?;
    let s = &view.slice;
    let coords = match dims {
        2 => &s.coords2,
        _ => s.coords3.as_ref().ok_or_else(|| {
            ApiError::Conflict(format!(
                "slice {id} has no 3D layout; request dims=2 or rebuild it with slice.project_3d = true"
            ))
        })?,
    };
    let total = s.graph.node_count();
    let cursor = q.cursor.unwrap_or(0).min(total);
    let end = q.limit.map_or(total, |l| cursor.saturating_add(l).min(total));
    let nodes = (cursor..end)
        .map(|v| ManifoldNode {
            id: v as NodeId,
            phrase: s.graph.label(v as NodeId).to_string(),
            degree: view.degrees[v],
            domain: view.domains[v].clone(),
            depth: view.depths[v],
            coords: coords.row(v).to_vec(),
        })
        .collect();
    Ok(Json(ManifoldPage {
        slice: id,
        revision: s.revision,
        dims,
        total,
        cursor,
        next_cursor: (end < total).then_some(end),
        nodes,
    }))
}

#[derive(Debug, Deserialize)]
pub struct EgoQuery {
    pub hops: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoNode {
    pub id: NodeId,
    pub phrase: String,
    pub degree: usize,
    pub domain: Option<String>,
    pub activation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoEdge {
    pub head: NodeId,
    pub tail: NodeId,
    pub relation: String,
    pub domain: String,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoResponse {
    pub slice: String,
    pub revision: u64,
    pub center: NodeId,
    pub hops: u32,
    pub nodes: Vec<EgoNode>,
    pub edges: Vec<EgoEdge>,
}

async fn ego(
    State(state): State<AppState>,
    Path((id, node)): Path<(String, String)>,
    Query(q): Query<EgoQuery>,
) -> Result<Json<EgoResponse>, ApiError> {
    let hops = q.hops.unwrap_or(1);
    if hops == 0 {
        return Err(ApiError::BadRequest("hops must be positive".into()));
    }
    let view = state.view(&id).await?;
    let s = &view.slice;
    // A node is named by id or by phrase.
    let center = match node.parse::<NodeId>() {
        Ok(v) if (v as usize) < s.graph.node_count() => v,
        _ => s.graph.node_id(&node).ok_or_else(|| ApiError::NotFound(format!("unknown node {node:?}")))?,
    };
    let ego = s.graph.ego_graph(center, hops).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let nodes = ego
        .nodes
        .iter()
        .map(|&v| {
            let i = v as usize;
            EgoNode {
                id: v,
                phrase: s.graph.label(v).to_string(),
                degree: view.degrees[i],
                domain: view.domains[i].clone(),
                activation: row_norm((&s.embeddings.row(i) - &s.embeddings_init.row(i)).view()),
            }
        })
        .collect();
    let edges = ego
        .edges
        .into_iter()
        .map(|e| EgoEdge {
            head: e.head,
            tail: e.tail,
            relation: e.relation.as_str().to_string(),
            domain: e.domain,
            multiplicity: e.multiplicity,
        })
        .collect();
    Ok(Json(EgoResponse { slice: id, revision: s.revision, center, hops, nodes, edges }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accepted {
    pub job_id: u64,
    pub state: JobState,
    pub region_topics: Vec<String>,
}

async fn deepen(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<DeepenRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Accepted>), ApiError> {
    let Json(req) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    if req.budget == 0 {
        return Err(ApiError::BadRequest("budget must be at least 1".into()));
    }
    if let Some(named) = &req.slice {
        if *named != id {
            return Err(ApiError::BadRequest(format!("body names slice {named} but the path names {id}")));
        }
    }
    if let Some(w) = &req.weights {
        w.validate().map_err(|e| ApiError::BadRequest(e.to_string()))?;
    }
    if req.waves == Some(0) {
        return Err(ApiError::BadRequest("waves must be positive".into()));
    }
    let view = state.view(&id).await?;
    let s = &view.slice;
    let max_depth = s.config.explorer.max_depth;
    let resolved = match &req.region {
        Region::Ball { center, radius } => {
            if !radius.is_finite() || *radius <= 0.0 || center.iter().any(|x| !x.is_finite()) {
                return Err(ApiError::BadRequest("center must be finite and radius positive".into()));
            }
            let coords = match center.len() {
                2 => &s.coords2,
                3 => s.coords3.as_ref().ok_or_else(|| ApiError::Conflict(format!("slice {id} has no 3D layout")))?,
                n => return Err(ApiError::BadRequest(format!("center has {n} coordinates; expected 2 or 3"))),
            };
            topics_near(&s.topics, &s.graph, coords, center, *radius, max_depth)
        }
        Region::Topics { topics } => {
            let frontier: std::collections::BTreeSet<_> = frontier_topics(&s.topics, max_depth).into_iter().collect();
            let mut out = Vec::new();
            for t in topics {
                let node = s.topics.find(t).ok_or_else(|| ApiError::BadRequest(format!("unknown topic {t:?}")))?;
                if frontier.contains(&node.id) && !out.contains(&node.id) {
                    out.push(node.id);
                }
            }
            out
        }
    };
    if resolved.is_empty() {
        return Err(ApiError::Unprocessable("region contains no frontier topics".into()));
    }
    let labels: Vec<String> = resolved.iter().map(|&t| s.topics.nodes[t as usize].label.clone()).collect();
    let waves = req.waves.unwrap_or(s.config.explorer.waves);
    let job = state.jobs.submit(&id, req, labels.clone(), s.revision, waves)?;
    state.spawn_job(job.id);
    Ok((StatusCode::ACCEPTED, Json(Accepted { job_id: job.id, state: job.state, region_topics: labels })))
}

async fn list_jobs(State(state): State<AppState>) -> Json<Vec<JobStatus>> {
    Json(state.jobs.list())
}

async fn get_job(State(state): State<AppState>, Path(id): Path<u64>) -> Result<Json<JobStatus>, ApiError> {
    state.jobs.get(id).map(Json).ok_or_else(|| ApiError::NotFound(format!("unknown job {id}")))
}
