//! Stateful HTTP service around the alternative generator. A session holds a
//! network, its settings and an append-only list of rounds; solves run in the
//! background and clients poll the session status.

pub mod error;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex as StdMutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use gridmga_core::evaluation::{evaluate, rank_by_values, EvalContext, EvalFn};
use gridmga_core::hitl::{run_hitl_round, FeedbackSource, HitlParams, RankingFeedback};
use gridmga_core::mga::{generate_mga_set, AlternativeSet};
use gridmga_core::network::parse_native;
use gridmga_core::reconfig::RoundLabel;
use gridmga_core::{cases, Alternative, Network, ReconfigModel, Solver};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock, Semaphore};

pub use error::{Result, ServiceError};
use session::{round_alternatives, FailureInfo, Round, RoundAlternatives, SessionConfig, SessionDoc, SessionSummary};
use store::Store;

/// Environment variable naming the session data directory.
pub const DATA_DIR_ENV: &str = "GRIDMGA_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "gridmga-sessions";

struct Slot {
    doc: Mutex<SessionDoc>,
    /// Built on the first solve and reused by later rounds.
    model: StdMutex<Option<Arc<ReconfigModel>>>,
}

impl Slot {
    fn new(doc: SessionDoc) -> Arc<Self> {
        Arc::new(Self {
            doc: Mutex::new(doc),
            model: StdMutex::new(None),
        })
    }

    fn model(&self, network: &Network, config: &SessionConfig) -> gridmga_core::Result<Arc<ReconfigModel>> {
        let mut guard = self.model.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(m) = guard.as_ref() {
            return Ok(m.clone());
        }
        let m = Arc::new(ReconfigModel::build(Arc::new(network.clone()), config.switching.clone())?);
        *guard = Some(m.clone());
        Ok(m)
    }
}

#[derive(Clone)]
pub struct AppState {
    store: Store,
    sessions: Arc<RwLock<HashMap<String, Arc<Slot>>>>,
    workers: Arc<Semaphore>,
}

impl AppState {
    /// Opens the data directory and reloads every stored session.
    pub fn open(data_dir: impl Into<PathBuf>, workers: usize) -> Result<Self> {
        let store = Store::open(data_dir)?;
        let mut sessions = HashMap::new();
        for mut doc in store.load_all()? {
            doc.recover();
            sessions.insert(doc.id.clone(), Slot::new(doc));
        }
        log::info!("{} sessions loaded from {}", sessions.len(), store.dir().display());
        Ok(Self {
            store,
            sessions: Arc::new(RwLock::new(sessions)),
            workers: Arc::new(Semaphore::new(workers.max(1))),
        })
    }

    async fn slot(&self, id: &str) -> Result<Arc<Slot>> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }

    /// Runs `job` on the worker pool and records its outcome in the session.
    fn spawn(&self, slot: Arc<Slot>, job: Job) {
        let state = self.clone();
        tokio::spawn(async move {
            let outcome = match state.workers.clone().acquire_owned().await {
                Ok(_permit) => {
                    let s = slot.clone();
                    tokio::task::spawn_blocking(move || job.run(&s))
                        .await
                        .unwrap_or_else(|e| Err(failure(format!("solver task failed: {e}"))))
                }
                Err(e) => Err(failure(format!("worker pool closed: {e}"))),
            };
            let mut doc = slot.doc.lock().await;
            match outcome {
                Ok(out) => {
                    if let Some((f_star, lc)) = out.least_cost {
                        doc.f_star = Some(f_star);
                        doc.least_cost = Some(lc);
                    }
                    doc.finish(Ok(out.round));
                }
                Err(info) => {
                    log::warn!("session {}: {}", doc.id, info.message);
                    doc.finish(Err(info));
                }
            }
            if let Err(e) = state.store.save(&doc).await {
                log::error!("session {}: {e}", doc.id);
            }
        });
    }
}

fn failure(message: String) -> FailureInfo {
    FailureInfo {
        message,
        infeasibility: None,
    }
}

struct JobOutput {
    least_cost: Option<(f64, Alternative)>,
    round: Round,
}

/// Solver work prepared under the session lock and run without it.
struct Job {
    network: Network,
    config: SessionConfig,
    index: usize,
    seed: u64,
    kind: JobKind,
}

enum JobKind {
    Generate {
        count: usize,
        least_cost: Option<(f64, Alternative)>,
    },
    Feedback {
        set: AlternativeSet,
        ranking: RankingFeedback,
        params: HitlParams,
    },
}

impl Job {
    fn run(self, slot: &Slot) -> std::result::Result<JobOutput, FailureInfo> {
        self.solve(slot).map_err(|e| FailureInfo::from(&e))
    }

    fn solve(self, slot: &Slot) -> gridmga_core::Result<JobOutput> {
        let model = slot.model(&self.network, &self.config)?;
        let mut solver = Solver::with_default_backend(self.config.gap)?;
        solver.options.time_limit = self.config.time_limit;
        match self.kind {
            JobKind::Generate { count, least_cost } => {
                let (fresh, (f_star, _)) = match least_cost {
                    Some(lc) => (None, lc),
                    None => {
                        let lc = model.solve_least_cost(&solver)?;
                        (Some(lc.clone()), lc)
                    }
                };
                let set = generate_mga_set(&model, &solver, f_star, self.config.epsilon, count, self.seed)?;
                Ok(JobOutput {
                    least_cost: fresh,
                    round: Round {
                        index: self.index,
                        label: RoundLabel::Mga,
                        set,
                        ranking: None,
                        params: None,
                        feedback_weights: Vec::new(),
                        warnings: Vec::new(),
                    },
                })
            }
            JobKind::Feedback { set, ranking, params } => {
                let r = run_hitl_round(&model, &solver, &set, &ranking, &params, self.seed)?;
                Ok(JobOutput {
                    least_cost: None,
                    round: Round {
                        index: self.index,
                        label: params.variant.label(),
                        set: r.set,
                        ranking: Some(ranking),
                        params: Some(r.params),
                        feedback_weights: r.feedback_weights,
                        warnings: r.warnings,
                    },
                })
            }
        }
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T> {
    let body: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(body).map_err(|e| ServiceError::validation(format!("invalid request body: {e}")))
}

/// Body of `POST /sessions`. Exactly one of `case`, `network` and `case_text`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    /// Bundled case name.
    pub case: Option<String>,
    /// Network document in the native JSON format.
    pub network: Option<serde_json::Value>,
    /// Case file content (MATPOWER or native).
    pub case_text: Option<String>,
    /// Multiplier on every line limit.
    pub congestion_factor: Option<f64>,
    pub config: SessionConfig,
}

impl CreateSession {
    fn network(&self) -> Result<Network> {
        let net = match (&self.case, &self.network, &self.case_text) {
            (Some(name), None, None) => {
                if !cases::BUNDLED.contains(&name.as_str()) {
                    return Err(ServiceError::validation(format!(
                        "unknown case '{name}', bundled cases are {}",
                        cases::BUNDLED.join(", ")
                    )));
                }
                cases::bundled(name)?
            }
            (None, Some(doc), None) => parse_native(&doc.to_string())?,
            (None, None, Some(text)) => cases::load_text(text)?,
            _ => return Err(ServiceError::validation("give exactly one of case, network and case_text")),
        };
        net.validate().into_result()?;
        Ok(match self.congestion_factor {
            Some(f) => net.scale_line_capacities(f)?,
            None => net,
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateRequest {
    pub count: usize,
    /// Defaults to the round index plus one.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingRequest {
    /// Alternative positions in the round, best first.
    pub ranked_ids: Vec<usize>,
    pub params: HitlParams,
    pub seed: Option<u64>,
}

/// Ranks the round by an evaluation function instead of a person.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatedRankingRequest {
    pub fn_id: EvalFn,
    pub top_k: usize,
    #[serde(default)]
    pub params: HitlParams,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkInfo {
    pub name: String,
    pub buses: usize,
    pub branches: usize,
    pub generators: usize,
    pub splittable_substations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub status: session::SessionStatus,
}

async fn list_networks() -> Result<Json<Vec<NetworkInfo>>> {
    let infos = cases::BUNDLED
        .iter()
        .map(|name| {
            let n = cases::bundled(name)?;
            Ok(NetworkInfo {
                name: name.to_string(),
                buses: n.buses.len(),
                branches: n.branches.len(),
                generators: n.generators.len(),
                splittable_substations: n.substations.iter().filter(|s| s.splittable).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Json(infos))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>)> {
    let req: CreateSession = parse_body(&body)?;
    req.config.validate()?;
    let network = req.network()?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let doc = SessionDoc::new(id.clone(), network, req.config);
    state.store.save(&doc).await?;
    let status = doc.status;
    state.sessions.write().await.insert(id.clone(), Slot::new(doc));
    log::info!("session {id} created");
    Ok((StatusCode::CREATED, Json(Created { id, status })))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionSummary>> {
    let slot = state.slot(&id).await?;
    let doc = slot.doc.lock().await;
    Ok(Json(doc.summary()))
}

async fn generate_round(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionSummary>)> {
    let req: GenerateRequest = parse_body(&body)?;
    if req.count == 0 {
        return Err(ServiceError::validation("count must be at least 1"));
    }
    let slot = state.slot(&id).await?;
    let mut doc = slot.doc.lock().await;
    let previous = doc.status;
    doc.begin_generate()?;
    let index = doc.rounds.len();
    let job = Job {
        network: doc.network.clone(),
        config: doc.config.clone(),
        index,
        seed: req.seed.unwrap_or(index as u64 + 1),
        kind: JobKind::Generate {
            count: req.count,
            least_cost: doc.f_star.zip(doc.least_cost.clone()),
        },
    };
    start(&state, &slot, &mut doc, previous, job).await
}

async fn submit_ranking(
    State(state): State<AppState>,
    Path((id, k)): Path<(String, usize)>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionSummary>)> {
    let req: RankingRequest = parse_body(&body)?;
    let feedback = RankingFeedback {
        ranked_ids: req.ranked_ids,
        source: FeedbackSource::Human { session: id.clone() },
    };
    feedback_round(state, id, k, feedback, req.params, req.seed).await
}

async fn submit_simulated_ranking(
    State(state): State<AppState>,
    Path((id, k)): Path<(String, usize)>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionSummary>)> {
    let req: SimulatedRankingRequest = parse_body(&body)?;
    if req.top_k == 0 {
        return Err(ServiceError::validation("top_k must be at least 1"));
    }
    let ranked_ids = {
        let slot = state.slot(&id).await?;
        let doc = slot.doc.lock().await;
        let round = doc.round(k)?;
        let lc = doc
            .least_cost
            .as_ref()
            .ok_or_else(|| ServiceError::Internal("round without a least-cost solution".to_string()))?;
        let ctx = EvalContext::from_least_cost(&lc.topology);
        let opts = &doc.config.switching;
        let layout = gridmga_core::network::SwitchLayout::new(
            &doc.network,
            opts.allow_line_switching,
            opts.allow_busbar_splitting,
        );
        let values = round
            .set
            .alternatives
            .iter()
            .map(|a| evaluate(req.fn_id, a, &doc.network, &layout, &ctx))
            .collect::<gridmga_core::Result<Vec<_>>>()?;
        let mut ranked = rank_by_values(&values, req.fn_id.direction());
        ranked.truncate(req.top_k);
        ranked
    };
    let feedback = RankingFeedback {
        ranked_ids,
        source: FeedbackSource::Simulated { fn_id: req.fn_id },
    };
    feedback_round(state, id, k, feedback, req.params, req.seed).await
}

async fn feedback_round(
    state: AppState,
    id: String,
    k: usize,
    ranking: RankingFeedback,
    params: HitlParams,
    seed: Option<u64>,
) -> Result<(StatusCode, Json<SessionSummary>)> {
    params.validate()?;
    let slot = state.slot(&id).await?;
    let mut doc = slot.doc.lock().await;
    let previous = doc.status;
    doc.begin_feedback(k, &ranking.ranked_ids)?;
    let set = doc.rounds[k].set.clone();
    let job = Job {
        network: doc.network.clone(),
        config: doc.config.clone(),
        index: doc.rounds.len(),
        seed: seed.unwrap_or(set.seed),
        kind: JobKind::Feedback { set, ranking, params },
    };
    start(&state, &slot, &mut doc, previous, job).await
}

/// Persists the solving state, then hands the job to the worker pool.
async fn start(
    state: &AppState,
    slot: &Arc<Slot>,
    doc: &mut SessionDoc,
    previous: session::SessionStatus,
    job: Job,
) -> Result<(StatusCode, Json<SessionSummary>)> {
    if let Err(e) = state.store.save(doc).await {
        doc.status = previous;
        return Err(e);
    }
    state.spawn(slot.clone(), job);
    Ok((StatusCode::ACCEPTED, Json(doc.summary())))
}

async fn get_alternatives(
    State(state): State<AppState>,
    Path((id, k)): Path<(String, usize)>,
) -> Result<Json<RoundAlternatives>> {
    let slot = state.slot(&id).await?;
    let doc = slot.doc.lock().await;
    Ok(Json(round_alternatives(&doc, k)?))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/networks", get(list_networks))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/rounds", post(generate_round))
        .route("/sessions/{id}/rounds/{k}/alternatives", get(get_alternatives))
        .route("/sessions/{id}/rounds/{k}/ranking", post(submit_ranking))
        .route("/sessions/{id}/rounds/{k}/simulated-ranking", post(submit_simulated_ranking))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, data_dir: PathBuf, workers: usize) -> Result<()> {
    let state = AppState::open(data_dir, workers)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
