//! HTTP/JSON service hosting live alignment sessions, so a person can take
//! the user's seat in the loop.
//!
//! Sessions live in memory and are not durable across restarts. When a data
//! directory is configured, profiles and the population prior are written
//! through to it on user switches and session close.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use realign_core::alignment::{AlignmentSession, Execution, InteractionRecord, Phase, PopulationPrior, SessionConfig, UserProfile};
use realign_core::env::Trajectory;
use realign_core::interpreter::{InterpreterConfig, InterpreterKind};
use realign_core::learner::{build_policy_set, LearnerConfig, PolicySet, Scalarization};
use realign_core::preference::{PreferenceVector, ReturnVector};
use realign_core::rng::derive_seed;
use realign_core::selector::SelectorKind;
use realign_core::user::{SimulatedUser, UserSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::envs;
use crate::store::{validate_user_id, PolicyCache, ProfileStore};

/// Reactions are clamped to this magnitude before interpretation.
pub const REACTION_LIMIT: f64 = 5.0;

const SIMULATED_USER_STREAM: u64 = 0x5157;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Reactions are submitted through the API.
    #[default]
    HumanReaction,
    /// A simulated user reacts as part of each step.
    SimulatedUser,
}

// ---------------------------------------------------------------------------
// errors

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_path: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
                field_path: None,
            },
        }
    }

    fn at(mut self, field_path: impl Into<String>) -> Self {
        self.body.field_path = Some(field_path.into());
        self
    }

    fn validation(field_path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message).at(field_path)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }
}

impl From<realign_core::Error> for ApiError {
    fn from(e: realign_core::Error) -> Self {
        use realign_core::Error as E;
        match &e {
            E::PhaseViolation(_) => Self::new(StatusCode::CONFLICT, "phase-violation", e.to_string()),
            E::InvalidConfig { field, .. } => Self::validation(*field, e.to_string()),
            E::NonFinite(what) => Self::validation(*what, e.to_string()),
            _ => Self::internal(e.to_string()),
        }
    }
}

impl From<crate::Error> for ApiError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Config { path, message } => Self::validation(path, message),
            crate::Error::Core(core) => core.into(),
            other => Self::internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

/// Parses a JSON body, reporting the path of the offending field.
fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            ApiError::new(StatusCode::BAD_REQUEST, "malformed-json", inner.to_string())
        } else if path == "." {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", inner.to_string())
        } else {
            ApiError::validation(path, inner.to_string())
        }
    })?;
    de.end()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed-json", e.to_string()))?;
    Ok(value)
}

// ---------------------------------------------------------------------------
// request and response bodies

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub env: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub interpreter: InterpreterConfig,
    #[serde(default)]
    pub selector: SelectorKind,
    #[serde(default = "one")]
    pub review_every: usize,
    /// Identity of the human; ignored in simulated mode, where the
    /// simulated user's id is used.
    #[serde(default = "default_user")]
    pub user_id: String,
    #[serde(default)]
    pub simulated_user: Option<UserSpec>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn default_user() -> String {
    "user".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionRequest {
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchUserRequest {
    pub user_id: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontEntry {
    pub policy_id: usize,
    pub front_position: usize,
    pub returns: ReturnVector,
    pub anchor_weight: PreferenceVector,
    pub scalarization: Scalarization,
}

fn front_entries(set: &PolicySet) -> Vec<FrontEntry> {
    set.front_order
        .iter()
        .enumerate()
        .map(|(pos, &idx)| {
            let p = &set.policies[idx];
            FrontEntry {
                policy_id: p.id,
                front_position: pos,
                returns: p.return_vector.clone(),
                anchor_weight: p.anchor_weight.clone(),
                scalarization: p.scalarization,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionDescriptor {
    pub session_id: String,
    pub env_id: String,
    pub mode: Mode,
    pub phase: Phase,
    pub user_id: String,
    pub interpreter: InterpreterKind,
    pub selector: SelectorKind,
    pub objective_names: Vec<String>,
    pub front: Vec<FrontEntry>,
    pub policy_id: usize,
    pub xi: PreferenceVector,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExecutionReport {
    pub index: u64,
    pub policy_id: usize,
    /// Per-step discount used to accumulate the trajectory's return.
    pub discount: f64,
    pub trajectory: Trajectory,
}

impl ExecutionReport {
    fn new(exec: &Execution, discount: f64) -> Self {
        Self {
            index: exec.index,
            policy_id: exec.policy_id,
            discount,
            trajectory: exec.trajectory.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepResponse {
    pub session_id: String,
    pub phase: Phase,
    pub execution: ExecutionReport,
    /// The completed interaction, in simulated mode only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<InteractionRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReactionResponse {
    pub session_id: String,
    pub phase: Phase,
    /// Whether the submitted value was clamped before interpretation.
    pub clamped: bool,
    pub record: InteractionRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct PopulationSnapshot {
    pub count: usize,
    pub mean: PreferenceVector,
}

impl From<&PopulationPrior> for PopulationSnapshot {
    fn from(p: &PopulationPrior) -> Self {
        Self {
            count: p.count(),
            mean: p.mean.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileSnapshot {
    pub session_id: String,
    pub user_id: String,
    pub xi: PreferenceVector,
    pub preferred_policy: usize,
    pub interactions: u64,
    pub population: PopulationSnapshot,
}

/// Objective whose cumulative adjustment has the largest magnitude; a hint
/// that the user may care about something the objectives do not capture.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaHint {
    pub objective: usize,
    pub name: String,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSnapshot {
    pub session_id: String,
    pub env_id: String,
    pub mode: Mode,
    pub phase: Phase,
    pub user_id: String,
    pub policy_id: usize,
    pub xi: PreferenceVector,
    /// Interactions completed in this session, across all users.
    pub interactions: usize,
    /// Interactions completed by the active user's profile.
    pub profile_interactions: u64,
    pub known_users: Vec<String>,
    pub population: PopulationSnapshot,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending: Option<ExecutionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub largest_persistent_delta: Option<DeltaHint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditResponse {
    pub session_id: String,
    pub records: Vec<InteractionRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvSummary {
    pub id: String,
    pub num_objectives: usize,
    pub objective_names: Vec<String>,
    pub rows: u8,
    pub cols: u8,
    pub horizon: usize,
    pub discount: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvsResponse {
    pub envs: Vec<EnvSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontResponse {
    pub env_id: String,
    pub objective_names: Vec<String>,
    pub policies: Vec<FrontEntry>,
}

// ---------------------------------------------------------------------------
// state

struct SessionEntry {
    id: String,
    mode: Mode,
    session: AlignmentSession,
    user: Option<SimulatedUser>,
}

impl SessionEntry {
    fn env_id(&self) -> &str {
        &self.session.spec().id
    }

    fn snapshot(&self) -> StateSnapshot {
        let s = &self.session;
        let profile = s.current_profile();
        let mut known_users: Vec<String> = s.profiles().map(|p| p.user_id.clone()).collect();
        known_users.sort();
        StateSnapshot {
            session_id: self.id.clone(),
            env_id: self.env_id().into(),
            mode: self.mode,
            phase: s.phase(),
            user_id: profile.user_id.clone(),
            policy_id: s.selection().policy_id,
            xi: s.selection().xi.clone(),
            interactions: s.audit_log().len(),
            profile_interactions: profile.interactions,
            known_users,
            population: s.population().into(),
            pending: s.pending().map(|e| ExecutionReport::new(e, s.spec().discount)),
            largest_persistent_delta: profile.largest_persistent_delta().map(|(i, total)| DeltaHint {
                objective: i,
                name: s.spec().objective_names[i].clone(),
                total,
            }),
        }
    }

    fn profile_snapshot(&self) -> ProfileSnapshot {
        let p = self.session.current_profile();
        ProfileSnapshot {
            session_id: self.id.clone(),
            user_id: p.user_id.clone(),
            xi: p.xi.clone(),
            preferred_policy: p.preferred_policy,
            interactions: p.interactions,
            population: self.session.population().into(),
        }
    }
}

/// Settings fixed when the service starts.
#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub learner: LearnerConfig,
    /// Where profiles, the population prior and trained policy sets are
    /// kept; nothing is persisted without it.
    pub data_dir: Option<PathBuf>,
}

pub struct AppState {
    learner: LearnerConfig,
    sets: Mutex<HashMap<String, Arc<PolicySet>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionEntry>>>>,
    next_id: AtomicU64,
    profiles: Option<ProfileStore>,
    cache: Option<PolicyCache>,
    /// Serializes profile-store writes across sessions.
    store_lock: Mutex<()>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // a panic while holding a session lock leaves the session as it was at
    // the last completed operation; keep serving it
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Self {
        Self {
            learner: cfg.learner,
            sets: Mutex::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(0),
            profiles: cfg.data_dir.as_ref().map(ProfileStore::new),
            cache: cfg.data_dir.as_ref().map(|d| PolicyCache::new(d.join("policy-sets"))),
            store_lock: Mutex::new(()),
        }
    }

    /// Registers an already-trained policy set for its environment.
    pub fn with_policy_set(self, set: PolicySet) -> Self {
        lock(&self.sets).insert(set.env_id.clone(), Arc::new(set));
        self
    }

    async fn policy_set(&self, env_id: &str) -> Result<Arc<PolicySet>, ApiError> {
        let Some(spec) = envs::resolve(env_id) else {
            return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown-env", format!("unknown environment `{env_id}`")));
        };
        if let Some(set) = lock(&self.sets).get(env_id) {
            return Ok(Arc::clone(set));
        }
        let learner = self.learner.clone();
        let cache = self.cache.clone();
        let trained = tokio::task::spawn_blocking(move || match cache {
            Some(cache) => cache.load_or_train(&spec, &learner).map(|(set, _)| set),
            None => build_policy_set(&spec, &learner).map_err(crate::Error::from),
        })
        .await
        .map_err(|e| ApiError::internal(format!("training task failed: {e}")))??;
        Ok(Arc::clone(lock(&self.sets).entry(env_id.to_string()).or_insert_with(|| Arc::new(trained))))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionEntry>>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "session-not-found", format!("no session `{id}`")))
    }

    /// Writes a profile and folds it into the stored population prior.
    fn persist(&self, env_id: &str, profile: &UserProfile) -> Result<(), ApiError> {
        let Some(store) = &self.profiles else {
            return Ok(());
        };
        let _guard = lock(&self.store_lock);
        store.save_profile(env_id, profile)?;
        if profile.interactions > 0 {
            let mut population = store.load_population(env_id, profile.xi.len())?;
            population.contribute(&profile.user_id, &profile.xi)?;
            store.save_population(env_id, &population)?;
        }
        Ok(())
    }

    fn load_profile(&self, env_id: &str, user_id: &str) -> Result<Option<UserProfile>, ApiError> {
        match &self.profiles {
            Some(store) => {
                let _guard = lock(&self.store_lock);
                Ok(store.load_profile(env_id, user_id)?)
            }
            None => Ok(None),
        }
    }

    fn load_population(&self, env_id: &str, m: usize) -> Result<PopulationPrior, ApiError> {
        match &self.profiles {
            Some(store) => {
                let _guard = lock(&self.store_lock);
                Ok(store.load_population(env_id, m)?)
            }
            None => Ok(PopulationPrior::new(m)),
        }
    }
}

fn now_millis() -> Option<u64> {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .ok()
        .map(|d| d.as_millis() as u64)
}

// ---------------------------------------------------------------------------
// handlers

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<SessionDescriptor> {
    let req: CreateSessionRequest = parse_body(&body)?;
    let set = state.policy_set(&req.env).await?;
    let spec = envs::resolve(&req.env).expect("resolved by policy_set");
    let m = spec.num_objectives;
    req.interpreter.validate(m).map_err(|e| prefix_field(e.into(), "interpreter"))?;
    if req.review_every == 0 {
        return Err(ApiError::validation("review_every", "must be at least 1"));
    }
    let (user_id, user) = match (req.mode, &req.simulated_user) {
        (Mode::HumanReaction, Some(_)) => {
            return Err(ApiError::validation("simulated_user", "only allowed in simulated-user mode"));
        }
        (Mode::HumanReaction, None) => (req.user_id.clone(), None),
        (Mode::SimulatedUser, None) => {
            return Err(ApiError::validation("simulated_user", "required in simulated-user mode"));
        }
        (Mode::SimulatedUser, Some(spec_u)) => {
            if spec_u.true_utility.num_objectives() != m {
                return Err(ApiError::validation(
                    "simulated_user.true_utility",
                    format!("expected {m} objectives, got {}", spec_u.true_utility.num_objectives()),
                ));
            }
            let user = SimulatedUser::new(spec_u.clone(), derive_seed(req.seed, &[SIMULATED_USER_STREAM]))
                .map_err(|e| prefix_field(e.into(), "simulated_user"))?;
            (spec_u.user_id.clone(), Some(user))
        }
    };
    validate_user_id(&user_id).map_err(|e| prefix_field(e.into(), if user.is_some() { "simulated_user" } else { "" }))?;

    let population = state.load_population(&spec.id, m)?;
    let config = SessionConfig {
        interpreter: req.interpreter.clone(),
        selector: req.selector,
        review_every: req.review_every,
        seed: req.seed,
    };
    let mut session = AlignmentSession::new(spec.clone(), set, config, population, &user_id)?;
    if let Some(profile) = state.load_profile(&spec.id, &user_id)? {
        session.insert_profile(profile).map_err(|e| {
            ApiError::new(StatusCode::CONFLICT, "stale-profile", format!("stored profile does not fit the policy set: {e}"))
        })?;
    }

    let id = format!("s{:06}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let descriptor = SessionDescriptor {
        session_id: id.clone(),
        env_id: spec.id.clone(),
        mode: req.mode,
        phase: session.phase(),
        user_id,
        interpreter: req.interpreter.kind,
        selector: req.selector,
        objective_names: spec.objective_names.clone(),
        front: front_entries(session.policy_set()),
        policy_id: session.selection().policy_id,
        xi: session.selection().xi.clone(),
    };
    let entry = SessionEntry {
        id: id.clone(),
        mode: req.mode,
        session,
        user,
    };
    state
        .sessions
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .insert(id, Arc::new(Mutex::new(entry)));
    Ok(Json(descriptor))
}

fn prefix_field(mut e: ApiError, prefix: &str) -> ApiError {
    if !prefix.is_empty() {
        e.body.field_path = Some(match e.body.field_path.take() {
            Some(p) if !p.is_empty() => format!("{prefix}.{p}"),
            _ => prefix.to_string(),
        });
    }
    e
}

async fn step(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<StepResponse> {
    let handle = state.session(&id)?;
    let mut guard = lock(&handle);
    let entry = &mut *guard;
    let discount = entry.session.spec().discount;
    let execution = ExecutionReport::new(entry.session.execute()?, discount);
    let record = match entry.user.as_mut() {
        Some(user) => {
            let front = entry.session.policy_set().returns();
            let observed = &execution.trajectory.ret;
            let reaction = user.react(observed, &front)?;
            let regret = user.true_regret(observed, &front)?;
            Some(entry.session.review_at(reaction.value, Some(regret), now_millis())?)
        }
        None => None,
    };
    Ok(Json(StepResponse {
        session_id: id,
        phase: entry.session.phase(),
        execution,
        record,
    }))
}

async fn submit_reaction(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<ReactionResponse> {
    let handle = state.session(&id)?;
    let req: ReactionRequest = parse_body(&body)?;
    if !req.value.is_finite() {
        return Err(ApiError::validation("value", "reaction must be finite"));
    }
    let mut entry = lock(&handle);
    if entry.mode == Mode::SimulatedUser {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "phase-violation",
            "simulated-user sessions react on their own; call step instead",
        ));
    }
    let value = req.value.clamp(-REACTION_LIMIT, REACTION_LIMIT);
    let record = entry.session.review_at(value, None, now_millis())?;
    Ok(Json(ReactionResponse {
        session_id: id,
        phase: entry.session.phase(),
        clamped: value != req.value,
        record,
    }))
}

async fn switch_user(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<ProfileSnapshot> {
    let handle = state.session(&id)?;
    let req: SwitchUserRequest = parse_body(&body)?;
    validate_user_id(&req.user_id).map_err(|e| ApiError::validation("user_id", e.to_string()))?;
    let mut entry = lock(&handle);
    if entry.mode == Mode::SimulatedUser {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "mode-conflict",
            "the user of a simulated-user session is fixed",
        ));
    }
    if entry.session.phase() != Phase::AwaitingStep {
        // let the core report the precise violation before touching the store
        entry.session.switch_user(&req.user_id)?;
    }
    let env_id = entry.env_id().to_string();
    let previous = entry.session.current_profile().clone();
    if previous.user_id != req.user_id && entry.session.profile(&req.user_id).is_none() {
        if let Some(stored) = state.load_profile(&env_id, &req.user_id)? {
            entry.session.insert_profile(stored).map_err(|e| {
                ApiError::new(StatusCode::CONFLICT, "stale-profile", format!("stored profile does not fit the policy set: {e}"))
            })?;
        }
    }
    entry.session.switch_user(&req.user_id)?;
    if previous.user_id != req.user_id {
        state.persist(&env_id, &previous)?;
    }
    Ok(Json(entry.profile_snapshot()))
}

async fn close_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<StateSnapshot> {
    let handle = state.session(&id)?;
    let mut entry = lock(&handle);
    if entry.session.phase() != Phase::Closed {
        entry.session.close()?;
        let env_id = entry.env_id().to_string();
        state.persist(&env_id, entry.session.current_profile())?;
    }
    Ok(Json(entry.snapshot()))
}

async fn get_state(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<StateSnapshot> {
    let handle = state.session(&id)?;
    let entry = lock(&handle);
    Ok(Json(entry.snapshot()))
}

async fn get_audit(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<AuditResponse> {
    let handle = state.session(&id)?;
    let entry = lock(&handle);
    Ok(Json(AuditResponse {
        session_id: id,
        records: entry.session.audit_log().to_vec(),
    }))
}

async fn list_envs() -> Json<EnvsResponse> {
    let envs = envs::DEFAULT_ENVS
        .iter()
        .filter_map(|id| envs::resolve(id))
        .map(|s| EnvSummary {
            id: s.id,
            num_objectives: s.num_objectives,
            objective_names: s.objective_names,
            rows: s.rows,
            cols: s.cols,
            horizon: s.horizon,
            discount: s.discount,
        })
        .collect();
    Json(EnvsResponse { envs })
}

async fn get_front(State(state): State<Arc<AppState>>, UrlPath(env): UrlPath<String>) -> ApiResult<FrontResponse> {
    let set = state.policy_set(&env).await?;
    let spec = envs::resolve(&env).expect("resolved by policy_set");
    Ok(Json(FrontResponse {
        env_id: spec.id,
        objective_names: spec.objective_names,
        policies: front_entries(&set),
    }))
}

/// Builds the API router; static UI assets are served from `static_dir`
/// for any path the API does not claim.
pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/step", post(step))
        .route("/api/sessions/{id}/reaction", post(submit_reaction))
        .route("/api/sessions/{id}/user", post(switch_user))
        .route("/api/sessions/{id}/close", post(close_session))
        .route("/api/sessions/{id}/state", get(get_state))
        .route("/api/sessions/{id}/audit", get(get_audit))
        .route("/api/envs", get(list_envs))
        .route("/api/front/{env}", get(get_front))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until interrupted.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir.as_deref()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
