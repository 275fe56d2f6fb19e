//! HTTP API and the tick stream.

use std::collections::{HashMap, HashSet};
use std::path::{Component, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{mpsc, Notify};

use tacticforge_core::domain::{DemonstrationTrace, ExecutionTrace};
use tacticforge_core::dsl::{parse, print, ApiRegistry, BehaviorProgram};
use tacticforge_core::fixtures;
use tacticforge_core::fsm::compile;
use tacticforge_core::grounding::{ground, ground_feedback, ground_flow_feedback, GroundedTranscript};
use tacticforge_core::metrics::{export_json, extract_flow, minimize, DecisionFlowGraph};
use tacticforge_core::sim::{self, Scenario};
use tacticforge_core::synth::{
    self, apply_structured_edit, diff_programs, fallback_synthesize, EchoClient, EditOp, FeedbackKind, FeedbackSession,
    GenClient, Provenance, RepairInput, SynthError,
};

use crate::config::Config;
use crate::store::{ProgramVersion, RunMeta, Session, Store, StoreError, StoredFeedback};

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Conflict(String),
    BadGateway { message: String, provenance: Option<Provenance> },
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({ "error": m })),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, json!({ "error": m })),
            ApiError::BadGateway { message, provenance } => {
                (StatusCode::BAD_GATEWAY, json!({ "error": message, "provenance": provenance }))
            }
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (status, [(header::CONTENT_TYPE, "application/json")], body.to_string()).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound { .. } => ApiError::NotFound(e.to_string()),
            StoreError::Conflict(m) => ApiError::Conflict(m),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<SynthError> for ApiError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Client { .. } | SynthError::Exhausted { .. } => {
                ApiError::BadGateway { message: e.to_string(), provenance: e.provenance().cloned() }
            }
            other => ApiError::BadRequest(other.to_string()),
        }
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_text(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn json_of<T: Serialize>(v: &T) -> Response {
    json_text(serde_json::to_string_pretty(v).expect("response serializes"))
}

/// Bodies are parsed by hand so every schema violation is a 400.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

fn blocking_err(e: tokio::task::JoinError) -> ApiError {
    ApiError::Internal(e.to_string())
}

#[derive(Debug, Default)]
struct Ctl {
    paused: bool,
    /// Next tick the stream will send.
    cursor: u64,
}

/// Server-side playback state of one run.
#[derive(Default)]
pub struct RunControl {
    ctl: Mutex<Ctl>,
    wake: Notify,
    streaming: AtomicBool,
}

impl RunControl {
    fn lock(&self) -> MutexGuard<'_, Ctl> {
        self.ctl.lock().expect("run control lock")
    }
}

struct Inner {
    cfg: Config,
    store: Mutex<Store>,
    live: Arc<dyn GenClient>,
    repairs: Mutex<HashSet<String>>,
    controls: Mutex<HashMap<String, Arc<RunControl>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(cfg: Config, store: Store, live: Arc<dyn GenClient>) -> Self {
        AppState(Arc::new(Inner {
            cfg,
            store: Mutex::new(store),
            live,
            repairs: Mutex::new(HashSet::new()),
            controls: Mutex::new(HashMap::new()),
        }))
    }

    fn store(&self) -> MutexGuard<'_, Store> {
        self.0.store.lock().expect("store lock")
    }

    fn control(&self, run: &str) -> Arc<RunControl> {
        self.0.controls.lock().expect("controls lock").entry(run.to_string()).or_default().clone()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/demos", post(add_demo))
        .route("/sessions/{id}/synthesize", post(synthesize))
        .route("/sessions/{id}/runs", post(start_run))
        .route("/sessions/{id}/feedback", post(flow_feedback))
        .route("/sessions/{id}/repair", post(repair))
        .route("/demos/{id}", get(get_demo))
        .route("/scenarios/{id}", get(get_scenario))
        .route("/programs/{v}", get(get_version))
        .route("/programs/{v}/flow", get(get_flow))
        .route("/programs/{v}/diff/{w}", get(get_diff))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/trace", get(get_trace))
        .route("/runs/{id}/stream", get(stream))
        .route("/runs/{id}/control", post(control))
        .route("/runs/{id}/feedback", post(run_feedback))
        .route("/feedback/{id}", get(get_feedback))
        .fallback(static_file)
        .with_state(state)
}

pub fn registry(id: &str) -> Result<ApiRegistry, ApiError> {
    match id {
        "soccer" => Ok(ApiRegistry::soccer()),
        "manufacturing" => Ok(ApiRegistry::manufacturing()),
        other => Err(ApiError::BadRequest(format!("unknown registry {other}"))),
    }
}

fn scenario(id: &str) -> Result<Scenario, ApiError> {
    fixtures::scenario(id).ok_or_else(|| ApiError::BadRequest(format!("unknown scenario {id}")))
}

fn program_of(v: &ProgramVersion, reg: &ApiRegistry) -> Result<BehaviorProgram, ApiError> {
    parse(&v.source, reg).map_err(|e| ApiError::Internal(format!("stored version {} no longer parses: {e}", v.id)))
}

/// A version plus the registry of the session it belongs to.
fn load_version(store: &Store, id: &str) -> Result<(ProgramVersion, ApiRegistry), ApiError> {
    let v = store.version(id)?;
    let reg = registry(&store.session(&v.session)?.registry)?;
    Ok((v, reg))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    #[serde(default = "soccer")]
    registry: String,
    scenario: String,
}

fn soccer() -> String {
    "soccer".into()
}

async fn create_session(State(st): State<AppState>, bytes: Bytes) -> ApiResult {
    let req: NewSession = body(&bytes)?;
    registry(&req.registry)?;
    if req.registry == "soccer" {
        scenario(&req.scenario)?;
    }
    let s = st.store().create_session(&req.registry, &req.scenario)?;
    Ok(json_of(&s))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    Ok(json_of(st.store().session(&id)?))
}

async fn add_demo(State(st): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let text = std::str::from_utf8(&bytes).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let demo = DemonstrationTrace::from_json(text).map_err(|e| ApiError::BadRequest(format!("invalid demonstration: {e}")))?;
    let demo_id = st.store().put_demo(&id, &demo)?;
    Ok(json_of(&json!({ "id": demo_id })))
}

async fn get_demo(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    Ok(json_text(st.store().demo(&id)?.to_json()))
}

async fn get_scenario(Path(id): Path<String>) -> ApiResult {
    let s = fixtures::scenario(&id).ok_or_else(|| ApiError::NotFound(format!("no scenario {id}")))?;
    Ok(json_text(s.to_json()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ClientKind {
    Stub,
    Live,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthesizeReq {
    client: ClientKind,
    #[serde(default)]
    seed: u64,
}

fn demos_of(store: &Store, s: &Session) -> Result<Vec<DemonstrationTrace>, ApiError> {
    s.demos.iter().map(|d| store.demo(d).map_err(ApiError::from)).collect()
}

async fn synthesize(State(st): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: SynthesizeReq = body(&bytes)?;
    let (session, demos) = {
        let store = st.store();
        let s = store.session(&id)?.clone();
        let demos = demos_of(&store, &s)?;
        (s, demos)
    };
    if demos.is_empty() {
        return Err(ApiError::BadRequest(format!("session {id} has no demonstrations")));
    }
    let reg = registry(&session.registry)?;
    let live = st.0.live.clone();
    let attempts = st.0.cfg.client.attempts;
    let (program, prov) = tokio::task::spawn_blocking(move || match req.client {
        ClientKind::Stub => fallback_synthesize(&demos, &reg).map(|p| {
            let prov = Provenance {
                operation: "synthesize".into(),
                template: "fallback".into(),
                seed: req.seed,
                attempts: vec![],
                diff: None,
                note: Some("deterministic fallback synthesizer".into()),
            };
            (p, prov)
        }),
        ClientKind::Live => {
            let transcripts: Vec<GroundedTranscript> = demos.iter().map(ground).collect();
            synth::synthesize(&transcripts, &reg, live.as_ref(), attempts, req.seed)
        }
    })
    .await
    .map_err(blocking_err)??;
    let v = st.store().append_version(&id, session.head(), &print(&program), prov)?;
    Ok(json_of(&v))
}

async fn get_version(State(st): State<AppState>, Path(v): Path<String>) -> ApiResult {
    Ok(json_of(&st.store().version(&v)?))
}

fn flow_of(v: &ProgramVersion, reg: &ApiRegistry) -> Result<DecisionFlowGraph, ApiError> {
    Ok(extract_flow(&compile(&program_of(v, reg)?)))
}

#[derive(Deserialize)]
struct FlowQuery {
    #[serde(default)]
    minimize: bool,
}

async fn get_flow(State(st): State<AppState>, Path(v): Path<String>, Query(q): Query<FlowQuery>) -> ApiResult {
    let (v, reg) = load_version(&st.store(), &v)?;
    let flow = flow_of(&v, &reg)?;
    Ok(json_text(export_json(&if q.minimize { minimize(&flow) } else { flow })))
}

async fn get_diff(State(st): State<AppState>, Path((v, w)): Path<(String, String)>) -> ApiResult {
    let store = st.store();
    let (a, ra) = load_version(&store, &v)?;
    let (b, rb) = load_version(&store, &w)?;
    Ok(json_of(&diff_programs(&program_of(&a, &ra)?, &program_of(&b, &rb)?)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunReq {
    seed: u64,
    #[serde(default)]
    scenario: Option<String>,
    #[serde(default)]
    version: Option<String>,
    #[serde(default)]
    max_ticks: Option<u64>,
}

async fn start_run(State(st): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: RunReq = body(&bytes)?;
    let (session, version) = {
        let store = st.store();
        let s = store.session(&id)?.clone();
        let vid = match req.version.as_deref().or(s.head()) {
            Some(v) => v.to_string(),
            None => return Err(ApiError::BadRequest(format!("session {id} has no program yet"))),
        };
        if !s.versions.contains(&vid) {
            return Err(ApiError::NotFound(format!("no program version {vid} in session {id}")));
        }
        let v = store.version(&vid)?;
        (s, v)
    };
    if session.registry != "soccer" {
        return Err(ApiError::BadRequest("runs need the soccer arena".into()));
    }
    let scenario_id = req.scenario.unwrap_or_else(|| session.scenario.clone());
    let sc = scenario(&scenario_id)?;
    let program = program_of(&version, &registry(&session.registry)?)?;
    let max_ticks = req.max_ticks.unwrap_or(st.0.cfg.max_ticks);
    let seed = req.seed;
    let trace = tokio::task::spawn_blocking(move || sim::run(&program, &sc, seed, max_ticks)).await.map_err(blocking_err)?;
    let meta = RunMeta {
        id: String::new(),
        session: id,
        version: version.id,
        scenario: scenario_id,
        seed,
        max_ticks,
        last_tick: 0,
    };
    let meta = st.store().put_run(meta, &trace)?;
    Ok(json_of(&meta))
}

fn playback(st: &AppState, run: &str) -> serde_json::Value {
    let c = st.control(run);
    let ctl = c.lock();
    json!({ "cursor": ctl.cursor, "paused": ctl.paused, "streaming": c.streaming.load(Ordering::SeqCst) })
}

async fn get_run(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let meta = st.store().run(&id)?.clone();
    Ok(json_of(&json!({ "run": meta, "playback": playback(&st, &id) })))
}

async fn get_trace(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    Ok(json_text(st.store().trace_text(&id)?))
}

/// One line of the tick stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamRecord {
    Header { run: String, id: String, program_id: String, scenario_id: String, seed: u64, dt: f64, last_tick: u64 },
    Tick {
        state: tacticforge_core::domain::WorldState,
        /// Captions that start on this tick.
        speaks: Vec<tacticforge_core::domain::SpeakRecord>,
        /// Actions that start on this tick, as recorded once they ended.
        actions: Vec<tacticforge_core::domain::ActionRecord>,
    },
    End { termination: tacticforge_core::domain::Termination },
}

/// Rebuilds a trace from a complete, unseeked stream.
pub fn reassemble(records: &[StreamRecord]) -> Option<ExecutionTrace> {
    let StreamRecord::Header { id, program_id, scenario_id, seed, dt, .. } = records.first()?.clone() else { return None };
    let mut t = ExecutionTrace {
        id,
        program_id,
        scenario_id,
        seed,
        dt,
        states: vec![],
        actions: vec![],
        speaks: vec![],
        termination: tacticforge_core::domain::Termination::MaxTicks { tick: 0 },
    };
    for r in &records[1..] {
        match r.clone() {
            StreamRecord::Tick { state, speaks, actions } => {
                t.states.push(state);
                t.speaks.extend(speaks);
                t.actions.extend(actions);
            }
            StreamRecord::End { termination } => {
                t.termination = termination;
                return Some(t);
            }
            StreamRecord::Header { .. } => return None,
        }
    }
    None
}

fn tick_record(trace: &ExecutionTrace, i: usize) -> StreamRecord {
    let state = trace.states[i].clone();
    let tick = state.tick;
    StreamRecord::Tick {
        speaks: trace.speaks.iter().filter(|s| s.tick == tick).cloned().collect(),
        actions: trace.actions.iter().filter(|a| a.tick == tick).cloned().collect(),
        state,
    }
}

fn line(r: &StreamRecord) -> Bytes {
    let mut s = serde_json::to_string(r).expect("record serializes");
    s.push('\n');
    Bytes::from(s)
}

#[derive(Deserialize)]
struct StreamQuery {
    /// Ticks per second; 0 sends as fast as the consumer reads.
    rate: Option<f64>,
    #[serde(default)]
    from: u64,
}

struct StreamingFlag(Arc<RunControl>);

impl Drop for StreamingFlag {
    fn drop(&mut self) {
        self.0.streaming.store(false, Ordering::SeqCst);
    }
}

async fn stream(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<StreamQuery>) -> ApiResult {
    let trace = st.store().trace(&id)?;
    let rc = st.control(&id);
    if rc.streaming.swap(true, Ordering::SeqCst) {
        return Err(ApiError::Conflict(format!("run {id} already has a stream consumer")));
    }
    let flag = StreamingFlag(rc.clone());
    {
        let mut ctl = rc.lock();
        ctl.cursor = q.from;
        ctl.paused = false;
    }
    let rate = q.rate.unwrap_or(st.0.cfg.ticks_per_second);
    let (tx, rx) = mpsc::channel::<Result<Bytes, std::io::Error>>(16);
    let last_tick = trace.states.last().map_or(0, |s| s.tick);
    tokio::spawn(async move {
        let _flag = flag;
        let rc = _flag.0.clone();
        let header = StreamRecord::Header {
            run: id,
            id: trace.id.clone(),
            program_id: trace.program_id.clone(),
            scenario_id: trace.scenario_id.clone(),
            seed: trace.seed,
            dt: trace.dt,
            last_tick,
        };
        if tx.send(Ok(line(&header))).await.is_err() {
            return;
        }
        loop {
            let (paused, cursor) = {
                let c = rc.lock();
                (c.paused, c.cursor)
            };
            if paused {
                rc.wake.notified().await;
                continue;
            }
            let Some(i) = trace.states.iter().position(|s| s.tick == cursor) else {
                let _ = tx.send(Ok(line(&StreamRecord::End { termination: trace.termination.clone() }))).await;
                return;
            };
            if tx.send(Ok(line(&tick_record(&trace, i)))).await.is_err() {
                return;
            }
            {
                let mut c = rc.lock();
                // a seek while sending wins over the advance
                if c.cursor == cursor {
                    c.cursor = cursor + 1;
                }
            }
            if rate > 0.0 {
                tokio::select! {
                    _ = tokio::time::sleep(Duration::from_secs_f64(1.0 / rate)) => {}
                    _ = rc.wake.notified() => {}
                }
            }
        }
    });
    let body = Body::from_stream(tokio_stream::wrappers::ReceiverStream::new(rx));
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

#[derive(Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
enum ControlMsg {
    Pause,
    Resume,
    Seek { tick: u64 },
}

async fn control(State(st): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let msg: ControlMsg = body(&bytes)?;
    let last = st.store().run(&id)?.last_tick;
    let rc = st.control(&id);
    {
        let mut c = rc.lock();
        match msg {
            ControlMsg::Pause => c.paused = true,
            ControlMsg::Resume => c.paused = false,
            ControlMsg::Seek { tick } if tick > last => {
                return Err(ApiError::BadRequest(format!("tick {tick} is past the end of run {id} ({last})")))
            }
            ControlMsg::Seek { tick } => c.cursor = tick,
        }
    }
    rc.wake.notify_one();
    Ok(json_of(&playback(&st, &id)))
}

fn check_marks(fb: &FeedbackSession, sc: &Scenario) -> Result<(), ApiError> {
    for m in &fb.marks {
        let p = tacticforge_core::domain::Point::new(m.x, m.y);
        if !sc.workspace.contains(p) {
            return Err(ApiError::BadRequest(format!("mark ({}, {}) lies outside the field", m.x, m.y)));
        }
    }
    Ok(())
}

async fn run_feedback(State(st): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let mut store = st.store();
    let meta = store.run(&id)?.clone();
    let mut fb: FeedbackSession = body(&bytes)?;
    let grounded = match fb.kind {
        FeedbackKind::Execution => {
            check_marks(&fb, &scenario(&meta.scenario)?)?;
            let trace = store.trace(&id)?;
            ground_feedback(&trace, &fb).map_err(|e| ApiError::BadRequest(e.to_string()))?
        }
        FeedbackKind::Flow => {
            let (v, reg) = load_version(&store, &meta.version)?;
            ground_flow_feedback(&flow_of(&v, &reg)?, &fb).map_err(|e| ApiError::BadRequest(e.to_string()))?
        }
    };
    fb.trace_id.get_or_insert_with(|| id.clone());
    let stored = StoredFeedback {
        id: String::new(),
        session: meta.session,
        version: meta.version,
        run: Some(id),
        feedback: fb,
        grounded,
    };
    Ok(json_of(&store.put_feedback(stored)?))
}

#[derive(Deserialize)]
struct FlowFeedbackQuery {
    version: Option<String>,
}

fn store_flow_feedback(store: &mut Store, session: &str, version: Option<&str>, fb: FeedbackSession) -> Result<StoredFeedback, ApiError> {
    if fb.kind != FeedbackKind::Flow {
        return Err(ApiError::BadRequest("execution feedback belongs to a run".into()));
    }
    let s = store.session(session)?.clone();
    let vid = version.or(s.head()).ok_or_else(|| ApiError::BadRequest(format!("session {session} has no program yet")))?;
    if !s.versions.iter().any(|v| v == vid) {
        return Err(ApiError::NotFound(format!("no program version {vid} in session {session}")));
    }
    let (v, reg) = load_version(store, vid)?;
    let grounded = ground_flow_feedback(&flow_of(&v, &reg)?, &fb).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let stored = StoredFeedback {
        id: String::new(),
        session: session.into(),
        version: v.id,
        run: None,
        feedback: fb,
        grounded,
    };
    Ok(store.put_feedback(stored)?)
}

async fn flow_feedback(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FlowFeedbackQuery>,
    bytes: Bytes,
) -> ApiResult {
    let fb: FeedbackSession = body(&bytes)?;
    let stored = store_flow_feedback(&mut st.store(), &id, q.version.as_deref(), fb)?;
    Ok(json_of(&stored))
}

async fn get_feedback(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    Ok(json_of(&st.store().feedback(&id)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RepairReq {
    client: ClientKind,
    #[serde(default)]
    feedback_id: Option<String>,
    /// Flow feedback given inline instead of by id.
    #[serde(default)]
    feedback: Option<FeedbackSession>,
    /// Version being repaired; defaults to the one the feedback was given on.
    #[serde(default)]
    version: Option<String>,
    /// Structured edits the stub client applies.
    #[serde(default)]
    edits: Vec<EditOp>,
    #[serde(default)]
    seed: u64,
}

/// Holds a version in the in-flight set until dropped.
struct RepairSlot(AppState, String);

impl Drop for RepairSlot {
    fn drop(&mut self) {
        self.0 .0.repairs.lock().expect("repairs lock").remove(&self.1);
    }
}

async fn repair(State(st): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: RepairReq = body(&bytes)?;
    let (session, stored, base, demos) = {
        let mut store = st.store();
        let stored = match (&req.feedback_id, req.feedback.clone()) {
            (Some(f), None) => store.feedback(f)?,
            (None, Some(fb)) => store_flow_feedback(&mut store, &id, req.version.as_deref(), fb)?,
            _ => return Err(ApiError::BadRequest("give exactly one of feedback_id and feedback".into())),
        };
        if stored.session != id {
            return Err(ApiError::NotFound(format!("no feedback {} in session {id}", stored.id)));
        }
        let s = store.session(&id)?.clone();
        let base = req.version.clone().unwrap_or_else(|| stored.version.clone());
        if s.head() != Some(base.as_str()) {
            return Err(ApiError::Conflict(format!("version {base} is not the head of session {id}")));
        }
        let demos = demos_of(&store, &s)?;
        let v = store.version(&base)?;
        (s, stored, v, demos)
    };
    if !st.0.repairs.lock().expect("repairs lock").insert(base.id.clone()) {
        return Err(ApiError::Conflict(format!("version {} is already being repaired", base.id)));
    }
    let _slot = RepairSlot(st.clone(), base.id.clone());
    let reg = registry(&session.registry)?;
    let program = program_of(&base, &reg)?;
    let live = st.0.live.clone();
    let attempts = st.0.cfg.client.attempts;
    let (repaired, prov) = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        let transcripts: Vec<GroundedTranscript> = demos.iter().map(ground).collect();
        let input =
            RepairInput { program: &program, feedback: &stored.feedback, grounded_feedback: &stored.grounded, demos: &transcripts };
        match req.client {
            ClientKind::Stub if !req.edits.is_empty() && !stored.feedback.approves() => {
                let q = apply_structured_edit(&program, &req.edits, &reg).map_err(|e| ApiError::BadRequest(e.to_string()))?;
                let prov = Provenance {
                    operation: "repair".into(),
                    template: "structured-edit".into(),
                    seed: req.seed,
                    attempts: vec![],
                    diff: Some(diff_programs(&program, &q)),
                    note: Some(serde_json::to_string(&req.edits).expect("edits serialize")),
                };
                Ok((q, prov))
            }
            ClientKind::Stub => Ok(synth::repair(&input, &reg, &EchoClient, attempts, req.seed)?),
            ClientKind::Live => Ok(synth::repair(&input, &reg, live.as_ref(), attempts, req.seed)?),
        }
    })
    .await
    .map_err(blocking_err)??;
    let v = st.store().append_version(&id, Some(&base.id), &print(&repaired), prov)?;
    Ok(json_of(&v))
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(st): State<AppState>, uri: Uri) -> ApiResult {
    let not_found = || ApiError::NotFound(format!("no route {}", uri.path()));
    let Some(dir) = st.0.cfg.static_dir.clone() else { return Err(not_found()) };
    let rel = PathBuf::from(uri.path().trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(not_found());
    }
    let mut path = dir.join(rel);
    if path.is_dir() {
        path = path.join("index.html");
    }
    let bytes = tokio::fs::read(&path).await.map_err(|_| not_found())?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

pub async fn serve(cfg: Config, live: Arc<dyn GenClient>) -> anyhow::Result<()> {
    let store = Store::open(&cfg.data_dir)?;
    let addr = std::net::SocketAddr::from(([127, 0, 0, 1], cfg.port));
    let app = router(AppState::new(cfg, store, live));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
