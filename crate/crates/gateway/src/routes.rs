//! HTTP/JSON binding of the session, lexicon, calibration and confidence
//! operations.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wordcomm_core::codec::Scheme;
use wordcomm_core::confirmation::{confidence, Band, Policy};
use wordcomm_core::decision::{calibrate, pairs_from_trials, Calibration};
use wordcomm_core::hemodynamics::{parse_trial_csv, Trial};
use wordcomm_core::lexicon::{LexiconEntry, Neighbor, Skeleton};
use wordcomm_core::session::{AnswerOutcome, Resolution};
use wordcomm_core::simulator::{calibration_pairs, run_calibration, PatientProfile};
use wordcomm_core::{Answer, Channel};

use crate::error::ApiError;
use crate::store::{AppState, SessionConfig, SessionView};

pub const OPENAPI: &str = include_str!("../docs/openapi.json");

#[derive(FromRequest)]
#[from_request(via(Json), rejection(ApiError))]
pub struct ApiJson<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(Query), rejection(ApiError))]
pub struct ApiQuery<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(Path), rejection(ApiError))]
pub struct ApiPath<T>(pub T);

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/openapi.json", get(openapi))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/log", get(get_log))
        .route("/sessions/{id}/trials", post(post_trial))
        .route("/sessions/{id}/answers", post(post_answer))
        .route("/sessions/{id}/spoiled", post(post_spoiled))
        .route("/sessions/{id}/query", post(post_query))
        .route("/sessions/{id}/candidates/{word}/ask", post(post_ask))
        .route("/sessions/{id}/resolve", post(post_resolve))
        .route("/sessions/{id}/substitute", post(post_substitute))
        .route("/sessions/{id}/restart", post(post_restart))
        .route("/sessions/{id}/new-day", post(post_new_day))
        .route("/sessions/{id}/notes", post(post_note))
        .route("/sessions/{id}/abandon", post(post_abandon))
        .route("/lexicon/query", get(lexicon_query))
        .route("/lexicon/neighbors", get(lexicon_neighbors))
        .route("/calibration", post(post_calibration))
        .route("/models/{id}", get(get_model))
        .route("/confidence", get(get_confidence))
        .with_state(state)
}

async fn openapi() -> Response {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI).into_response()
}

/// Empty bodies read as the default value.
fn optional_body<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("bad_body", e.to_string()))
}

async fn create_session(State(app): Shared, body: Bytes) -> Result<(StatusCode, Json<Arc<SessionView>>), ApiError> {
    let config: SessionConfig = optional_body(&body)?;
    let app2 = app.clone();
    // Calibrating a simulated patient takes a moment.
    let view = tokio::task::spawn_blocking(move || app2.create_session(config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((StatusCode::CREATED, Json(view)))
}

#[derive(Serialize)]
struct SessionList {
    sessions: Vec<String>,
}

async fn list_sessions(State(app): Shared) -> Json<SessionList> {
    Json(SessionList {
        sessions: app.session_ids(),
    })
}

async fn get_session(State(app): Shared, ApiPath(id): ApiPath<String>) -> ApiResult<Arc<SessionView>> {
    Ok(Json(app.snapshot(&id)?))
}

async fn get_log(State(app): Shared, ApiPath(id): ApiPath<String>) -> Result<Response, ApiError> {
    let bytes = app.log(&id).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct SimulateTrial {
    /// The task the patient performs.
    #[serde(default)]
    intended: Option<Answer>,
    /// The true answer; the patient's accuracy decides the task.
    #[serde(default)]
    truth: Option<Answer>,
}

#[derive(Debug, Default, Deserialize)]
struct TrialRequest {
    #[serde(default)]
    simulate: Option<SimulateTrial>,
    #[serde(default)]
    csv: Option<String>,
    #[serde(default)]
    trial_id: Option<String>,
}

#[derive(Serialize)]
struct TrialResponse {
    outcome: AnswerOutcome,
    session: Arc<SessionView>,
}

fn is_json(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("json"))
}

async fn post_trial(
    State(app): Shared,
    ApiPath(id): ApiPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<TrialResponse> {
    let request = if is_json(&headers) {
        serde_json::from_slice::<TrialRequest>(&body).map_err(|e| ApiError::bad_request("bad_body", e.to_string()))?
    } else {
        TrialRequest {
            csv: Some(String::from_utf8_lossy(&body).into_owned()),
            ..TrialRequest::default()
        }
    };
    let uploaded: Option<Trial> = match &request.csv {
        Some(csv) => Some(parse_trial_csv(
            request.trial_id.as_deref().unwrap_or("upload"),
            csv.as_bytes(),
        )?),
        None => None,
    };
    let (outcome, session) = app
        .mutate(&id, move |live| {
            let trial = match (uploaded, request.simulate) {
                (Some(t), None) => t,
                (None, Some(sim)) => {
                    let patient = live
                        .patient
                        .as_mut()
                        .ok_or_else(|| ApiError::bad_request("no_patient", "session has no simulated patient"))?;
                    // Refuse before drawing so a 4xx leaves the patient's streams untouched.
                    live.session.check_answerable()?;
                    if live.session.model().is_none() {
                        return Err(wordcomm_core::Error::MissingModel.into());
                    }
                    match (sim.intended, sim.truth) {
                        (Some(a), None) => patient.trial(a),
                        (None, Some(t)) => patient.respond(t),
                        _ => {
                            return Err(ApiError::bad_request(
                                "bad_body",
                                "simulate needs exactly one of intended or truth",
                            ))
                        }
                    }
                }
                _ => return Err(ApiError::bad_request("bad_body", "send a trial CSV or a simulate directive")),
            };
            Ok(live.session.submit_trial(&trial)?)
        })
        .await?;
    Ok(Json(TrialResponse { outcome, session }))
}

#[derive(Deserialize)]
struct AnswerRequest {
    answer: Answer,
}

async fn post_answer(
    State(app): Shared,
    ApiPath(id): ApiPath<String>,
    ApiJson(req): ApiJson<AnswerRequest>,
) -> ApiResult<TrialResponse> {
    let (outcome, session) = app.mutate(&id, |l| Ok(l.session.submit_answer(req.answer)?)).await?;
    Ok(Json(TrialResponse { outcome, session }))
}

async fn post_spoiled(State(app): Shared, ApiPath(id): ApiPath<String>) -> ApiResult<Arc<SessionView>> {
    Ok(Json(app.mutate(&id, |l| Ok(l.session.flag_spoiled()?)).await?.1))
}

async fn post_query(State(app): Shared, ApiPath(id): ApiPath<String>) -> ApiResult<Arc<SessionView>> {
    Ok(Json(app.mutate(&id, |l| Ok(l.session.consult().map(|_| ())?)).await?.1))
}

#[derive(Debug, Default, Deserialize)]
struct AskRequest {
    #[serde(default)]
    rounds: Option<usize>,
}

async fn post_ask(
    State(app): Shared,
    ApiPath((id, word)): ApiPath<(String, String)>,
    body: Bytes,
) -> ApiResult<Arc<SessionView>> {
    let req: AskRequest = optional_body(&body)?;
    Ok(Json(app.mutate(&id, |l| Ok(l.session.ask_candidate(&word, req.rounds)?)).await?.1))
}

#[derive(Deserialize)]
struct ResolveRequest {
    decision: Resolution,
    #[serde(default)]
    note: Option<String>,
}

async fn post_resolve(
    State(app): Shared,
    ApiPath(id): ApiPath<String>,
    ApiJson(req): ApiJson<ResolveRequest>,
) -> ApiResult<Arc<SessionView>> {
    let view = app
        .mutate(&id, |l| Ok(l.session.resolve(req.decision, req.note.as_deref())?))
        .await?
        .1;
    Ok(Json(view))
}

#[derive(Deserialize)]
struct SubstituteRequest {
    position: usize,
    symbol: String,
}

async fn post_substitute(
    State(app): Shared,
    ApiPath(id): ApiPath<String>,
    ApiJson(req): ApiJson<SubstituteRequest>,
) -> ApiResult<Arc<SessionView>> {
    let view = app
        .mutate(&id, |l| Ok(l.session.substitute(req.position, &req.symbol)?))
        .await?
        .1;
    Ok(Json(view))
}

async fn post_restart(State(app): Shared, ApiPath(id): ApiPath<String>) -> ApiResult<Arc<SessionView>> {
    Ok(Json(app.mutate(&id, |l| Ok(l.session.restart()?)).await?.1))
}

#[derive(Debug, Default, Deserialize)]
struct NewDayRequest {
    #[serde(default)]
    date: Option<String>,
}

async fn post_new_day(State(app): Shared, ApiPath(id): ApiPath<String>, body: Bytes) -> ApiResult<Arc<SessionView>> {
    let req: NewDayRequest = optional_body(&body)?;
    Ok(Json(app.mutate(&id, |l| Ok(l.session.new_day(req.date.as_deref())?)).await?.1))
}

#[derive(Deserialize)]
struct NoteRequest {
    text: String,
}

async fn post_note(
    State(app): Shared,
    ApiPath(id): ApiPath<String>,
    ApiJson(req): ApiJson<NoteRequest>,
) -> ApiResult<Arc<SessionView>> {
    Ok(Json(app.mutate(&id, |l| Ok(l.session.note(&req.text)?)).await?.1))
}

#[derive(Deserialize)]
struct AbandonRequest {
    reason: String,
}

async fn post_abandon(
    State(app): Shared,
    ApiPath(id): ApiPath<String>,
    ApiJson(req): ApiJson<AbandonRequest>,
) -> ApiResult<Arc<SessionView>> {
    Ok(Json(app.mutate(&id, |l| Ok(l.session.abandon(&req.reason)?)).await?.1))
}

#[derive(Deserialize)]
struct LexiconParams {
    skeleton: String,
    #[serde(default)]
    scheme: Option<String>,
}

#[derive(Serialize)]
pub struct QueryResponse {
    pub scheme: String,
    pub lexicon: String,
    pub skeleton: Skeleton,
    pub count: usize,
    pub candidates: Vec<LexiconEntry>,
}

#[derive(Serialize)]
pub struct NeighborsResponse {
    pub scheme: String,
    pub lexicon: String,
    pub skeleton: Skeleton,
    pub neighbors: Vec<Neighbor>,
}

fn lexicon_and_skeleton(
    app: &AppState,
    p: &LexiconParams,
) -> Result<(Arc<wordcomm_core::lexicon::Lexicon>, Skeleton), ApiError> {
    let scheme = Scheme::bundled(p.scheme.as_deref().unwrap_or("japanese-vowel"))?;
    let lex = app.lexicon_for(&scheme)?;
    let sk = Skeleton::parse(&scheme, &p.skeleton)?;
    Ok((lex, sk))
}

async fn lexicon_query(State(app): Shared, ApiQuery(p): ApiQuery<LexiconParams>) -> ApiResult<QueryResponse> {
    let (lex, skeleton) = lexicon_and_skeleton(&app, &p)?;
    let candidates: Vec<LexiconEntry> = lex.query(&skeleton).into_iter().cloned().collect();
    Ok(Json(QueryResponse {
        scheme: lex.scheme().name.clone(),
        lexicon: lex.name().to_string(),
        skeleton,
        count: candidates.len(),
        candidates,
    }))
}

async fn lexicon_neighbors(State(app): Shared, ApiQuery(p): ApiQuery<LexiconParams>) -> ApiResult<NeighborsResponse> {
    let (lex, skeleton) = lexicon_and_skeleton(&app, &p)?;
    Ok(Json(NeighborsResponse {
        scheme: lex.scheme().name.clone(),
        lexicon: lex.name().to_string(),
        neighbors: lex.neighbors(&skeleton),
        skeleton,
    }))
}

#[derive(Debug, Deserialize)]
pub struct LabelledTrial {
    #[serde(default)]
    pub trial_id: Option<String>,
    pub label: Answer,
    pub csv: String,
}

#[derive(Debug, Default, Deserialize)]
struct CalibrationRequest {
    #[serde(default)]
    trials: Vec<LabelledTrial>,
    #[serde(default)]
    simulate: Option<SimulatedCalibration>,
}

#[derive(Debug, Deserialize)]
struct SimulatedCalibration {
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Serialize)]
pub struct CalibrationResponse {
    pub model_id: String,
    pub active_channel: Channel,
    pub performance: f64,
    pub calibration: Calibration,
}

pub fn calibrate_labelled(trials: &[LabelledTrial]) -> Result<Calibration, ApiError> {
    let parsed = trials
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let id = t.trial_id.clone().unwrap_or_else(|| format!("cal-{i}"));
            Ok(parse_trial_csv(&id, t.csv.as_bytes())?.with_label(t.label))
        })
        .collect::<Result<Vec<Trial>, ApiError>>()?;
    Ok(calibrate(&pairs_from_trials(&parsed)?)?)
}

async fn post_calibration(State(app): Shared, ApiJson(req): ApiJson<CalibrationRequest>) -> ApiResult<CalibrationResponse> {
    let calibration = tokio::task::spawn_blocking(move || match req.simulate {
        Some(sim) => {
            let profile = PatientProfile::preset(sim.preset.as_deref().unwrap_or("easy"), "", sim.seed.unwrap_or(0))?;
            Ok(calibrate(&calibration_pairs(&run_calibration(&profile))?)?)
        }
        None => calibrate_labelled(&req.trials),
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let model_id = app.register_model(calibration.model().clone());
    Ok(Json(CalibrationResponse {
        model_id,
        active_channel: calibration.active_channel,
        performance: calibration.active().performance,
        calibration,
    }))
}

async fn get_model(State(app): Shared, ApiPath(id): ApiPath<String>) -> ApiResult<wordcomm_core::decision::DecisionModel> {
    Ok(Json(app.model(&id).ok_or_else(|| ApiError::not_found("model", &id))?))
}

#[derive(Deserialize)]
struct ConfidenceParams {
    affirm: u64,
    deny: u64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ConfidenceResponse {
    pub affirm: u64,
    pub deny: u64,
    pub confidence: f64,
    pub band: Band,
}

async fn get_confidence(ApiQuery(p): ApiQuery<ConfidenceParams>) -> ApiResult<ConfidenceResponse> {
    let c = confidence(p.affirm, p.deny);
    Ok(Json(ConfidenceResponse {
        affirm: p.affirm,
        deny: p.deny,
        confidence: c,
        band: Policy::default().band(c),
    }))
}
