//! HTTP routes. Responses to the query and judgement endpoints never carry
//! parameter values.

use std::sync::{Arc, MutexGuard};

use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use elicit_core::aggregate::{combine, summarize, Combination, ExpertSummary};
use elicit_core::elicitation::{
    AcquisitionRule, BeliefDistribution, ElicitError, GpSettings, Mode, PairRule, Phase, Prior, Query, SessionConfig,
};
use elicit_core::simulate::{Render, SimulatorSpec};

use crate::error::ApiError;
use crate::registry::{Registry, SessionEntry, SharedEntry};

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_query))
        .route("/sessions/{id}/judgements", post(judge))
        .route("/sessions/{id}/belief", get(belief))
        .route("/sessions/{id}/export", get(export))
        .route("/aggregate", post(aggregate))
        .with_state(registry)
}

/// JSON body extractor whose rejections use the API error shape.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(rej) => Err(ApiError::new(rej.status(), "invalid_request", rej.body_text())),
        }
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

fn lock(entry: &SharedEntry) -> Result<MutexGuard<'_, SessionEntry>, ApiError> {
    entry.lock().map_err(|_| ApiError::internal("session state poisoned by an earlier failure"))
}

/// Session settings; omitted fields take the defaults for `mode`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub mode: Mode,
    pub simulator: Option<SimulatorSpec>,
    pub prior: Option<Prior>,
    pub n_grid: Option<usize>,
    pub n_active: Option<usize>,
    pub belief_grid_size: Option<usize>,
    pub ucb_beta: Option<f64>,
    pub acquisition: Option<AcquisitionRule>,
    pub pair_rule: Option<PairRule>,
    pub seed: Option<u64>,
    pub gp: Option<GpSettings>,
}

impl CreateSession {
    pub fn into_config(self) -> SessionConfig {
        let simulator = self.simulator.unwrap_or_else(|| SimulatorSpec::binomial(100));
        let seed = self.seed.unwrap_or_else(rand::random);
        let mut c = match self.mode {
            Mode::Veri => SessionConfig::veri(simulator, seed),
            Mode::Pari => SessionConfig::pari(simulator, seed),
        };
        if let Some(v) = self.prior {
            c.prior = v;
        }
        if let Some(v) = self.n_grid {
            c.n_grid = v;
        }
        if let Some(v) = self.n_active {
            c.n_active = v;
        }
        if let Some(v) = self.belief_grid_size {
            c.belief_grid_size = v;
        }
        if let Some(v) = self.ucb_beta {
            c.ucb_beta = v;
        }
        if let Some(v) = self.acquisition {
            c.acquisition = v;
        }
        if let Some(v) = self.pair_rule {
            c.pair_rule = v;
        }
        if let Some(v) = self.gp {
            c.gp = v;
        }
        c
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq, Clone, Copy)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

fn progress(entry: &SessionEntry) -> Progress {
    Progress { answered: entry.session.answered(), total: entry.session.total() }
}

#[derive(Serialize)]
struct Created {
    session_id: String,
    status: Phase,
    mode: Mode,
    progress: Progress,
    config: SessionConfig,
}

async fn create_session(
    State(reg): State<Arc<Registry>>,
    ApiJson(body): ApiJson<CreateSession>,
) -> Result<impl IntoResponse, ApiError> {
    let config = body.into_config();
    let created = blocking(move || {
        let (id, entry) = reg.create(config)?;
        let g = lock(&entry)?;
        tracing::info!(session = %id, mode = %g.session.mode(), "created session");
        Ok(Created {
            session_id: id,
            status: g.session.phase(),
            mode: g.session.mode(),
            progress: progress(&g),
            config: g.session.config().clone(),
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)))
}

/// One displayed simulation; preference queries label them A and B.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PayloadView {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
    #[serde(flatten)]
    pub render: Render,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum NextResponse {
    Query {
        session_id: String,
        query_id: String,
        mode: Mode,
        phase: Phase,
        index: usize,
        progress: Progress,
        payloads: Vec<PayloadView>,
    },
    Complete {
        session_id: String,
        progress: Progress,
        belief: String,
    },
}

fn query_view(id: &str, q: &Query, p: Progress) -> NextResponse {
    let renders = q.renders();
    let labelled = renders.len() > 1;
    let payloads = renders
        .into_iter()
        .enumerate()
        .map(|(i, render)| PayloadView { label: labelled.then(|| ["A", "B"][i].to_string()), render })
        .collect();
    NextResponse::Query {
        session_id: id.to_string(),
        query_id: q.query_id.clone(),
        mode: q.mode,
        phase: q.phase,
        index: q.index,
        progress: p,
        payloads,
    }
}

async fn next_query(State(reg): State<Arc<Registry>>, Path(id): Path<String>) -> Result<Json<NextResponse>, ApiError> {
    blocking(move || {
        let entry = reg.get(&id)?;
        let mut g = lock(&entry)?;
        let result = g.session.next_query();
        let p = progress(&g);
        match result {
            Ok(q) => Ok(Json(query_view(&id, &q, p))),
            Err(ElicitError::SessionComplete) => {
                Ok(Json(NextResponse::Complete { belief: format!("/sessions/{id}/belief"), session_id: id, progress: p }))
            }
            Err(e) => Err(e.into()),
        }
    })
    .await
}

/// `label` refers to the presentation: 1 = realistic, or 1 = A preferred.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeRequest {
    pub query_id: String,
    pub label: u8,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct JudgeResponse {
    pub status: String,
    pub query_id: String,
    pub phase: Phase,
    pub progress: Progress,
}

async fn judge(
    State(reg): State<Arc<Registry>>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<JudgeRequest>,
) -> Result<Json<JudgeResponse>, ApiError> {
    blocking(move || {
        let entry = reg.get(&id)?;
        let mut g = lock(&entry)?;
        g.session.record_judgement(&body.query_id, body.label)?;
        let record = g.session.judgements().last().expect("just recorded").to_record();
        if let Err(e) = g.writer.append(&record) {
            // The in-memory session is now ahead of its log; rebuild from disk next time.
            drop(g);
            reg.evict(&id);
            tracing::error!(session = %id, error = %e, "failed to persist judgement");
            return Err(e.into());
        }
        Ok(Json(JudgeResponse {
            status: "recorded".into(),
            query_id: body.query_id,
            phase: g.session.phase(),
            progress: progress(&g),
        }))
    })
    .await
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct BeliefView {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    pub normalization: f64,
    pub summary: ExpertSummary,
}

impl BeliefView {
    fn new(b: BeliefDistribution) -> Self {
        let summary = summarize(&b);
        BeliefView {
            grid: b.grid,
            density: b.density,
            band_lo: b.band_lo,
            band_hi: b.band_hi,
            normalization: b.normalization,
            summary,
        }
    }

    pub fn distribution(&self) -> BeliefDistribution {
        BeliefDistribution {
            grid: self.grid.clone(),
            density: self.density.clone(),
            band_lo: self.band_lo.clone(),
            band_hi: self.band_hi.clone(),
            normalization: self.normalization,
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct BeliefResponse {
    pub session_id: String,
    pub mode: Mode,
    pub phase: Phase,
    pub progress: Progress,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<f64>,
    #[serde(flatten)]
    pub belief: BeliefView,
}

async fn belief(State(reg): State<Arc<Registry>>, Path(id): Path<String>) -> Result<Json<BeliefResponse>, ApiError> {
    blocking(move || {
        let entry = reg.get(&id)?;
        let g = lock(&entry)?;
        let s = &g.session;
        let diagnostic = match s.mode() {
            Mode::Veri => Some(s.diagnostic()?),
            Mode::Pari => None,
        };
        Ok(Json(BeliefResponse {
            session_id: id.clone(),
            mode: s.mode(),
            phase: s.phase(),
            progress: progress(&g),
            diagnostic,
            belief: BeliefView::new(s.belief()?),
        }))
    })
    .await
}

async fn export(State(reg): State<Arc<Registry>>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let text = blocking(move || {
        let entry = reg.get(&id)?;
        let _g = lock(&entry)?;
        Ok(std::fs::read_to_string(reg.log_path(&id))?)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateRequest {
    pub session_ids: Vec<String>,
    pub method: Combination,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct AggregateResponse {
    pub method: Combination,
    pub session_ids: Vec<String>,
    #[serde(flatten)]
    pub belief: BeliefView,
}

async fn aggregate(
    State(reg): State<Arc<Registry>>,
    ApiJson(body): ApiJson<AggregateRequest>,
) -> Result<Json<AggregateResponse>, ApiError> {
    if body.session_ids.is_empty() {
        return Err(ApiError::bad_request("session_ids must not be empty"));
    }
    blocking(move || {
        let mut beliefs = Vec::with_capacity(body.session_ids.len());
        for id in &body.session_ids {
            let entry = reg.get(id)?;
            let g = lock(&entry)?;
            beliefs.push(g.session.belief()?);
        }
        let pooled = combine(&beliefs, body.method)?;
        Ok(Json(AggregateResponse { method: body.method, session_ids: body.session_ids, belief: BeliefView::new(pooled) }))
    })
    .await
}
