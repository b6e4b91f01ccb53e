//! The v3 HTTP surface: scores, model info and metrics.
//!
//! Request handling is synchronous and runs on the blocking pool; the
//! `respond` function is the whole request → response mapping and is what
//! the router calls.

use std::sync::Arc;

use axum::extract::{Path, RawQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde_json::{json, Map, Value as Json};
use wikiscore_core::runtime::ScoringService;
use wikiscore_core::scoring::{ErrorDocument, ErrorType, ScoreResult, ScoringEngine};

/// A transport-level failure: the request itself is unusable.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: u16,
    pub error_type: String,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: 400, error_type: "BadRequest".into(), message: message.into() }
    }

    fn from_document(status: u16, doc: &ErrorDocument) -> Self {
        Self { status, error_type: doc.error_type.to_string(), message: doc.message.clone() }
    }

    pub fn body(&self) -> Json {
        json!({"error": {"type": self.error_type, "message": self.message}})
    }
}

/// What a scores URL asks for, after path and query are merged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoresRequest {
    pub context: String,
    /// Empty means every model in the context.
    pub models: Vec<String>,
    pub revisions: Vec<u64>,
    pub include_features: bool,
    /// `Some` for model-info requests; the inner value is the field path.
    pub model_info: Option<Option<String>>,
    pub overlay: Vec<(String, String)>,
}

fn pipe_list(key: &str, value: &str) -> Result<Vec<String>, ApiError> {
    let items: Vec<String> = value.split('|').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
    if items.is_empty() {
        return Err(ApiError::bad_request(format!("{key} must list at least one value")));
    }
    Ok(items)
}

fn parse_revid(raw: &str) -> Result<u64, ApiError> {
    raw.parse().map_err(|_| ApiError::bad_request(format!("malformed revision id {raw:?}")))
}

impl ScoresRequest {
    /// Merges path segments with query parameters. Path segments take
    /// precedence over `revids` and `models`.
    pub fn parse(
        context: &str,
        path_revision: Option<&str>,
        path_model: Option<&str>,
        query: Option<&str>,
    ) -> Result<Self, ApiError> {
        let mut request = ScoresRequest { context: context.to_string(), ..Default::default() };
        let mut query_models = None;
        let mut query_revisions = None;
        for (key, value) in url::form_urlencoded::parse(query.unwrap_or("").as_bytes()) {
            match key.as_ref() {
                "models" => query_models = Some(pipe_list("models", &value)?),
                "revids" => {
                    query_revisions =
                        Some(pipe_list("revids", &value)?.iter().map(|r| parse_revid(r)).collect::<Result<Vec<_>, _>>()?)
                }
                "features" => request.include_features = value != "false",
                "model_info" => request.model_info = Some((!value.is_empty()).then(|| value.into_owned())),
                k if k.starts_with("feature.") || k.starts_with("datasource.") => {
                    request.overlay.push((key.into_owned(), value.into_owned()))
                }
                other => return Err(ApiError::bad_request(format!("unknown parameter {other:?}"))),
            }
        }
        request.models = match path_model {
            Some(m) => vec![m.to_string()],
            None => query_models.unwrap_or_default(),
        };
        request.revisions = match path_revision {
            Some(r) => vec![parse_revid(r)?],
            None => query_revisions.unwrap_or_default(),
        };
        if !request.overlay.is_empty() && request.revisions.len() != 1 {
            return Err(ApiError::bad_request("injected values require exactly one revision"));
        }
        Ok(request)
    }
}

fn cell(result: &ScoreResult) -> Json {
    match result {
        Ok(doc) => {
            let mut out = Map::new();
            out.insert("score".into(), serde_json::to_value(doc).expect("score serializes"));
            if let Some(features) = &doc.features {
                out.insert("features".into(), features.iter().map(|(k, v)| (k.clone(), v.to_json())).collect());
            }
            Json::Object(out)
        }
        Err(e) => json!({"error": e}),
    }
}

/// Handles one scores request against the service.
pub fn respond(service: &ScoringService, request: &ScoresRequest) -> Result<Json, ApiError> {
    let registry = service.registry();
    let ctx = request.context.as_str();
    if !registry.has_context(ctx) {
        return Err(ApiError {
            status: 404,
            error_type: "ContextNotFound".into(),
            message: format!("no models are registered for context {ctx:?}"),
        });
    }
    let models: Vec<String> = if request.models.is_empty() {
        registry.models(ctx).iter().map(|m| m.name.clone()).collect()
    } else {
        request.models.clone()
    };

    let mut models_block = Map::new();
    if let Some(field_path) = &request.model_info {
        for name in &models {
            let entry = match registry.get(ctx, name) {
                Some(model) => model.model_info(field_path.as_deref()).map_err(|e| ApiError::bad_request(e.to_string()))?,
                None => json!({"error": not_found(ctx, name)}),
            };
            models_block.insert(name.clone(), entry);
        }
        return Ok(json!({ ctx: {"models": models_block} }));
    }

    for name in &models {
        if let Some(model) = registry.get(ctx, name) {
            models_block.insert(name.clone(), json!({"version": model.version().to_string()}));
            if !request.overlay.is_empty() {
                ScoringEngine::parse_overlay(&model, &request.overlay).map_err(|e| ApiError::from_document(400, &e))?;
            }
        }
    }
    let mut body = Map::new();
    body.insert("models".into(), Json::Object(models_block));
    if request.revisions.is_empty() {
        return Ok(json!({ ctx: body }));
    }

    let mut scores = Map::new();
    if let [revision] = request.revisions[..] {
        let mut row = Map::new();
        for name in &models {
            let result = service.score(ctx, name, revision, &request.overlay, request.include_features);
            if let Err(e) = &result {
                if e.error_type == ErrorType::Overloaded {
                    return Err(ApiError::from_document(503, e));
                }
            }
            row.insert(name.clone(), cell(&result));
        }
        scores.insert(revision.to_string(), Json::Object(row));
    } else {
        for (revision, row) in service.score_batch(ctx, &models, &request.revisions, request.include_features) {
            let row: Map<String, Json> = row.iter().map(|(name, result)| (name.clone(), cell(result))).collect();
            scores.insert(revision.to_string(), Json::Object(row));
        }
    }
    body.insert("scores".into(), Json::Object(scores));
    Ok(json!({ ctx: body }))
}

fn not_found(ctx: &str, name: &str) -> ErrorDocument {
    ErrorDocument::new(ErrorType::ModelNotFound, format!("no model {name:?} in context {ctx:?}"))
}

fn json_response(status: u16, body: &Json) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let text = serde_json::to_string(body).expect("json serializes");
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn handle(
    service: Arc<ScoringService>,
    context: String,
    revision: Option<String>,
    model: Option<String>,
    query: Option<String>,
) -> Response {
    let outcome = tokio::task::spawn_blocking(move || {
        let request = ScoresRequest::parse(&context, revision.as_deref(), model.as_deref(), query.as_deref())?;
        respond(&service, &request)
    })
    .await;
    match outcome {
        Ok(Ok(body)) => json_response(200, &body),
        Ok(Err(e)) => json_response(e.status, &e.body()),
        Err(e) => json_response(500, &json!({"error": {"type": "InternalError", "message": e.to_string()}})),
    }
}

async fn scores_context(
    State(service): State<Arc<ScoringService>>,
    Path(context): Path<String>,
    RawQuery(query): RawQuery,
) -> Response {
    handle(service, context, None, None, query).await
}

async fn scores_revision(
    State(service): State<Arc<ScoringService>>,
    Path((context, revision)): Path<(String, String)>,
    RawQuery(query): RawQuery,
) -> Response {
    handle(service, context, Some(revision), None, query).await
}

async fn scores_revision_model(
    State(service): State<Arc<ScoringService>>,
    Path((context, revision, model)): Path<(String, String, String)>,
    RawQuery(query): RawQuery,
) -> Response {
    handle(service, context, Some(revision), Some(model), query).await
}

async fn metrics(State(service): State<Arc<ScoringService>>) -> Response {
    ([(header::CONTENT_TYPE, "text/plain; version=0.0.4")], service.metrics_text()).into_response()
}

pub fn router(service: Arc<ScoringService>) -> Router {
    Router::new()
        .route("/v3/scores/{context}", get(scores_context))
        .route("/v3/scores/{context}/", get(scores_context))
        .route("/v3/scores/{context}/{rev_id}", get(scores_revision))
        .route("/v3/scores/{context}/{rev_id}/", get(scores_revision))
        .route("/v3/scores/{context}/{rev_id}/{model}", get(scores_revision_model))
        .route("/metrics", get(metrics))
        .with_state(service)
}

/// Serves until ctrl-c, then lets in-flight requests finish.
pub async fn serve(listener: tokio::net::TcpListener, service: Arc<ScoringService>) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
