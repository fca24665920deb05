//! REST endpoints over a [`Store`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use kiln_core::campaign::Campaign;
use kiln_core::domain::{evaluate_objective, Domain, ExperimentTable, ProposalTable};
use kiln_core::strategy::{
    default_reference, hypervolume, pareto_front, StrategyConfig, StrategyError,
};
use kiln_core::wire::{self, DeserializationError, Entity, Kind, WireError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::store::{Store, StoreError};

/// An error response: a status and a list of located messages.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    errors: Vec<DeserializationError>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            errors: vec![DeserializationError {
                path: String::new(),
                message: message.into(),
                got: None,
            }],
        }
    }
}

impl From<WireError> for ApiError {
    fn from(e: WireError) -> Self {
        let status = if e.is_validation() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::BAD_REQUEST
        };
        Self {
            status,
            errors: e.errors().to_vec(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Busy(_) | StoreError::Exists(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!("store failure: {e}");
        }
        ApiError::new(status, e.to_string())
    }
}

impl From<StrategyError> for ApiError {
    fn from(e: StrategyError) -> Self {
        match e {
            StrategyError::Gp(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
            StrategyError::Invalid(errors) => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                errors: errors
                    .into_iter()
                    .map(|v| DeserializationError {
                        path: format!("/strategy/config{}", wire::dotted_to_pointer(&v.path)),
                        message: v.message,
                        got: None,
                    })
                    .collect(),
            },
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(json!({ "errors": self.errors }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/campaigns", get(list_campaigns).post(create_campaign))
        .route("/campaigns/import", post(import_campaign))
        .route("/campaigns/{id}", get(get_campaign))
        .route("/campaigns/{id}/experiments", post(tell))
        .route("/campaigns/{id}/proposals", post(ask))
        .route("/campaigns/{id}/pareto", get(pareto))
        .route("/schema", get(schema_index))
        .route("/schema/{kind}", get(schema_for_kind))
        .route("/validate", post(validate))
        .with_state(store)
}

fn document(status: StatusCode, body: String, revision: Option<u64>) -> Response {
    let mut response = (status, [(header::CONTENT_TYPE, "application/json")], body).into_response();
    if let Some(r) = revision {
        response.headers_mut().insert(
            header::ETAG,
            HeaderValue::from_str(&format!("\"{r}\"")).expect("ascii"),
        );
    }
    response
}

fn serialized<T: Entity>(entity: &T) -> Result<String, ApiError> {
    wire::serialize(entity)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

/// Runs blocking engine work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

/// Parses `body` as the enveloped document of `T`, or as a bare payload when
/// it has no `kind` field.
pub fn parse_entity<T: Entity>(body: &[u8]) -> Result<T, WireError> {
    let doc = wire::parse_json(body)?;
    if doc.get("kind").is_some() {
        wire::deserialize_bytes(body)
    } else {
        wire::from_document(std::str::from_utf8(body).unwrap_or_default())
    }
}

/// Checks any enveloped document and returns its kind.
pub fn validate_document(body: &[u8]) -> Result<Kind, WireError> {
    let doc = wire::parse_json(body)?;
    let kind = wire::open_envelope(&doc, None)?.0;
    match kind {
        Kind::Domain => wire::deserialize_bytes::<Domain>(body).map(drop),
        Kind::Strategy => {
            wire::deserialize_bytes::<kiln_core::strategy::StrategyState>(body).map(drop)
        }
        Kind::Surrogate => wire::deserialize_bytes::<kiln_core::gp::TrainedGp>(body).map(drop),
        Kind::Experiments => wire::deserialize_bytes::<ExperimentTable>(body).map(drop),
        Kind::Proposals => wire::deserialize_bytes::<ProposalTable>(body).map(drop),
        Kind::Campaign => wire::deserialize_bytes::<Campaign>(body).map(drop),
    }?;
    Ok(kind)
}

#[derive(Serialize)]
struct Summary {
    id: String,
    name: String,
    revision: u64,
    strategy: &'static str,
    n_experiments: usize,
    n_proposal_batches: usize,
}

async fn list_campaigns(State(store): State<Arc<Store>>) -> ApiResult {
    let campaigns = blocking(move || store.list()).await??;
    let summaries: Vec<Summary> = campaigns
        .into_iter()
        .map(|c| Summary {
            strategy: c.strategy.config.tag(),
            n_experiments: c.experiments.len(),
            n_proposal_batches: c.proposal_history.len(),
            id: c.id,
            name: c.name,
            revision: c.revision,
        })
        .collect();
    Ok(axum::Json(json!({ "campaigns": summaries })).into_response())
}

/// `{name, domain, strategy}` with bare domain and strategy payloads.
fn parse_create(body: &[u8]) -> Result<(String, Domain, StrategyConfig), WireError> {
    let root = wire::parse_json(body)?;
    let malformed = |path: &str, message: &str| {
        WireError::Malformed(vec![DeserializationError {
            path: path.into(),
            message: message.into(),
            got: None,
        }])
    };
    let Some(obj) = root.as_object() else {
        return Err(malformed(
            "",
            "body must be an object with name, domain and strategy",
        ));
    };
    if let Some(extra) = obj
        .keys()
        .find(|k| !matches!(k.as_str(), "name" | "domain" | "strategy"))
    {
        return Err(malformed(
            &format!("/{extra}"),
            &format!("unknown field `{extra}`"),
        ));
    }
    let name = match obj.get("name") {
        Some(Json::String(s)) => s.clone(),
        Some(_) => return Err(malformed("/name", "name must be a string")),
        None => return Err(malformed("/name", "missing field `name`")),
    };
    let domain_json = obj
        .get("domain")
        .ok_or_else(|| malformed("/domain", "missing field `domain`"))?;
    let strategy_json = obj
        .get("strategy")
        .ok_or_else(|| malformed("/strategy", "missing field `strategy`"))?;
    let domain: Domain = wire::from_json(&root, domain_json, "/domain")?;
    let config: StrategyConfig = wire::from_json(&root, strategy_json, "/strategy")?;
    domain
        .validate()
        .map_err(|e| wire::invalid(&root, "/domain", e))?;
    let errors = config.validate(&domain);
    if !errors.is_empty() {
        return Err(wire::invalid(&root, "/strategy", errors));
    }
    Ok((name, domain, config))
}

async fn create_campaign(State(store): State<Arc<Store>>, body: Bytes) -> ApiResult {
    let (name, domain, config) = parse_create(&body)?;
    let id = uuid::Uuid::new_v4().to_string();
    let campaign = Campaign::new(id, name, domain, config).map_err(|e| {
        let root = Json::Null;
        wire::invalid(&root, "", e)
    })?;
    let text = serialized(&campaign)?;
    let revision = campaign.revision;
    blocking(move || store.create(&campaign)).await??;
    Ok(document(StatusCode::CREATED, text, Some(revision)))
}

async fn import_campaign(State(store): State<Arc<Store>>, body: Bytes) -> ApiResult {
    let campaign: Campaign = parse_entity(&body)?;
    let text = serialized(&campaign)?;
    let revision = campaign.revision;
    blocking(move || store.create(&campaign)).await??;
    Ok(document(StatusCode::CREATED, text, Some(revision)))
}

async fn get_campaign(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult {
    let campaign = blocking(move || store.load(&id)).await??;
    Ok(document(
        StatusCode::OK,
        serialized(&campaign)?,
        Some(campaign.revision),
    ))
}

fn if_match(headers: &HeaderMap) -> Result<u64, ApiError> {
    let raw = headers.get(header::IF_MATCH).ok_or_else(|| {
        ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "If-Match header with the campaign revision is required",
        )
    })?;
    raw.to_str()
        .ok()
        .map(|s| s.trim().trim_start_matches("W/").trim_matches('"'))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "If-Match must be a revision number",
            )
        })
}

async fn tell(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let expected = if_match(&headers)?;
    let table: ExperimentTable = parse_entity(&body)?;
    let enveloped = wire::parse_json(&body)?.get("kind").is_some();
    blocking(move || -> ApiResult {
        let _lock = store.try_lock(&id)?;
        let mut campaign = store.load(&id)?;
        if campaign.revision != expected {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("revision is {}, If-Match was {expected}", campaign.revision),
            ));
        }
        let prefix = if enveloped { "/payload" } else { "" };
        let warnings = campaign.tell(&table).map_err(|errs| {
            let root = wire::parse_json(&body).unwrap_or(Json::Null);
            ApiError::from(wire::invalid(&root, prefix, errs))
        })?;
        store.save(&campaign)?;
        let warnings: Vec<Json> = warnings
            .into_iter()
            .map(|w| json!({ "path": format!("{prefix}{}", wire::dotted_to_pointer(&w.path)), "message": w.message }))
            .collect();
        let body = json!({ "revision": campaign.revision, "warnings": warnings });
        Ok(document(StatusCode::OK, body.to_string(), Some(campaign.revision)))
    })
    .await?
}

#[derive(Deserialize)]
struct AskQuery {
    n: Option<String>,
}

async fn ask(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<AskQuery>,
) -> ApiResult {
    let n: usize = match q.n.as_deref() {
        None => 1,
        Some(s) => s.parse().map_err(|_| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("n must be a positive integer, got `{s}`"),
            )
        })?,
    };
    if n == 0 {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "n must be at least 1",
        ));
    }
    blocking(move || -> ApiResult {
        let _lock = store.try_lock(&id)?;
        let mut campaign = store.load(&id)?;
        let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
        let proposals = campaign.ask(n, timestamp)?;
        store.save(&campaign)?;
        let table = ProposalTable { rows: proposals };
        Ok(document(
            StatusCode::OK,
            serialized(&table)?,
            Some(campaign.revision),
        ))
    })
    .await?
}

/// Reference point configured on any EHVI step, if one exists.
fn configured_reference(config: &StrategyConfig) -> Option<Vec<f64>> {
    match config {
        StrategyConfig::Ehvi(e) => e.ref_point.clone(),
        StrategyConfig::Stepwise(s) => s
            .steps
            .iter()
            .find_map(|step| configured_reference(&step.strategy)),
        _ => None,
    }
}

/// Front and hypervolume of measured desirabilities.
pub fn pareto_report(campaign: &Campaign) -> Json {
    let objectives: Vec<_> = campaign.domain.objective_outputs().collect();
    let mut rows = Vec::new();
    let mut g: Vec<Vec<f64>> = Vec::new();
    for (i, e) in campaign.experiments.rows.iter().enumerate() {
        let d: Option<Vec<f64>> = objectives
            .iter()
            .map(|o| {
                e.outputs
                    .get(&o.key)
                    .map(|&y| evaluate_objective(&o.objective, y))
            })
            .collect();
        if let Some(d) = d {
            rows.push(i);
            g.push(d);
        }
    }
    let front = pareto_front(&g);
    let mut report = json!({
        "objectives": objectives.iter().map(|o| json!({"key": o.key, "objective": o.objective.tag()})).collect::<Vec<_>>(),
        "experiment_indices": rows,
        "desirabilities": g,
        "front": front,
    });
    if objectives.len() >= 2 && !g.is_empty() {
        let reference = configured_reference(&campaign.strategy.config)
            .unwrap_or_else(|| default_reference(&g));
        let points: Vec<Vec<f64>> = front
            .iter()
            .map(|&i| g[i].clone())
            .filter(|p| p.iter().zip(&reference).all(|(a, r)| a > r))
            .collect();
        if let Ok(hv) = hypervolume(&points, &reference) {
            report["reference"] = json!(reference);
            report["hypervolume"] = json!(hv);
        }
    }
    report
}

async fn pareto(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult {
    let campaign = blocking(move || store.load(&id)).await??;
    let mut response = axum::Json(pareto_report(&campaign)).into_response();
    response.headers_mut().insert(
        header::ETAG,
        HeaderValue::from_str(&format!("\"{}\"", campaign.revision)).expect("ascii"),
    );
    Ok(response)
}

async fn schema_index() -> Response {
    let discriminators: serde_json::Map<String, Json> = wire::schema::all_discriminators()
        .into_iter()
        .map(|(union, tags)| (union.to_owned(), json!(tags)))
        .collect();
    axum::Json(json!({
        "spec_version": wire::SPEC_VERSION,
        "kinds": Kind::ALL.iter().map(|k| k.as_str()).collect::<Vec<_>>(),
        "discriminators": discriminators,
    }))
    .into_response()
}

async fn schema_for_kind(Path(kind): Path<String>) -> ApiResult {
    let schema = wire::schema::schema(&kind)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e.to_string()))?;
    Ok(axum::Json(schema).into_response())
}

async fn validate(body: Bytes) -> ApiResult {
    let kind = validate_document(&body)?;
    Ok(axum::Json(json!({ "valid": true, "kind": kind.as_str() })).into_response())
}
