#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use kiln_core::domain::Row;
use kiln_service::api::router;
use kiln_service::store::Store;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const PAINT_DOMAIN: &str = include_str!("../fixtures/paint_domain.json");

pub struct Reply {
    pub status: StatusCode,
    pub etag: Option<String>,
    pub body: Value,
    pub text: String,
}

pub fn app(store: Arc<Store>) -> Router {
    router(store)
}

pub async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    if_match: Option<u64>,
    body: impl Into<String>,
) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(r) = if_match {
        req = req.header(header::IF_MATCH, format!("\"{r}\""));
    }
    let req = req
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.into()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let etag = resp
        .headers()
        .get(header::ETAG)
        .map(|v| v.to_str().unwrap().trim_matches('"').to_owned());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let body = serde_json::from_str(&text).unwrap_or(Value::Null);
    Reply {
        status,
        etag,
        body,
        text,
    }
}

/// Bare domain payload of the paint fixture.
pub fn paint_domain_payload() -> Value {
    serde_json::from_str::<Value>(PAINT_DOMAIN).unwrap()["payload"].clone()
}

/// Space filling below 10 experiments, EHVI afterwards.
pub fn paint_strategy() -> Value {
    json!({
        "type": "StepwiseStrategy",
        "steps": [
            {
                "condition": {"type": "NumberOfExperimentsCondition", "below": 10},
                "strategy": {"type": "RandomStrategy", "sampler": {"type": "SobolSampler", "seed": 4}}
            },
            {
                "condition": {"type": "AlwaysCondition"},
                "strategy": {
                    "type": "MoboEHVI",
                    "seed": 1,
                    "fit_restarts": 3,
                    "optimizer": {"n_raw": 256, "n_restarts": 4, "max_polish_iters": 100}
                }
            }
        ]
    })
}

pub fn create_body(name: &str) -> String {
    json!({"name": name, "domain": paint_domain_payload(), "strategy": paint_strategy()})
        .to_string()
}

/// Synthetic lab: viscosity from the mixture, hydrophobicity from two compounds.
pub fn paint_lab(row: &Row) -> BTreeMap<String, f64> {
    let x = |k: &str| row[k].as_real().unwrap();
    let mix: f64 = (0..20)
        .map(|i| x(&format!("compound_{i}")) * (i as f64 + 1.0) / 20.0)
        .sum();
    let temp = (x("temp") - 20.0) / 70.0;
    BTreeMap::from([
        ("viscosity".to_owned(), mix * (1.0 - 0.3 * temp)),
        (
            "hydrophobicity".to_owned(),
            x("compound_3") - 0.5 * x("compound_7") + 0.2 * temp,
        ),
    ])
}

/// Experiments document measuring every proposal in a proposals document.
pub fn measured(proposals: &Value) -> String {
    let rows: Vec<Value> = proposals["payload"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            let inputs: Row = serde_json::from_value(p["inputs"].clone()).unwrap();
            json!({"inputs": inputs, "outputs": paint_lab(&inputs)})
        })
        .collect();
    json!({"spec_version": "1", "kind": "experiments", "payload": {"rows": rows}}).to_string()
}
