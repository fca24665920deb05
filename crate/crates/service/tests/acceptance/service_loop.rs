//! The paint campaign driven end to end over HTTP.

use std::io;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::http::StatusCode;
use axum::Router;
use kiln_core::domain::{Domain, Row};
use kiln_core::wire;
use kiln_service::store::Store;
use serde_json::Value;

use crate::checks::batch_violations;
use crate::common::{app, call, create_body, measured, PAINT_DOMAIN};
use crate::{ensure, Outcome};

fn rows(proposals: &Value) -> Vec<Row> {
    proposals["payload"]["rows"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|p| serde_json::from_value(p["inputs"].clone()).unwrap())
                .collect()
        })
        .unwrap_or_default()
}

fn predicted_keys(proposals: &Value) -> Vec<Vec<String>> {
    proposals["payload"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            p["predictions"]
                .as_object()
                .map(|m| m.keys().cloned().collect())
                .unwrap_or_default()
        })
        .collect()
}

struct Loop {
    app: Router,
    id: String,
    revision: u64,
    experiments: usize,
}

impl Loop {
    async fn ask(&mut self, domain: &Domain, n: usize) -> Result<Value, String> {
        let r = call(
            &self.app,
            "POST",
            &format!("/campaigns/{}/proposals?n={n}", self.id),
            None,
            "",
        )
        .await;
        ensure!(
            r.status == StatusCode::OK,
            "ask {n} at {} experiments: {} {}",
            self.experiments,
            r.status,
            r.text
        );
        self.revision += 1;
        ensure!(
            r.etag.as_deref() == Some(self.revision.to_string().as_str()),
            "ask returned ETag {:?}, expected {}",
            r.etag,
            self.revision
        );
        let batch = rows(&r.body);
        ensure!(batch.len() == n, "asked {n}, got {}", batch.len());
        let bad = batch_violations(domain, &batch);
        ensure!(bad.is_empty(), "infeasible proposals: {}", bad.join("; "));
        Ok(r.body)
    }

    async fn tell(&mut self, proposals: &Value) -> Result<(), String> {
        let body = measured(proposals);
        let r = call(
            &self.app,
            "POST",
            &format!("/campaigns/{}/experiments", self.id),
            Some(self.revision),
            body,
        )
        .await;
        ensure!(r.status == StatusCode::OK, "tell: {} {}", r.status, r.text);
        self.revision += 1;
        ensure!(
            r.body["revision"] == self.revision,
            "tell returned {}",
            r.body
        );
        self.experiments += rows(proposals).len();
        Ok(())
    }
}

async fn scenario() -> Outcome {
    let domain: Domain = wire::deserialize(PAINT_DOMAIN).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let crash = Arc::new(AtomicBool::new(false));
    let flag = crash.clone();
    let store = Store::open(dir.path())
        .map_err(|e| e.to_string())?
        .with_failure_hook(Arc::new(move |_| {
            if flag.load(Ordering::SeqCst) {
                Err(io::Error::other("injected crash"))
            } else {
                Ok(())
            }
        }));
    let store = Arc::new(store);
    let router = app(store.clone());
    let created = call(&router, "POST", "/campaigns", None, create_body("paint")).await;
    ensure!(
        created.status == StatusCode::CREATED,
        "create: {} {}",
        created.status,
        created.text
    );
    let id = created.body["payload"]["id"]
        .as_str()
        .unwrap_or_default()
        .to_owned();
    let mut lab = Loop {
        app: router.clone(),
        id: id.clone(),
        revision: 1,
        experiments: 0,
    };

    for _ in 0..3 {
        let batch = lab.ask(&domain, 3).await?;
        ensure!(
            predicted_keys(&batch).iter().all(Vec::is_empty),
            "space-filling batch carries predictions"
        );
        lab.tell(&batch).await?;
    }
    let batch = lab.ask(&domain, 1).await?;
    ensure!(
        predicted_keys(&batch)[0].is_empty(),
        "ask at 9 experiments already predicts"
    );
    lab.tell(&batch).await?;
    ensure!(
        lab.experiments == 10,
        "{} experiments recorded",
        lab.experiments
    );

    let batch = lab.ask(&domain, 3).await?;
    for keys in predicted_keys(&batch) {
        ensure!(
            keys == ["hydrophobicity", "viscosity"] || keys == ["viscosity", "hydrophobicity"],
            "model-based proposal predicts {keys:?}"
        );
    }
    lab.tell(&batch).await?;

    let exported = call(&router, "GET", &format!("/campaigns/{id}"), None, "").await;
    ensure!(
        exported.status == StatusCode::OK,
        "export: {}",
        exported.status
    );
    ensure!(
        exported.body["payload"]["revision"] == lab.revision,
        "exported revision {}",
        exported.body["payload"]["revision"]
    );
    let other_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let other = app(Arc::new(
        Store::open(other_dir.path()).map_err(|e| e.to_string())?,
    ));
    let imported = call(
        &other,
        "POST",
        "/campaigns/import",
        None,
        exported.text.clone(),
    )
    .await;
    ensure!(
        imported.status == StatusCode::CREATED,
        "import: {} {}",
        imported.status,
        imported.text
    );
    let here = call(
        &router,
        "POST",
        &format!("/campaigns/{id}/proposals?n=2"),
        None,
        "",
    )
    .await;
    let there = call(
        &other,
        "POST",
        &format!("/campaigns/{id}/proposals?n=2"),
        None,
        "",
    )
    .await;
    ensure!(
        here.status == StatusCode::OK && there.status == StatusCode::OK,
        "replayed ask failed"
    );
    ensure!(
        here.text == there.text,
        "imported campaign proposes differently"
    );
    lab.revision += 1;

    let path = dir.path().join(format!("{id}.json"));
    let before = std::fs::read(&path).map_err(|e| e.to_string())?;
    crash.store(true, Ordering::SeqCst);
    let r = call(
        &router,
        "POST",
        &format!("/campaigns/{id}/proposals?n=1"),
        None,
        "",
    )
    .await;
    crash.store(false, Ordering::SeqCst);
    ensure!(
        r.status == StatusCode::INTERNAL_SERVER_ERROR,
        "crashed write returned {}",
        r.status
    );
    ensure!(
        std::fs::read(&path).map_err(|e| e.to_string())? == before,
        "file changed by a crashed write"
    );
    let kept = store.load(&id).map_err(|e| e.to_string())?.revision;
    ensure!(
        kept == lab.revision,
        "revision {kept} after crash, expected {}",
        lab.revision
    );

    Ok(format!(
        "{} experiments over {} revisions; model predictions from 10 experiments; export/import replays byte-identical; crashed write kept revision {kept}",
        lab.experiments, lab.revision
    ))
}

pub fn run() -> Outcome {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?
        .block_on(scenario())
}
