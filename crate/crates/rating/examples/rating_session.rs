//! Runs a complete blinded rating session against the service router:
//! two simulated raters score every item, the adjudicator resolves the
//! disagreements, and the success rates with the McNemar comparison are
//! fetched at the end.
//!
//!     cargo run --release -p dsa-territory-rating --example rating_session
//!
//! To serve the same API over TCP, use `dsa-territory serve`.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use dsa_territory::io::load_mask;
use dsa_territory::metrics::dsc;
use dsa_territory::report::{build_cohort, CohortSpec};
use dsa_territory::synth::atlas_library;
use dsa_territory::Stage;
use dsa_territory_rating::{router, Store};

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .expect("request");
    let resp = app.clone().oneshot(req).await.expect("infallible");
    let status = resp.status();
    let bytes = resp.into_body().collect().await.expect("body").to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

/// A rater's judgement, from the ICA overlap with the reference plus a
/// rater-specific leniency.
fn judge(dice: f64, leniency: f64) -> u8 {
    match dice + leniency {
        d if d >= 0.97 => 3,
        d if d >= 0.90 => 2,
        d if d >= 0.80 => 1,
        _ => 0,
    }
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut spec = CohortSpec::new(4, 21);
    spec.phases = false;
    spec.acquisitions.retain(|(_, stage)| *stage == Stage::PostEvt);
    let library = atlas_library(2, 1_000_000)?;
    build_cohort(&spec, dir.path(), Some(&library))?;

    let store = Arc::new(Store::open(dir.path().join("sessions"))?);
    let app = router(store.clone());

    let (_, rubric) = call(&app, "GET", "/rubric", None).await;
    println!("rubric: {}", rubric["rubric"]);

    let (status, created) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({
            "manifest_path": dir.path().join("manifest.json"),
            "raters": ["rater-a", "rater-b"],
            "adjudicator": "senior",
            "seed": 7,
        })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{created}");
    let sid = created["session_id"].as_str().unwrap_or_default().to_string();
    println!("session {sid} with {} items", created["items"].as_array().map_or(0, Vec::len));

    // raters only see opaque item ids; the simulation peeks at the files
    let session = store.get(&sid)?;
    for (rater, leniency) in [("rater-a", 0.0), ("rater-b", 0.03)] {
        let (_, items) = call(&app, "GET", &format!("/sessions/{sid}/items?rater={rater}"), None).await;
        let ids: Vec<String> = items["items"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|i| i["item_id"].as_str().map(String::from))
            .collect();
        println!("{rater} order: {}", ids.join(" "));
        for id in ids {
            let item = session.item(&id)?;
            let overlay = load_mask(&item.overlay)?;
            let reference = load_mask(item.overlay.with_file_name("reference.png"))?;
            let score = judge(dsc(&overlay.ica(), &reference.ica())?, leniency);
            let (s, v) = call(&app, "POST", "/ratings", Some(json!({"item_id": id, "rater_id": rater, "score": score}))).await;
            assert_eq!(s, StatusCode::OK, "{v}");
        }
    }

    let (_, consensus) = call(&app, "GET", &format!("/sessions/{sid}/consensus"), None).await;
    let pending = consensus["pending"].as_array().cloned().unwrap_or_default();
    println!("{} items need adjudication", pending.len());
    for p in pending {
        let id = p["item_id"].as_str().unwrap_or_default();
        // the adjudicator sides with the stricter rater
        let score = p["scores"].as_object().into_iter().flat_map(|m| m.values()).filter_map(Value::as_i64).min().unwrap_or(0);
        call(&app, "POST", "/consensus", Some(json!({"item_id": id, "adjudicator": "senior", "score": score}))).await;
    }

    let (status, results) = call(&app, "GET", &format!("/sessions/{sid}/results"), None).await;
    println!("results ({status}):\n{}", serde_json::to_string_pretty(&results)?);
    Ok(())
}
