use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use dsa_territory::io::{save_mask, save_minip};
use dsa_territory::model::{AcquisitionRecord, CaseRecord};
use dsa_territory::report::CohortManifest;
use dsa_territory::stats::mcnemar;
use dsa_territory::{Grid, Method, MinIpImage, Occlusion, Stage, TerritoryMask, View};
use dsa_territory_rating::{router, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

/// `patients` patients with the given acquisitions; tiny images on disk.
fn fixture(dir: &Path, patients: usize, acquisitions: &[(View, Stage)]) -> std::path::PathBuf {
    let minip = MinIpImage::from_pixels(Grid::from_fn(16, 16, |x, y| (x * 1000 + y * 10) as u16));
    let mask = TerritoryMask::new(Grid::from_fn(16, 16, |x, y| if y < 8 { 0 } else if x < 8 { 1 } else { 2 })).unwrap();
    save_minip(&minip, dir.join("minip.png")).unwrap();
    save_mask(&mask, dir.join("mask.png")).unwrap();
    let cases = (0..patients)
        .map(|i| CaseRecord {
            patient_id: format!("P{:02}", i + 1),
            occlusion: [Occlusion::Ica, Occlusion::M1, Occlusion::M2][i % 3],
            acquisitions: acquisitions
                .iter()
                .map(|&(view, stage)| AcquisitionRecord {
                    view,
                    stage,
                    minip: "minip.png".into(),
                    reference: "mask.png".into(),
                    predictions: [(Method::Model, "mask.png".into()), (Method::Atlas, "mask.png".into())].into(),
                    phase_minips: BTreeMap::new(),
                    phase_predictions: BTreeMap::new(),
                    phase_reference: None,
                })
                .collect(),
        })
        .collect();
    let path = dir.join("manifest.json");
    CohortManifest::new(cases).save(&path).unwrap();
    path
}

const ALL_FOUR: [(View, Stage); 4] = [
    (View::Ap, Stage::PreEvt),
    (View::Ap, Stage::PostEvt),
    (View::Lateral, Stage::PreEvt),
    (View::Lateral, Stage::PostEvt),
];

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn create(app: &Router, manifest: &Path, seed: u64) -> Value {
    let (s, v) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({
            "manifest_path": manifest,
            "raters": ["r1", "r2"],
            "adjudicator": "adj",
            "seed": seed,
        })),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    v
}

async fn rate(app: &Router, item: &str, rater: &str, score: i64) -> (StatusCode, Value) {
    call(app, "POST", "/ratings", Some(json!({"item_id": item, "rater_id": rater, "score": score}))).await
}

async fn order(app: &Router, session: &str, rater: &str) -> Vec<String> {
    let (s, v) = call(app, "GET", &format!("/sessions/{session}/items?rater={rater}"), None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    v["items"].as_array().unwrap().iter().map(|i| i["item_id"].as_str().unwrap().to_string()).collect()
}

fn ids(v: &Value) -> Vec<String> {
    v["items"].as_array().unwrap().iter().map(|i| i.as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn session_items_and_rater_orders() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 10, &[(View::Ap, Stage::PostEvt)]);
    let app = router(Arc::new(Store::open(dir.path().join("log")).unwrap()));
    let created = create(&app, &manifest, 7).await;
    assert_eq!(created["schema_version"], 1);
    let items = ids(&created);
    assert_eq!(items.len(), 20);
    let sid = created["session_id"].as_str().unwrap().to_string();
    let o1 = order(&app, &sid, "r1").await;
    let o2 = order(&app, &sid, "r2").await;
    assert_ne!(o1, o2);
    let set = |v: &[String]| v.iter().cloned().collect::<BTreeSet<_>>();
    assert_eq!(set(&o1), set(&items));
    assert_eq!(set(&o2), set(&items));

    let (s, _) = call(&app, "GET", &format!("/sessions/{sid}/items?rater=intruder"), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN);

    // restart: same orders, ratings replayed
    rate(&app, &items[0], "r1", 2).await;
    drop(app);
    let app = router(Arc::new(Store::open(dir.path().join("log")).unwrap()));
    assert_eq!(order(&app, &sid, "r1").await, o1);
    let (_, v) = call(&app, "GET", &format!("/sessions/{sid}/items?rater=r1"), None).await;
    let rated: Vec<_> = v["items"].as_array().unwrap().iter().filter(|i| !i["score"].is_null()).collect();
    assert_eq!(rated.len(), 1);
    assert_eq!(v["progress"]["rated"], 1);
}

#[tokio::test]
async fn same_seed_gives_same_orders_across_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 6, &[(View::Ap, Stage::PostEvt)]);
    let app = router(Arc::new(Store::in_memory()));
    let a = create(&app, &manifest, 3).await;
    let b = create(&app, &manifest, 3).await;
    let strip = |v: Vec<String>| v.into_iter().map(|s| s.split_once('-').unwrap().1.to_string()).collect::<Vec<_>>();
    let oa = strip(order(&app, a["session_id"].as_str().unwrap(), "r1").await);
    let ob = strip(order(&app, b["session_id"].as_str().unwrap(), "r1").await);
    assert_eq!(oa, ob);
}

#[tokio::test]
async fn rating_validation_and_revisions() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 2, &[(View::Ap, Stage::PostEvt)]);
    let app = router(Arc::new(Store::in_memory()));
    let items = ids(&create(&app, &manifest, 1).await);

    let (s, v) = rate(&app, &items[0], "r1", 2).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((v["score"].as_u64(), v["revision"].as_u64()), (Some(2), Some(1)));
    assert_eq!(rate(&app, &items[0], "r1", 5).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(rate(&app, &items[0], "r1", -1).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(rate(&app, "s0001-ffffffffffff", "r1", 1).await.0, StatusCode::NOT_FOUND);
    assert_eq!(rate(&app, &items[0], "adj", 1).await.0, StatusCode::FORBIDDEN);

    rate(&app, &items[1], "r2", 1).await;
    let (_, v) = rate(&app, &items[1], "r2", 3).await;
    assert_eq!(v["revision"], 2);
    let (_, audit) = call(&app, "GET", &format!("/items/{}/audit", items[1]), None).await;
    let scores: Vec<u64> = audit["ratings"].as_array().unwrap().iter().map(|r| r["score"].as_u64().unwrap()).collect();
    assert_eq!(scores, vec![1, 3]);
    let (_, v) = call(&app, "GET", "/sessions/s0001/items?rater=r2", None).await;
    let item = v["items"].as_array().unwrap().iter().find(|i| i["item_id"] == items[1].as_str()).unwrap();
    assert_eq!(item["score"], 3);
}

#[tokio::test]
async fn consensus_flow() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 2, &[(View::Ap, Stage::PostEvt)]);
    let app = router(Arc::new(Store::in_memory()));
    let items = ids(&create(&app, &manifest, 1).await);
    rate(&app, &items[0], "r1", 2).await;
    rate(&app, &items[0], "r2", 2).await;
    rate(&app, &items[1], "r1", 1).await;
    rate(&app, &items[1], "r2", 3).await;
    rate(&app, &items[2], "r1", 0).await;

    let (_, v) = call(&app, "GET", "/sessions/s0001/consensus", None).await;
    let pending: Vec<&str> = v["pending"].as_array().unwrap().iter().map(|p| p["item_id"].as_str().unwrap()).collect();
    assert_eq!(pending, vec![items[1].as_str()]);
    assert_eq!(v["finalized"][0]["resolved_by"], "AGREEMENT");
    assert_eq!(v["incomplete"], 2);

    let adjudicate = |item: String, who: &'static str, score: i64| {
        let app = app.clone();
        async move {
            call(&app, "POST", "/consensus", Some(json!({"item_id": item, "adjudicator": who, "score": score}))).await
        }
    };
    assert_eq!(adjudicate(items[0].clone(), "adj", 2).await.0, StatusCode::CONFLICT);
    assert_eq!(adjudicate(items[2].clone(), "adj", 2).await.0, StatusCode::CONFLICT);
    assert_eq!(adjudicate(items[1].clone(), "r1", 2).await.0, StatusCode::FORBIDDEN);
    let (s, v) = adjudicate(items[1].clone(), "adj", 2).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((v["final_score"].as_u64(), v["resolved_by"].as_str()), (Some(2), Some("CONSENSUS")));
    let (_, v) = call(&app, "GET", "/sessions/s0001/consensus", None).await;
    assert!(v["pending"].as_array().unwrap().is_empty());

    let (s, v) = call(&app, "GET", "/sessions/s0001/results", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["unfinalized"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn all_perfect_scores_surface_no_discordant_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 3, &ALL_FOUR);
    let app = router(Arc::new(Store::in_memory()));
    let items = ids(&create(&app, &manifest, 1).await);
    for it in &items {
        rate(&app, it, "r1", 3).await;
        rate(&app, it, "r2", 3).await;
    }
    let (s, v) = call(&app, "GET", "/sessions/s0001/results", None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    for m in v["methods"].as_array().unwrap() {
        assert_eq!(m["acquisitions"]["rate"], 1.0);
        assert_eq!(m["per_patient"]["rate"], 1.0);
        assert_eq!(m["score_distribution"], json!([0, 0, 0, 12]));
    }
    assert_eq!(v["comparison"]["a_only"], 0);
    assert!(v["comparison"]["mcnemar"].is_null());
    assert!(v["comparison"]["error"].as_str().unwrap().contains("no discordant pairs"));
}

#[tokio::test]
async fn planted_success_rates_and_mcnemar() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 10, &ALL_FOUR);
    let store = Arc::new(Store::in_memory());
    let app = router(store.clone());
    create(&app, &manifest, 11).await;
    let session = store.get("s0001").unwrap();
    // MODEL succeeds for P01-P08, ATLAS for P01-P05 and P09.
    let model_ok = |p: usize| p <= 8;
    let atlas_ok = |p: usize| p <= 5 || p == 9;
    for it in &session.items {
        let p: usize = it.patient_id[1..].parse().unwrap();
        let ok = match it.method {
            Method::Model => model_ok(p),
            Method::Atlas => atlas_ok(p),
        };
        // a failing patient fails in exactly one acquisition
        let failing_view = it.view == View::Lateral && it.stage == Stage::PreEvt;
        let score = if ok || !failing_view { 2 } else { 1 };
        rate(&app, &it.item_id, "r1", score).await;
        // second rater disagrees upward on successes; adjudicated back
        let (_, _) = rate(&app, &it.item_id, "r2", if score == 2 { 3 } else { 1 }).await;
        if score == 2 {
            let (s, _) = call(
                &app,
                "POST",
                "/consensus",
                Some(json!({"item_id": it.item_id, "adjudicator": "adj", "score": 2})),
            )
            .await;
            assert_eq!(s, StatusCode::OK);
        }
    }
    let (s, v) = call(&app, "GET", "/sessions/s0001/results", None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let methods = v["methods"].as_array().unwrap();
    let model = methods.iter().find(|m| m["method"] == "MODEL").unwrap();
    let atlas = methods.iter().find(|m| m["method"] == "ATLAS").unwrap();
    assert_eq!(model["per_patient"]["rate"], 0.8);
    assert_eq!(atlas["per_patient"]["rate"], 0.6);
    // a failing patient still has three successful acquisitions
    assert_eq!(model["acquisitions"]["successes"], 38);
    assert_eq!((v["comparison"]["a_only"].as_u64(), v["comparison"]["b_only"].as_u64()), (Some(3), Some(1)));
    let expected = mcnemar(3, 1).unwrap();
    assert_eq!(v["comparison"]["mcnemar"]["p_value"].as_f64().unwrap(), expected.p_value);
    assert_eq!(v["comparison"]["mcnemar"]["statistic"].as_f64().unwrap(), expected.statistic);

    // conjunction monotonicity: per-patient rate never exceeds any (view, stage) rate
    for m in methods {
        let mut by_acq: BTreeMap<(String, String), (u64, u64)> = BTreeMap::new();
        for s in m["strata"].as_array().unwrap() {
            let e = by_acq.entry((s["view"].to_string(), s["stage"].to_string())).or_default();
            e.0 += s["successes"].as_u64().unwrap();
            e.1 += s["total"].as_u64().unwrap();
        }
        let pp = m["per_patient"]["rate"].as_f64().unwrap();
        for (ok, n) in by_acq.values() {
            assert!(pp <= *ok as f64 / *n as f64 + 1e-12);
        }
    }
}

#[tokio::test]
async fn rater_payloads_are_blinded() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 3, &[(View::Ap, Stage::PostEvt)]);
    let app = router(Arc::new(Store::in_memory()));
    let items = ids(&create(&app, &manifest, 1).await);
    rate(&app, &items[0], "r1", 1).await;
    rate(&app, &items[0], "r2", 3).await;
    let mut payloads = Vec::new();
    for r in ["r1", "r2"] {
        payloads.push(call(&app, "GET", &format!("/sessions/s0001/items?rater={r}"), None).await.1);
    }
    payloads.push(call(&app, "GET", "/sessions/s0001/consensus", None).await.1);
    payloads.push(call(&app, "GET", &format!("/items/{}/audit", items[0]), None).await.1);
    payloads.push(rate(&app, &items[1], "r1", 2).await.1);
    for p in payloads {
        let text = p.to_string().to_lowercase();
        assert_eq!(p["schema_version"], 1);
        for word in ["model", "atlas", "method"] {
            assert!(!text.contains(word), "{word} leaked in {text}");
        }
    }
}

#[tokio::test]
async fn unblinded_sessions_show_methods() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 1, &[(View::Ap, Stage::PostEvt)]);
    let app = router(Arc::new(Store::in_memory()));
    let (s, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"manifest_path": manifest, "raters": ["r1", "r2"], "adjudicator": "adj", "blinded": false})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let (_, v) = call(&app, "GET", "/sessions/s0001/items?rater=r1", None).await;
    assert!(v["items"][0]["method"].is_string());
}

#[tokio::test]
async fn missing_mask_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 2, &[(View::Ap, Stage::PostEvt)]);
    let mut m = CohortManifest::load(&manifest).unwrap();
    m.cases[1].acquisitions[0].predictions.remove(&Method::Atlas);
    let app = router(Arc::new(Store::in_memory()));
    let (s, v) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"manifest": m, "base_dir": dir.path(), "raters": ["r1", "r2"], "adjudicator": "adj"})),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].as_str().unwrap().contains("P02"));
}

#[tokio::test]
async fn item_image_is_png() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 1, &[(View::Ap, Stage::PostEvt)]);
    let app = router(Arc::new(Store::in_memory()));
    let items = ids(&create(&app, &manifest, 1).await);
    for q in ["", "?overlay=false"] {
        let req = Request::get(format!("/items/{}/image{q}", items[0])).body(Body::empty()).unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        assert_eq!(resp.headers()["content-type"], "image/png");
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let img = image::load_from_memory(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (16, 16));
    }
}
