#![allow(dead_code)]

use std::path::Path;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use swimset_core::model::*;
use swimset_core::storage::save_manifest;
use swimset_core::DatasetManifest;
use swimset_service::{router, AnnotationStore, AppState, Config};
use tower::ServiceExt;

pub const VIDEO: &str = "heat-1";

pub fn frame_id(index: u64) -> String {
    format!("{VIDEO}-{index:06}")
}

/// One race with frames 0..=60, a dive range over [0, 9] and lane 4
/// annotated on the blocks (0), diving (5) and swimming (15).
pub fn race_manifest() -> DatasetManifest {
    let mut m = DatasetManifest::new("heat");
    m.videos.push(RaceMetadata {
        video_id: VIDEO.into(),
        venue_name: "Bloomington".into(),
        course: Course::Scy,
        lane_count: 8,
        lighting: Lighting::Indoor,
        bulkhead_present: true,
        block_style: "track-start".into(),
        pool_depth: None,
        camera_height: CameraHeight::PoolLevel,
        camera_position: CameraPosition::DiveView,
        stroke: Stroke::Freestyle,
        race_distance_m: 50,
        nominal_duration_s: None,
        gender: Gender::Male,
        age_group: "open".into(),
        flags_present: true,
        fps: 30.0,
        race_start_frame: Some(0),
        dive_ranges: vec![FrameRange::new(0, 9)],
    });
    for i in 0..=60u64 {
        m.frames.push(FrameRecord::new(&frame_id(i), VIDEO, i, 640, 360));
    }
    for (i, c) in [
        (0, SwimmerClass::OnBlocks),
        (5, SwimmerClass::Diving),
        (15, SwimmerClass::Swimming),
    ] {
        let b = BoundingBox::new(100.0, 150.0, 140.0, 180.0).unwrap();
        m.frames[i].annotations.push(Annotation::new(b, c, 4, "lane-4"));
    }
    m
}

pub fn start(manifest: DatasetManifest, path: Option<&Path>) -> (AppState, Router) {
    if let Some(p) = path {
        save_manifest(&manifest, p).unwrap();
    }
    let store = AnnotationStore::new(manifest, path.map(Path::to_path_buf), Config::default()).unwrap();
    let state = AppState::start(store);
    let app = router(state.clone(), None);
    (state, app)
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&v).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

pub fn draft(class: &str, track: &str, lane: u32, b: [f64; 4]) -> Value {
    serde_json::json!({
        "x_min": b[0], "y_min": b[1], "x_max": b[2], "y_max": b[3],
        "swimmer_class": class, "lane": lane, "track_id": track, "visible_fraction": 1.0
    })
}

pub fn put_body(annotations: Vec<Value>, expected_version: u64) -> Value {
    serde_json::json!({ "annotations": annotations, "expected_version": expected_version })
}

/// Tallies from [`fuzz`].
#[derive(Debug, Default)]
pub struct FuzzOutcome {
    pub operations: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub conflicts: usize,
    pub not_found: usize,
    /// Descriptions of any stored state that broke a rule; must stay empty.
    pub breaches: Vec<String>,
}

/// Random API traffic against a persisted race. After every write the file
/// on disk is reloaded and checked against all annotation and track rules,
/// and compared with the served snapshot.
pub async fn fuzz(operations: usize, seed: u64) -> FuzzOutcome {
    use rand::{Rng, SeedableRng};
    use swimset_core::validation::ValidationRules;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fuzz.json");
    let (state, app) = start(race_manifest(), Some(&path));
    let classes = ["on_blocks", "diving", "underwater", "swimming", "turning", "finishing"];
    let mut out = FuzzOutcome::default();
    for _ in 0..operations {
        out.operations += 1;
        let index = rng.random_range(0..=62u64);
        let id = frame_id(index);
        match rng.random_range(0..10) {
            0 => {
                let (s, _) = call(&app, Method::GET, &format!("/api/frames/{id}"), None).await;
                assert!(s == StatusCode::OK || s == StatusCode::NOT_FOUND);
            }
            1 => {
                let uri = format!("/api/next_frame?video_id={VIDEO}&after={index}");
                assert_eq!(call(&app, Method::GET, &uri, None).await.0, StatusCode::OK);
            }
            2 => {
                assert_eq!(call(&app, Method::GET, "/api/progress", None).await.0, StatusCode::OK);
            }
            _ => {
                let current = state.snapshot().frame(&id).map(|f| f.version).unwrap_or(0);
                let expected = if rng.random_bool(0.85) {
                    current
                } else {
                    current + rng.random_range(1..3)
                };
                let mut drafts = Vec::new();
                for _ in 0..rng.random_range(0..4) {
                    let lane = rng.random_range(1..=8u32);
                    let track = format!("lane-{lane}");
                    let class = if rng.random_bool(0.7) {
                        let uri = format!("/api/tracks/{track}/legal_next?video_id={VIDEO}&frame_index={index}");
                        let (_, v) = call(&app, Method::GET, &uri, None).await;
                        let legal = v["classes"].as_array().cloned().unwrap_or_default();
                        if legal.is_empty() {
                            classes[rng.random_range(0..6)].to_string()
                        } else {
                            legal[rng.random_range(0..legal.len())].as_str().unwrap().to_string()
                        }
                    } else {
                        classes[rng.random_range(0..6)].to_string()
                    };
                    let x = rng.random_range(-20.0..640.0);
                    let y = rng.random_range(-20.0..360.0);
                    let b = [x, y, x + rng.random_range(-5.0..80.0), y + rng.random_range(-5.0..60.0)];
                    let mut d = draft(&class, &track, lane, b);
                    d["visible_fraction"] = rng.random_range(0.0..1.0).into();
                    drafts.push(d);
                }
                let uri = format!("/api/frames/{id}/annotations");
                let (s, v) = call(&app, Method::PUT, &uri, Some(put_body(drafts, expected))).await;
                match s {
                    StatusCode::OK => {
                        out.accepted += 1;
                        if v["version"] != expected + 1 {
                            out.breaches
                                .push(format!("version {} after expecting {expected}", v["version"]));
                        }
                    }
                    StatusCode::UNPROCESSABLE_ENTITY => out.rejected += 1,
                    StatusCode::CONFLICT => out.conflicts += 1,
                    StatusCode::NOT_FOUND => out.not_found += 1,
                    other => out.breaches.push(format!("unexpected status {other}: {v}")),
                }
                if s == StatusCode::OK && expected != current {
                    out.breaches.push(format!("stale version {expected} accepted for {id}"));
                }
                match swimset_core::storage::load_manifest(&path) {
                    Ok(stored) => {
                        let tracks = stored.track_violations(&ValidationRules::default());
                        if !tracks.is_empty() {
                            out.breaches.push(format!("stored track violation: {}", tracks[0]));
                        }
                        if stored != *state.snapshot().manifest {
                            out.breaches.push("disk and served snapshot differ".into());
                        }
                    }
                    Err(e) => out.breaches.push(format!("stored manifest invalid: {e}")),
                }
            }
        }
    }
    out
}

/// Fires `writers` simultaneous puts at one frame, all expecting version 0.
/// Returns (successes, conflicts).
pub async fn race_writers(writers: usize, frame: u64) -> (usize, usize) {
    let (_, app) = start(race_manifest(), None);
    let uri = format!("/api/frames/{}/annotations", frame_id(frame));
    let mut handles = Vec::new();
    for w in 0..writers {
        let app = app.clone();
        let uri = uri.clone();
        handles.push(tokio::spawn(async move {
            let x = 10.0 + w as f64;
            let body = put_body(vec![draft("swimming", "lane-2", 2, [x, 10.0, x + 30.0, 40.0])], 0);
            call(&app, Method::PUT, &uri, Some(body)).await.0
        }));
    }
    let mut ok = 0;
    let mut conflict = 0;
    for h in handles {
        match h.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => conflict += 1,
            other => panic!("unexpected {other}"),
        }
    }
    (ok, conflict)
}
