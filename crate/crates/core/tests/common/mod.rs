#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use tower::ServiceExt;

use personaflag::classifier::synthetic::reference_models;
use personaflag::classifier::LinearModel;
use personaflag::ensemble::Detector;
use personaflag::generation::StubClient;
use personaflag::service::{AppState, ServiceConfig};

pub const FIXTURE_PARAGRAPH: &str = "I am 24 and I work at the bakery on weekdays. \
People with Down syndrome are always happy and will never hold a real job. \
My sister is a nurse so she must be gentle and submissive. \
On Sundays we walk the dog and watch movies with family.";

pub const MODEL_DIM: usize = 1 << 14;
pub const MODEL_SEED: u64 = 42;

pub fn models() -> [LinearModel; 3] {
    static MODELS: OnceLock<[LinearModel; 3]> = OnceLock::new();
    MODELS
        .get_or_init(|| reference_models(MODEL_DIM, MODEL_SEED).expect("reference models"))
        .clone()
}

pub fn detector() -> Detector {
    Detector::from_models(models(), Arc::new(StubClient::new(0))).unwrap()
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Compares `actual` with `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites
/// the file instead.
pub fn check_golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() || !path.exists() {
        std::fs::write(&path, actual).unwrap();
        if std::env::var_os("UPDATE_GOLDEN").is_none() {
            eprintln!("created golden file {}", path.display());
        }
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert!(expected == actual, "golden mismatch for {name}\nexpected: {expected}\nactual:   {actual}");
}

pub fn service_config(data: Option<&Path>) -> ServiceConfig {
    ServiceConfig {
        data_dir: data.map(Path::to_path_buf),
        abilities_path: data_dir().join("abilities.json"),
        kb_path: data_dir().join("kb"),
        ..ServiceConfig::default()
    }
}

pub fn app(config: ServiceConfig) -> Router {
    let state = AppState::from_parts(config, models(), Arc::new(StubClient::new(0))).unwrap();
    personaflag::service::router(state)
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

pub const PERSONA_BODY: &str = r#"{"age": 24, "gender": "female", "occupation": "Artist", "theme": "employment",
"abilities": {"drivers": ["attention to detail"], "barriers": ["long commute"], "supports": ["job coach"]}}"#;
