#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{to_bytes, Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use phenomapper::api::router;
use phenomapper::session::{AppState, DEFAULT_MAX_UPLOAD_BYTES};
use phenomapper_core::analysis::Registry;
use serde_json::Value;
use tower::ServiceExt;

pub struct Api {
    pub state: Arc<AppState>,
    router: Router,
}

pub struct Reply {
    pub status: StatusCode,
    pub bytes: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("response is not JSON ({e}): {}", String::from_utf8_lossy(&self.bytes)))
    }
}

impl Api {
    pub fn new() -> Self {
        Self::with(None, DEFAULT_MAX_UPLOAD_BYTES, None)
    }

    pub fn with(persist_dir: Option<PathBuf>, limit: usize, static_dir: Option<PathBuf>) -> Self {
        let state = Arc::new(AppState::new(Registry::with_defaults(), persist_dir, limit));
        state.restore().unwrap();
        Api {
            router: router(state.clone(), static_dir),
            state,
        }
    }

    pub async fn call(&self, method: Method, uri: &str, body: impl Into<Body>) -> Reply {
        let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        Reply { status, bytes }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.call(Method::GET, uri, Body::empty()).await
    }

    pub async fn post_json(&self, uri: &str, body: &Value) -> Reply {
        self.call(Method::POST, uri, serde_json::to_vec(body).unwrap()).await
    }

    /// Uploads `csv` and returns the session id.
    pub async fn upload(&self, name: &str, csv: &str) -> String {
        let r = self.call(Method::POST, &format!("/datasets?name={name}"), csv.to_string()).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.bytes));
        r.json()["session_id"].as_str().unwrap().to_string()
    }

    /// Runs mapper in `sid` and returns (graph id, response body).
    pub async fn mapper(&self, sid: &str, req: &Value) -> (String, Value) {
        let r = self.post_json(&format!("/sessions/{sid}/mapper"), req).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.bytes));
        let v = r.json();
        (v["graph_id"].as_str().unwrap().to_string(), v)
    }
}

pub fn circle_request(layout: &str) -> Value {
    serde_json::json!({
        "point_columns": ["x", "y"],
        "filters": [{"column": "y", "n": 8, "overlap": 0.3}],
        "cluster": {"epsilon": 0.3, "min_pts": 3},
        "norm": "minmax",
        "layout": {"method": layout, "seed": 7}
    })
}
