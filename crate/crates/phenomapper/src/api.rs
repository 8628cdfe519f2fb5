//! HTTP routes.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use phenomapper_core::data::{load_csv, scatter_data, LoadOptions};
use phenomapper_core::document::{export_subpopulation, import_subpopulation, SubpopulationDocument};
use phenomapper_core::selection::select;
use phenomapper_core::SelectionMode;
use serde::Deserialize;
use serde_json::{json, Value as Json_};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;
use tracing::info;

use crate::error::{decode_json, ServiceError};
use crate::pipeline::{
    graph_document, layout_graph, parse_ids, resolve_selection, run_analysis, run_mapper,
    validate_position_update, LayoutRequest, MapperRequest, SelectionRequest,
};
use crate::session::{AppState, Session, StoredGraph};

pub type SharedState = Arc<AppState>;
type ApiResult = Result<Response, ServiceError>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

pub fn router(state: SharedState, static_dir: Option<PathBuf>) -> Router {
    let limit = state.max_upload_bytes;
    let api = Router::new()
        .route("/health", get(health))
        .route("/modules", get(modules))
        .route("/datasets", post(upload))
        .route("/sessions/{sid}", get(session_info))
        .route("/sessions/{sid}/mapper", post(mapper))
        .route("/sessions/{sid}/graphs/{gid}", get(graph_json))
        .route("/sessions/{sid}/graphs/{gid}/dot", get(graph_dot))
        .route("/sessions/{sid}/graphs/{gid}/layout", post(relayout))
        .route("/sessions/{sid}/graphs/{gid}/positions", axum::routing::put(update_positions))
        .route("/sessions/{sid}/graphs/{gid}/selection", post(selection))
        .route("/sessions/{sid}/graphs/{gid}/export", get(export))
        .route("/sessions/{sid}/import", post(import))
        .route("/sessions/{sid}/analysis/{module}", post(analysis))
        .route("/sessions/{sid}/scatter", get(scatter))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    let api = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { not_found() }),
    };
    api.layer(TraceLayer::new_for_http())
}

fn not_found() -> Response {
    let body = json!({"error_code": "NotFound", "message": "no such route", "detail_path": null});
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(state: SharedState, addr: SocketAddr, static_dir: Option<PathBuf>) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::Io(format!("cannot bind {addr}: {e}")))?;
    info!(%addr, "listening");
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))
}

fn body_bytes(body: Result<Bytes, BytesRejection>, limit: usize) -> Result<Bytes, ServiceError> {
    body.map_err(|e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ServiceError::PayloadTooLarge(limit)
        } else {
            ServiceError::MalformedJson(e.body_text())
        }
    })
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ServiceError> {
    q.map(|Query(v)| v).map_err(|e| ServiceError::BadQuery(e.body_text()))
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

/// Runs CPU-heavy work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

fn document_value(doc: &SubpopulationDocument) -> Result<Json_, ServiceError> {
    serde_json::from_slice(&doc.to_json()).map_err(|e| ServiceError::Internal(e.to_string()))
}

async fn health() -> &'static str {
    "ok"
}

async fn modules(State(state): State<SharedState>) -> ApiResult {
    let mut out = serde_json::Map::new();
    for name in state.registry.names() {
        out.insert(name.clone(), state.registry.schema(&name)?);
    }
    Ok(Json(out).into_response())
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    name: Option<String>,
    delimiter: Option<char>,
    missing: Option<String>,
    has_header: Option<bool>,
}

async fn upload(
    State(state): State<SharedState>,
    q: Result<Query<UploadQuery>, QueryRejection>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let q = query(q)?;
    let body = body_bytes(body, state.max_upload_bytes)?;
    let mut options = LoadOptions::default();
    if let Some(d) = q.delimiter {
        if !d.is_ascii() {
            return Err(ServiceError::BadQuery("delimiter must be a single ASCII character".into()));
        }
        options.delimiter = d as u8;
    }
    if let Some(m) = q.missing {
        options.missing_token = m;
    }
    if let Some(h) = q.has_header {
        options.has_header = h;
    }
    let name = q.name.unwrap_or_else(|| "dataset".to_string());
    let state2 = state.clone();
    let session = blocking(move || {
        let table = load_csv(&name, body.as_ref(), &options).map_err(ServiceError::Upload)?;
        state2.create_session(table, None)
    })
    .await?;
    info!(session = %session.id, rows = session.dataset.n_rows(), "dataset uploaded");
    let body = json!({
        "session_id": session.id,
        "columns": session.dataset.schema(),
        "n_rows": session.dataset.n_rows(),
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn session_info(State(state): State<SharedState>, Path(sid): Path<String>) -> ApiResult {
    Ok(Json(state.session(&sid)?.summary()).into_response())
}

fn graph_response(gid: &str, stored: &StoredGraph, doc: &SubpopulationDocument) -> Result<Json_, ServiceError> {
    Ok(json!({
        "graph_id": gid,
        "layout": stored.layout,
        "graph": document_value(doc)?,
    }))
}

async fn mapper(
    State(state): State<SharedState>,
    Path(sid): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let session = state.session(&sid)?;
    let req: MapperRequest = decode_json(&body_bytes(body, state.max_upload_bytes)?)?;
    let table = session.dataset.clone();
    let (stored, doc) = blocking(move || {
        let g = run_mapper(&table, &req)?;
        let doc = graph_document(&table, &g)?;
        Ok((StoredGraph::from(g), doc))
    })
    .await?;
    let gid = session.add_graph(stored.clone());
    state.persist_graph(&session, &gid)?;
    Ok((StatusCode::CREATED, Json(graph_response(&gid, &stored, &doc)?)).into_response())
}

async fn graph_json(State(state): State<SharedState>, Path((sid, gid)): Path<(String, String)>) -> ApiResult {
    let session = state.session(&sid)?;
    let stored = session.graph(&gid)?;
    let doc = graph_document(&session.dataset, &stored.laid_out())?;
    Ok(json_bytes(doc.to_json()))
}

async fn graph_dot(State(state): State<SharedState>, Path((sid, gid)): Path<(String, String)>) -> ApiResult {
    let stored = state.session(&sid)?.graph(&gid)?;
    Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz")], stored.graph.to_dot()).into_response())
}

async fn relayout(
    State(state): State<SharedState>,
    Path((sid, gid)): Path<(String, String)>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let session = state.session(&sid)?;
    let stored = session.graph(&gid)?;
    let req: LayoutRequest = decode_json(&body_bytes(body, state.max_upload_bytes)?)?;
    let table = session.dataset.clone();
    let (updated, doc) = blocking(move || {
        let (positions, layout) = layout_graph(&stored.graph, &req)?;
        let updated = StoredGraph {
            graph: stored.graph.clone(),
            positions,
            layout,
        };
        let doc = graph_document(&table, &updated.laid_out())?;
        Ok((updated, doc))
    })
    .await?;
    session.replace_graph(&gid, updated.clone())?;
    state.persist_graph(&session, &gid)?;
    Ok(Json(graph_response(&gid, &updated, &doc)?).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PositionsUpdate {
    positions: BTreeMap<usize, [f64; 2]>,
}

async fn update_positions(
    State(state): State<SharedState>,
    Path((sid, gid)): Path<(String, String)>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let session = state.session(&sid)?;
    let stored = session.graph(&gid)?;
    let req: PositionsUpdate = decode_json(&body_bytes(body, state.max_upload_bytes)?)?;
    validate_position_update(&stored.graph, stored.positions.as_ref(), stored.layout.as_ref(), &req.positions)?;
    let mut positions = stored.positions.clone().unwrap_or_default();
    positions.extend(req.positions);
    let updated = StoredGraph {
        graph: stored.graph.clone(),
        positions: Some(positions),
        layout: stored.layout.clone(),
    };
    let doc = graph_document(&session.dataset, &updated.laid_out())?;
    session.replace_graph(&gid, updated.clone())?;
    state.persist_graph(&session, &gid)?;
    Ok(Json(graph_response(&gid, &updated, &doc)?).into_response())
}

async fn selection(
    State(state): State<SharedState>,
    Path((sid, gid)): Path<(String, String)>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let stored = state.session(&sid)?.graph(&gid)?;
    let req: SelectionRequest = decode_json(&body_bytes(body, state.max_upload_bytes)?)?;
    Ok(Json(resolve_selection(&gid, &stored.graph, &req)?).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    /// `mode:ids`, e.g. `component:3` or `nodes:1,2`.
    selection: Option<String>,
    mode: Option<String>,
    seeds: Option<String>,
}

fn parse_export_selection(q: ExportQuery) -> Result<Option<(SelectionMode, Vec<usize>)>, ServiceError> {
    let (mode, seeds) = match (q.selection, q.mode) {
        (None, None) => return Ok(None),
        (Some(_), Some(_)) => return Err(ServiceError::BadQuery("give either `selection` or `mode`, not both".into())),
        (Some(sel), None) => match sel.split_once(':') {
            Some((m, s)) => (m.to_string(), s.to_string()),
            None => (sel, String::new()),
        },
        (None, Some(m)) => (m, q.seeds.unwrap_or_default()),
    };
    let mode: SelectionMode = mode.parse().map_err(|e: phenomapper_core::SelectionError| ServiceError::BadQuery(e.to_string()))?;
    let seeds = parse_ids(&seeds).map_err(ServiceError::BadQuery)?;
    Ok(Some((mode, seeds)))
}

async fn export(
    State(state): State<SharedState>,
    Path((sid, gid)): Path<(String, String)>,
    q: Result<Query<ExportQuery>, QueryRejection>,
) -> ApiResult {
    let session = state.session(&sid)?;
    let stored = session.graph(&gid)?;
    let selection = match parse_export_selection(query(q)?)? {
        None => None,
        Some((mode, seeds)) => {
            let mut s = select(&stored.graph, mode, &seeds)?;
            s.graph_id = Some(gid.clone());
            Some(s)
        }
    };
    let doc = export_subpopulation(&stored.graph, selection.as_ref(), &session.dataset, stored.positions.as_ref())?;
    let disposition = format!("attachment; filename=\"{}-{gid}.json\"", session.dataset.name());
    Ok((
        [(header::CONTENT_TYPE, "application/json".to_string()), (header::CONTENT_DISPOSITION, disposition)],
        doc.to_json(),
    )
        .into_response())
}

async fn import(
    State(state): State<SharedState>,
    Path(sid): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let parent: Arc<Session> = state.session(&sid)?;
    let bytes = body_bytes(body, state.max_upload_bytes)?;
    let imported = blocking(move || Ok(import_subpopulation(&bytes)?)).await?;
    let stored = StoredGraph {
        graph: imported.graph,
        positions: imported.positions,
        layout: None,
    };
    let child = state.create_session(imported.table, Some(parent.id.clone()))?;
    let gid = child.add_graph(stored.clone());
    state.persist_graph(&child, &gid)?;
    let doc = graph_document(&child.dataset, &stored.laid_out())?;
    let body = json!({
        "session_id": child.id,
        "parent": parent.id,
        "columns": child.dataset.schema(),
        "n_rows": child.dataset.n_rows(),
        "graph_id": gid,
        "graph": document_value(&doc)?,
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn analysis(
    State(state): State<SharedState>,
    Path((sid, module)): Path<(String, String)>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let session = state.session(&sid)?;
    let bytes = body_bytes(body, state.max_upload_bytes)?;
    let params: Json_ = if bytes.iter().all(u8::is_ascii_whitespace) {
        json!({})
    } else {
        decode_json(&bytes)?
    };
    let table = session.dataset.clone();
    let state2 = state.clone();
    let result = blocking(move || run_analysis(&state2.registry, &table, &module, params)).await?;
    Ok(Json(result).into_response())
}

#[derive(Debug, Deserialize)]
struct ScatterQuery {
    x: String,
    y: String,
    color: Option<String>,
}

async fn scatter(
    State(state): State<SharedState>,
    Path(sid): Path<String>,
    q: Result<Query<ScatterQuery>, QueryRejection>,
) -> ApiResult {
    let q = query(q)?;
    let session = state.session(&sid)?;
    let points = scatter_data(&session.dataset, &q.x, &q.y, q.color.as_deref())?;
    Ok(Json(json!({"x": q.x, "y": q.y, "color": q.color, "points": points})).into_response())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(selection: Option<&str>, mode: Option<&str>, seeds: Option<&str>) -> ExportQuery {
        ExportQuery {
            selection: selection.map(String::from),
            mode: mode.map(String::from),
            seeds: seeds.map(String::from),
        }
    }

    #[test]
    fn export_selection_forms() {
        assert_eq!(parse_export_selection(q(None, None, None)).unwrap(), None);
        assert_eq!(
            parse_export_selection(q(Some("nodes:1,2"), None, None)).unwrap(),
            Some((SelectionMode::Nodes, vec![1, 2]))
        );
        assert_eq!(
            parse_export_selection(q(None, Some("path"), Some("0,3"))).unwrap(),
            Some((SelectionMode::Path, vec![0, 3]))
        );
        assert!(parse_export_selection(q(Some("bogus:1"), None, None)).is_err());
        assert!(parse_export_selection(q(Some("nodes:1"), Some("nodes"), None)).is_err());
    }
}
