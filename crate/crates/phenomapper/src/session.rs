//! In-memory sessions with optional directory persistence.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use phenomapper_core::analysis::Registry;
use phenomapper_core::data::ColumnInfo;
use phenomapper_core::document::{
    import_subpopulation, table_from_records, table_records, Positions, RowRecord,
};
use phenomapper_core::{DataTable, LayoutMethod, MapperGraph};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::ServiceError;
use crate::pipeline::{graph_document, LaidOutGraph, LayoutInfo};

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 100 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct StoredGraph {
    pub graph: MapperGraph,
    pub positions: Option<Positions>,
    pub layout: Option<LayoutInfo>,
}

impl StoredGraph {
    pub fn laid_out(&self) -> LaidOutGraph {
        LaidOutGraph {
            graph: self.graph.clone(),
            positions: self.positions.clone(),
            layout: self.layout.clone(),
        }
    }
}

impl From<LaidOutGraph> for StoredGraph {
    fn from(g: LaidOutGraph) -> Self {
        StoredGraph {
            graph: g.graph,
            positions: g.positions,
            layout: g.layout,
        }
    }
}

#[derive(Debug, Default)]
struct Graphs {
    next: u64,
    by_id: BTreeMap<String, Arc<StoredGraph>>,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub dataset: Arc<DataTable>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    /// Session this one was imported from.
    pub parent: Option<String>,
    graphs: RwLock<Graphs>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphSummary {
    pub graph_id: String,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub layout: Option<LayoutInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub dataset: String,
    pub columns: Vec<ColumnInfo>,
    pub n_rows: usize,
    pub created_at: u64,
    pub parent: Option<String>,
    pub graphs: Vec<GraphSummary>,
}

impl Session {
    fn new(dataset: DataTable, parent: Option<String>) -> Self {
        Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            dataset: Arc::new(dataset),
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            parent,
            graphs: RwLock::default(),
        }
    }

    pub fn graph(&self, gid: &str) -> Result<Arc<StoredGraph>, ServiceError> {
        self.graphs
            .read()
            .expect("graph lock poisoned")
            .by_id
            .get(gid)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownGraph(gid.to_string()))
    }

    /// Stores `graph` under a fresh id and returns the id.
    pub fn add_graph(&self, graph: StoredGraph) -> String {
        let mut graphs = self.graphs.write().expect("graph lock poisoned");
        graphs.next += 1;
        let gid = format!("g{}", graphs.next);
        graphs.by_id.insert(gid.clone(), Arc::new(graph));
        gid
    }

    pub fn replace_graph(&self, gid: &str, graph: StoredGraph) -> Result<(), ServiceError> {
        let mut graphs = self.graphs.write().expect("graph lock poisoned");
        match graphs.by_id.get_mut(gid) {
            Some(slot) => {
                *slot = Arc::new(graph);
                Ok(())
            }
            None => Err(ServiceError::UnknownGraph(gid.to_string())),
        }
    }

    pub fn summary(&self) -> SessionSummary {
        let graphs = self.graphs.read().expect("graph lock poisoned");
        SessionSummary {
            session_id: self.id.clone(),
            dataset: self.dataset.name().to_string(),
            columns: self.dataset.schema(),
            n_rows: self.dataset.n_rows(),
            created_at: self.created_at,
            parent: self.parent.clone(),
            graphs: graphs
                .by_id
                .iter()
                .map(|(gid, g)| GraphSummary {
                    graph_id: gid.clone(),
                    n_nodes: g.graph.nodes.len(),
                    n_edges: g.graph.edges.len(),
                    layout: g.layout.clone(),
                })
                .collect(),
        }
    }
}

/// Shared server state.
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    pub registry: Registry,
    pub persist_dir: Option<PathBuf>,
    pub max_upload_bytes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionFile {
    name: String,
    columns: Vec<ColumnInfo>,
    rows: Vec<RowRecord>,
    created_at: u64,
    parent: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayoutFile {
    layouts: BTreeMap<String, Option<LayoutInfo>>,
}

impl AppState {
    pub fn new(registry: Registry, persist_dir: Option<PathBuf>, max_upload_bytes: usize) -> Self {
        AppState {
            sessions: RwLock::default(),
            registry,
            persist_dir,
            max_upload_bytes,
        }
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .read()
            .expect("session lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self, dataset: DataTable, parent: Option<String>) -> Result<Arc<Session>, ServiceError> {
        let session = Arc::new(Session::new(dataset, parent));
        self.persist_session(&session)?;
        self.sessions
            .write()
            .expect("session lock poisoned")
            .insert(session.id.clone(), session.clone());
        Ok(session)
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn session_dir(&self, id: &str) -> Option<PathBuf> {
        self.persist_dir.as_ref().map(|d| d.join(id))
    }

    fn persist_session(&self, session: &Session) -> Result<(), ServiceError> {
        let Some(dir) = self.session_dir(&session.id) else {
            return Ok(());
        };
        fs::create_dir_all(&dir).map_err(io_error)?;
        let file = SessionFile {
            name: session.dataset.name().to_string(),
            columns: session.dataset.schema(),
            rows: table_records(&session.dataset),
            created_at: session.created_at,
            parent: session.parent.clone(),
        };
        let bytes = serde_json::to_vec(&file).map_err(|e| ServiceError::Internal(e.to_string()))?;
        write_atomic(&dir.join("session.json"), &bytes)
    }

    /// Writes the graph document and layout metadata for `gid`.
    pub fn persist_graph(&self, session: &Session, gid: &str) -> Result<(), ServiceError> {
        let Some(dir) = self.session_dir(&session.id) else {
            return Ok(());
        };
        let stored = session.graph(gid)?;
        let doc = graph_document(&session.dataset, &stored.laid_out())?;
        write_atomic(&dir.join(format!("{gid}.json")), &doc.to_json())?;
        let layouts = LayoutFile {
            layouts: session
                .graphs
                .read()
                .expect("graph lock poisoned")
                .by_id
                .iter()
                .map(|(k, g)| (k.clone(), g.layout.clone()))
                .collect(),
        };
        let bytes = serde_json::to_vec(&layouts).map_err(|e| ServiceError::Internal(e.to_string()))?;
        write_atomic(&dir.join("layouts.json"), &bytes)
    }

    /// Loads every session found under the persistence directory. Unreadable
    /// sessions are skipped with a warning.
    pub fn restore(&self) -> Result<usize, ServiceError> {
        let Some(root) = &self.persist_dir else {
            return Ok(0);
        };
        if !root.exists() {
            return Ok(0);
        }
        let mut restored = 0;
        for entry in fs::read_dir(root).map_err(io_error)? {
            let path = entry.map_err(io_error)?.path();
            if !path.is_dir() {
                continue;
            }
            match load_session(&path) {
                Ok(session) => {
                    self.sessions
                        .write()
                        .expect("session lock poisoned")
                        .insert(session.id.clone(), Arc::new(session));
                    restored += 1;
                }
                Err(e) => warn!(path = %path.display(), error = %e, "skipping unreadable session"),
            }
        }
        Ok(restored)
    }
}

fn io_error(e: std::io::Error) -> ServiceError {
    ServiceError::Io(e.to_string())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, bytes).map_err(io_error)?;
    fs::rename(&tmp, path).map_err(io_error)
}

fn load_session(dir: &Path) -> Result<Session, ServiceError> {
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| ServiceError::Io(format!("bad session directory {}", dir.display())))?
        .to_string();
    let bytes = fs::read(dir.join("session.json")).map_err(io_error)?;
    let file: SessionFile = serde_json::from_slice(&bytes).map_err(|e| ServiceError::Io(e.to_string()))?;
    let table = table_from_records(&file.name, &file.columns, file.rows)?;
    let layouts: BTreeMap<String, Option<LayoutInfo>> = match fs::read(dir.join("layouts.json")) {
        Ok(b) => serde_json::from_slice::<LayoutFile>(&b)
            .map_err(|e| ServiceError::Io(e.to_string()))?
            .layouts,
        Err(_) => BTreeMap::new(),
    };

    let mut graphs = Graphs::default();
    for (gid, layout) in layouts {
        let Some(n) = gid.strip_prefix('g').and_then(|n| n.parse::<u64>().ok()) else {
            continue;
        };
        let doc = fs::read(dir.join(format!("{gid}.json"))).map_err(io_error)?;
        let imported = import_subpopulation(&doc)?;
        let layout = layout.or_else(|| {
            imported.positions.as_ref().map(|_| LayoutInfo {
                method: LayoutMethod::Force,
                aligned_filter: None,
                seed: 0,
            })
        });
        graphs.next = graphs.next.max(n);
        graphs.by_id.insert(
            gid,
            Arc::new(StoredGraph {
                graph: imported.graph,
                positions: imported.positions,
                layout,
            }),
        );
    }
    Ok(Session {
        id,
        dataset: Arc::new(table),
        created_at: file.created_at,
        parent: file.parent,
        graphs: RwLock::new(graphs),
    })
}
