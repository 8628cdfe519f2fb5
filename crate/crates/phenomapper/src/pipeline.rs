//! Request types and the computations shared by the HTTP API and the CLI.
//! Both front ends go through these functions, so identical requests give
//! identical documents.

use std::collections::BTreeMap;

use phenomapper_core::analysis::Registry;
use phenomapper_core::data::RowId;
use phenomapper_core::document::{export_subpopulation, Positions, SubpopulationDocument};
use phenomapper_core::layout::{filter_aligned_layout, force_layout};
use phenomapper_core::mapper::compute_mapper;
use phenomapper_core::selection::{select, subpopulation_rows, Selection, SelectionMode};
use phenomapper_core::{
    ClusterParams, DataError, DataTable, FilterSpec, LayoutMethod, MapperGraph, MapperParams, Normalization,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::error::{decode_value, ServiceError};

pub const DEFAULT_FORCE_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRequest {
    pub column: String,
    pub n: usize,
    pub overlap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutChoice {
    #[default]
    Force,
    #[serde(alias = "filter_aligned")]
    Aligned,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutRequest {
    #[serde(default)]
    pub method: LayoutChoice,
    /// Filter column for the aligned layout; defaults to the first filter.
    #[serde(default)]
    pub aligned_filter: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Force-layout iterations.
    #[serde(default)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapperRequest {
    pub point_columns: Vec<String>,
    pub filters: Vec<FilterRequest>,
    pub cluster: ClusterParams,
    #[serde(default)]
    pub norm: Normalization,
    #[serde(default)]
    pub layout: LayoutRequest,
}

impl MapperRequest {
    pub fn params(&self) -> MapperParams {
        MapperParams {
            point_columns: self.point_columns.clone(),
            filters: self
                .filters
                .iter()
                .map(|f| FilterSpec::new(f.column.clone(), f.n, f.overlap))
                .collect(),
            cluster: self.cluster,
            normalization: self.norm,
        }
    }
}

/// How a stored set of positions was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutInfo {
    pub method: LayoutMethod,
    pub aligned_filter: Option<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaidOutGraph {
    pub graph: MapperGraph,
    /// `None` for an empty graph.
    pub positions: Option<Positions>,
    pub layout: Option<LayoutInfo>,
}

/// Positions for `graph`; an empty graph has none.
pub fn layout_graph(
    graph: &MapperGraph,
    req: &LayoutRequest,
) -> Result<(Option<Positions>, Option<LayoutInfo>), ServiceError> {
    if graph.is_empty() {
        return Ok((None, None));
    }
    let result = match req.method {
        LayoutChoice::Force => force_layout(graph, req.iterations.unwrap_or(DEFAULT_FORCE_ITERATIONS), req.seed)?,
        LayoutChoice::Aligned => {
            let filter = match &req.aligned_filter {
                Some(f) => f.clone(),
                None => graph.params.filters[0].column.clone(),
            };
            filter_aligned_layout(graph, &filter, req.seed)?
        }
    };
    let info = LayoutInfo {
        method: result.method,
        aligned_filter: result.aligned_filter.clone(),
        seed: result.seed,
    };
    Ok((Some(result.positions), Some(info)))
}

pub fn run_mapper(table: &DataTable, req: &MapperRequest) -> Result<LaidOutGraph, ServiceError> {
    let graph = compute_mapper(table, &req.params())?;
    let (positions, layout) = layout_graph(&graph, &req.layout)?;
    Ok(LaidOutGraph {
        graph,
        positions,
        layout,
    })
}

/// Whole-graph document, the graph JSON returned by both front ends.
pub fn graph_document(table: &DataTable, g: &LaidOutGraph) -> Result<SubpopulationDocument, ServiceError> {
    Ok(export_subpopulation(&g.graph, None, table, g.positions.as_ref())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRequest {
    pub mode: SelectionMode,
    #[serde(default)]
    pub seeds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResponse {
    #[serde(flatten)]
    pub selection: Selection,
    pub row_ids: Vec<RowId>,
}

pub fn resolve_selection(
    graph_id: &str,
    graph: &MapperGraph,
    req: &SelectionRequest,
) -> Result<SelectionResponse, ServiceError> {
    let mut selection = select(graph, req.mode, &req.seeds)?;
    selection.graph_id = Some(graph_id.to_string());
    let row_ids = subpopulation_rows(&selection, graph)?;
    Ok(SelectionResponse { selection, row_ids })
}

/// Parses `"col:n:p"`; `p` may be a fraction or a percentage (`25%`).
pub fn parse_filter(spec: &str) -> Result<FilterRequest, String> {
    let mut parts = spec.rsplitn(3, ':');
    let (p, n, column) = match (parts.next(), parts.next(), parts.next()) {
        (Some(p), Some(n), Some(c)) if !c.is_empty() => (p, n, c),
        _ => return Err(format!("expected COLUMN:N:OVERLAP, got `{spec}`")),
    };
    let n = n.parse().map_err(|_| format!("invalid interval count `{n}` in `{spec}`"))?;
    let overlap = match p.strip_suffix('%') {
        Some(pct) => pct.parse::<f64>().map(|v| v / 100.0),
        None => p.parse::<f64>(),
    }
    .map_err(|_| format!("invalid overlap `{p}` in `{spec}`"))?;
    Ok(FilterRequest {
        column: column.to_string(),
        n,
        overlap,
    })
}

/// Parses a comma-separated list of node ids.
pub fn parse_ids(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("invalid node id `{s}`")))
        .collect()
}

/// Which rows an analysis runs on.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RowScope {
    Keyword(AllRows),
    Ids(Vec<RowId>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllRows {
    All,
}

/// Restricts `table` to `scope`, keeping original row ids.
pub fn scoped_table(table: &DataTable, scope: Option<RowScope>) -> Result<DataTable, ServiceError> {
    match scope {
        None | Some(RowScope::Keyword(AllRows::All)) => Ok(table.clone()),
        Some(RowScope::Ids(mut ids)) => {
            ids.sort_unstable();
            ids.dedup();
            if ids.is_empty() {
                return Err(ServiceError::invalid("row selection is empty", Some("rows".into())));
            }
            Ok(table.subset(&ids)?)
        }
    }
}

/// Runs `module` on the rows named by the `rows` member of `body`; every
/// other member is passed to the module as a parameter.
pub fn run_analysis(registry: &Registry, table: &DataTable, module: &str, body: Json) -> Result<Json, ServiceError> {
    let Json::Object(mut params) = body else {
        return Err(ServiceError::invalid("analysis request must be a JSON object", Some(String::new())));
    };
    let scope: Option<RowScope> = match params.remove("rows") {
        None => None,
        Some(v) => Some(decode_value(v).map_err(|e| match e {
            ServiceError::InvalidRequest { .. } => {
                ServiceError::invalid("`rows` must be \"all\" or a list of row ids", Some("rows".into()))
            }
            other => other,
        })?),
    };
    // Resolve the module first so an unknown name is reported as such.
    registry.schema(module)?;
    let table = scoped_table(table, scope)?;
    Ok(registry.run(module, &table, Json::Object(params))?)
}

/// Merges flag-derived parameters over a base object.
pub fn merge_params(base: Option<Json>, flags: Map<String, Json>) -> Result<Json, ServiceError> {
    let mut out = match base {
        None => Map::new(),
        Some(Json::Object(m)) => m,
        Some(_) => return Err(ServiceError::invalid("--params must be a JSON object", None)),
    };
    out.extend(flags);
    Ok(Json::Object(out))
}

pub fn ensure_row_ids(table: &DataTable, rows: &[RowId]) -> Result<(), ServiceError> {
    match rows.iter().find(|&&r| table.position_of(r).is_none()) {
        Some(&r) => Err(DataError::UnknownRowId(r).into()),
        None => Ok(()),
    }
}

/// Checks that `update` only names existing nodes and, for an aligned layout,
/// keeps every node's x coordinate.
pub fn validate_position_update(
    graph: &MapperGraph,
    current: Option<&Positions>,
    layout: Option<&LayoutInfo>,
    update: &BTreeMap<usize, [f64; 2]>,
) -> Result<(), ServiceError> {
    for (&id, p) in update {
        if !graph.contains_node(id) {
            return Err(ServiceError::invalid(format!("unknown node {id}"), Some(id.to_string())));
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(ServiceError::invalid("positions must be finite", Some(id.to_string())));
        }
        if layout.is_some_and(|l| l.method == LayoutMethod::FilterAligned) {
            let old = current.and_then(|c| c.get(&id)).map(|p| p[0]);
            if old.is_some_and(|x| x != p[0]) {
                return Err(ServiceError::invalid(
                    format!("node {id}: x is fixed by the aligned filter and cannot move"),
                    Some(id.to_string()),
                ));
            }
        }
    }
    Ok(())
}
