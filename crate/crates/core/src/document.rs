//! Self-contained JSON documents holding a mapper graph (or a selected part
//! of it) together with the full records of its rows.
//!
//! Documents are written with sorted keys and sorted ids, so exporting an
//! imported document reproduces the original bytes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Column, ColumnInfo, ColumnKind, DataError, DataTable, RowId, Value};
use crate::layout::LayoutResult;
use crate::mapper::{nerve, MapperEdge, MapperGraph, MapperNode, MapperParams, Provenance};
use crate::selection::{Selection, SelectionError};

pub const FORMAT_VERSION: u64 = 1;

pub type Positions = BTreeMap<usize, [f64; 2]>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DocumentError {
    #[error("invalid document at `{path}`: {message}")]
    SchemaError { path: String, message: String },
    #[error("unsupported document version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("node {node} references row {row_id}, which has no record")]
    MissingRow { node: usize, row_id: RowId },
    #[error("edge {from}-{to} references a node that is not listed")]
    UnknownEndpoint { from: usize, to: usize },
    #[error("stored edges differ from the row-set intersections of the stored nodes")]
    EdgeMismatch,
    #[error("node {0} is listed twice")]
    DuplicateNode(usize),
    #[error("node {node} has size {size} but {rows} row ids")]
    NodeSize { node: usize, size: usize, rows: usize },
    #[error("position given for unknown node {0}")]
    UnknownPositionNode(usize),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl DocumentError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        DocumentError::SchemaError {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// One row of the source table, keyed by its original id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowRecord {
    pub row_id: RowId,
    /// Cells in column order; `null` marks a missing value.
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubpopulationDocument {
    pub version: u64,
    pub dataset: String,
    pub columns: Vec<ColumnInfo>,
    pub rows: Vec<RowRecord>,
    pub nodes: Vec<MapperNode>,
    pub edges: Vec<MapperEdge>,
    pub params: MapperParams,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Positions>,
}

/// Table and graph reconstructed from a document.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportedSubpopulation {
    pub table: DataTable,
    pub graph: MapperGraph,
    pub positions: Option<Positions>,
}

/// Builds a document for the whole graph (`selection = None`) or for the
/// subgraph induced by a selection.
///
/// A whole-graph export carries every row of `table`; a selection export
/// carries only the rows of the selected nodes.
pub fn export_subpopulation(
    graph: &MapperGraph,
    selection: Option<&Selection>,
    table: &DataTable,
    positions: Option<&Positions>,
) -> Result<SubpopulationDocument, DocumentError> {
    let (nodes, row_ids): (Vec<MapperNode>, Vec<RowId>) = match selection {
        None => {
            let mut rows = table.row_ids().to_vec();
            rows.sort_unstable();
            (graph.nodes.clone(), rows)
        }
        Some(sel) => {
            let rows = crate::selection::subpopulation_rows(sel, graph)?;
            let nodes = graph.nodes.iter().filter(|n| sel.node_ids.contains(&n.id)).cloned().collect();
            (nodes, rows)
        }
    };
    let kept: BTreeSet<usize> = nodes.iter().map(|n| n.id).collect();
    let edges = graph
        .edges
        .iter()
        .filter(|e| kept.contains(&e.source) && kept.contains(&e.target))
        .copied()
        .collect();
    let rows = row_ids
        .iter()
        .map(|&id| {
            let pos = table.position_of(id).ok_or(DataError::UnknownRowId(id))?;
            Ok(RowRecord {
                row_id: id,
                values: table.row_values(pos),
            })
        })
        .collect::<Result<Vec<_>, DocumentError>>()?;
    let positions = positions.map(|p| p.iter().filter(|(id, _)| kept.contains(id)).map(|(&k, &v)| (k, v)).collect());
    Ok(SubpopulationDocument {
        version: FORMAT_VERSION,
        dataset: table.name().to_string(),
        columns: table.schema(),
        rows,
        nodes,
        edges,
        params: graph.params.clone(),
        provenance: graph.provenance.clone(),
        positions,
    })
}

/// Convenience wrapper taking positions from a layout.
pub fn export_with_layout(
    graph: &MapperGraph,
    selection: Option<&Selection>,
    table: &DataTable,
    layout: Option<&LayoutResult>,
) -> Result<SubpopulationDocument, DocumentError> {
    export_subpopulation(graph, selection, table, layout.map(|l| &l.positions))
}

impl SubpopulationDocument {
    /// Pretty-printed JSON with keys in lexicographic order.
    pub fn to_json(&self) -> Vec<u8> {
        // Going through `Value` sorts object keys.
        let value = serde_json::to_value(self).expect("document is always serializable");
        let mut out = serde_json::to_vec_pretty(&value).expect("value is always serializable");
        out.push(b'\n');
        out
    }

    /// Parses and validates a document.
    pub fn from_json(bytes: &[u8]) -> Result<Self, DocumentError> {
        let value: serde_json::Value = serde_json::from_slice(bytes)
            .map_err(|e| DocumentError::schema("", format!("malformed JSON: {e}")))?;
        let version = value
            .get("version")
            .ok_or_else(|| DocumentError::schema("version", "missing field"))?;
        let version = version
            .as_u64()
            .ok_or_else(|| DocumentError::schema("version", "expected a non-negative integer"))?;
        if version != FORMAT_VERSION {
            return Err(DocumentError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let doc: SubpopulationDocument = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            DocumentError::schema(path, e.into_inner().to_string())
        })?;
        doc.validate()?;
        Ok(doc)
    }

    fn validate(&self) -> Result<(), DocumentError> {
        check_records(&self.columns, &self.rows)?;
        let row_set: BTreeSet<RowId> = self.rows.iter().map(|r| r.row_id).collect();
        let mut node_set = BTreeSet::new();
        for node in &self.nodes {
            if !node_set.insert(node.id) {
                return Err(DocumentError::DuplicateNode(node.id));
            }
            if node.size != node.row_ids.len() {
                return Err(DocumentError::NodeSize {
                    node: node.id,
                    size: node.size,
                    rows: node.row_ids.len(),
                });
            }
            if let Some(&r) = node.row_ids.iter().find(|r| !row_set.contains(r)) {
                return Err(DocumentError::MissingRow { node: node.id, row_id: r });
            }
        }
        for e in &self.edges {
            if !node_set.contains(&e.source) || !node_set.contains(&e.target) {
                return Err(DocumentError::UnknownEndpoint {
                    from: e.source,
                    to: e.target,
                });
            }
        }
        let mut stored = self.edges.clone();
        stored.sort_unstable();
        if stored != nerve(&self.nodes) {
            return Err(DocumentError::EdgeMismatch);
        }
        if let Some(positions) = &self.positions {
            if let Some(&id) = positions.keys().find(|id| !node_set.contains(id)) {
                return Err(DocumentError::UnknownPositionNode(id));
            }
        }
        Ok(())
    }

    /// Rebuilds the table (rows ordered by id, original ids kept) and graph.
    pub fn into_parts(self) -> Result<ImportedSubpopulation, DocumentError> {
        let table = table_from_records(self.dataset, &self.columns, self.rows)?;
        let mut nodes = self.nodes;
        nodes.sort_by_key(|n| n.id);
        let mut edges = self.edges;
        edges.sort_unstable();
        Ok(ImportedSubpopulation {
            table,
            graph: MapperGraph {
                nodes,
                edges,
                params: self.params,
                provenance: self.provenance,
            },
            positions: self.positions,
        })
    }
}

/// Every row of `table` as a record, ordered by row id.
pub fn table_records(table: &DataTable) -> Vec<RowRecord> {
    let mut rows: Vec<RowRecord> = (0..table.n_rows())
        .map(|pos| RowRecord {
            row_id: table.row_ids()[pos],
            values: table.row_values(pos),
        })
        .collect();
    rows.sort_by_key(|r| r.row_id);
    rows
}

/// Builds a table from row records, ordering rows by id. Cells whose kind
/// does not match their column are rejected with their JSON path.
pub fn table_from_records(
    name: impl Into<String>,
    columns: &[ColumnInfo],
    mut rows: Vec<RowRecord>,
) -> Result<DataTable, DocumentError> {
    check_records(columns, &rows)?;
    rows.sort_by_key(|r| r.row_id);
    let row_ids: Vec<RowId> = rows.iter().map(|r| r.row_id).collect();
    let columns = columns
        .iter()
        .enumerate()
        .map(|(c, info)| match info.kind {
            ColumnKind::Numeric => Column::numeric(
                info.name.clone(),
                rows.iter()
                    .map(|r| match &r.values[c] {
                        Value::Number(v) => Some(*v),
                        _ => None,
                    })
                    .collect(),
            ),
            ColumnKind::Categorical => Column::categorical(
                info.name.clone(),
                rows.iter()
                    .map(|r| match &r.values[c] {
                        Value::Label(s) => Some(s.clone()),
                        _ => None,
                    })
                    .collect(),
            ),
        })
        .collect();
    Ok(DataTable::from_columns(name, columns, row_ids)?)
}

fn check_records(columns: &[ColumnInfo], rows: &[RowRecord]) -> Result<(), DocumentError> {
    let width = columns.len();
    for (i, row) in rows.iter().enumerate() {
        if row.values.len() != width {
            return Err(DocumentError::schema(
                format!("rows[{i}].values"),
                format!("expected {width} values, found {}", row.values.len()),
            ));
        }
        for (c, (v, info)) in row.values.iter().zip(columns).enumerate() {
            let ok = matches!(
                (v, info.kind),
                (Value::Missing, _) | (Value::Number(_), ColumnKind::Numeric) | (Value::Label(_), ColumnKind::Categorical)
            );
            if !ok {
                return Err(DocumentError::schema(
                    format!("rows[{i}].values[{c}]"),
                    format!("value does not match {:?} column `{}`", info.kind, info.name),
                ));
            }
        }
    }
    Ok(())
}

/// Parses, validates and reconstructs a document.
pub fn import_subpopulation(bytes: &[u8]) -> Result<ImportedSubpopulation, DocumentError> {
    SubpopulationDocument::from_json(bytes)?.into_parts()
}
