//! Subpopulation selections over a mapper graph.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::RowId;
use crate::mapper::{component_members, shortest_path, MapperError, MapperGraph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectionError {
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("no path between nodes {from} and {to}")]
    NoPath { from: usize, to: usize },
    #[error("mode `{mode}` needs {expected} seed(s), got {found}")]
    WrongSeedCount {
        mode: SelectionMode,
        expected: &'static str,
        found: usize,
    },
    #[error("selection refers to node {0}, which is not in the graph")]
    StaleSelection(usize),
    #[error("unknown selection mode `{0}`")]
    UnknownMode(String),
}

impl From<MapperError> for SelectionError {
    fn from(e: MapperError) -> Self {
        match e {
            MapperError::NoPath { from, to } => SelectionError::NoPath { from, to },
            MapperError::UnknownNode(id) => SelectionError::UnknownNode(id),
            other => unreachable!("graph query returned {other:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Nodes,
    Component,
    Path,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::Nodes => "nodes",
            SelectionMode::Component => "component",
            SelectionMode::Path => "path",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nodes" => Ok(SelectionMode::Nodes),
            "component" => Ok(SelectionMode::Component),
            "path" => Ok(SelectionMode::Path),
            other => Err(SelectionError::UnknownMode(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub graph_id: Option<String>,
    pub mode: SelectionMode,
    pub node_ids: BTreeSet<usize>,
    /// Nodes the user picked: clicked nodes or path endpoints.
    pub seeds: Vec<usize>,
}

impl Selection {
    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }
}

/// Resolves seeds to a node set according to `mode`.
pub fn select(graph: &MapperGraph, mode: SelectionMode, seeds: &[usize]) -> Result<Selection, SelectionError> {
    if let Some(&bad) = seeds.iter().find(|&&s| !graph.contains_node(s)) {
        return Err(SelectionError::UnknownNode(bad));
    }
    let node_ids: BTreeSet<usize> = match mode {
        SelectionMode::Nodes => seeds.iter().copied().collect(),
        SelectionMode::Component => {
            let &[seed, ..] = seeds else {
                return Err(SelectionError::WrongSeedCount {
                    mode,
                    expected: "at least 1",
                    found: 0,
                });
            };
            component_members(graph, seed)?.into_iter().collect()
        }
        SelectionMode::Path => {
            let &[a, b] = seeds else {
                return Err(SelectionError::WrongSeedCount {
                    mode,
                    expected: "exactly 2",
                    found: seeds.len(),
                });
            };
            shortest_path(graph, a, b)?.into_iter().collect()
        }
    };
    Ok(Selection {
        graph_id: None,
        mode,
        node_ids,
        seeds: seeds.to_vec(),
    })
}

/// Sorted, deduplicated union of the rows of the selected nodes.
pub fn subpopulation_rows(selection: &Selection, graph: &MapperGraph) -> Result<Vec<RowId>, SelectionError> {
    let mut rows = BTreeSet::new();
    for &id in &selection.node_ids {
        let node = graph.node(id).ok_or(SelectionError::StaleSelection(id))?;
        rows.extend(node.row_ids.iter().copied());
    }
    Ok(rows.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Normalization;
    use crate::mapper::{nerve, ClusterParams, FilterSpec, MapperNode, MapperParams, NodeAggregates, Provenance};

    fn graph(rows: &[&[RowId]]) -> MapperGraph {
        let nodes: Vec<MapperNode> = rows
            .iter()
            .enumerate()
            .map(|(id, r)| MapperNode {
                id,
                cover_index: vec![id],
                row_ids: r.to_vec(),
                size: r.len(),
                aggregates: NodeAggregates::default(),
            })
            .collect();
        MapperGraph {
            edges: nerve(&nodes),
            nodes,
            params: MapperParams {
                point_columns: vec!["x".into()],
                filters: vec![FilterSpec::new("x", 1, 0.0)],
                cluster: ClusterParams { epsilon: 1.0, min_pts: 1 },
                normalization: Normalization::MinMax,
            },
            provenance: Provenance::default(),
        }
    }

    /// Path 0-1-2-3 plus an isolated node 4.
    fn path_graph() -> MapperGraph {
        graph(&[&[1, 2], &[2, 3], &[3, 4], &[4, 5], &[9]])
    }

    #[test]
    fn nodes_mode_keeps_seeds() {
        let s = select(&path_graph(), SelectionMode::Nodes, &[3]).unwrap();
        assert_eq!(s.node_ids, BTreeSet::from([3]));
    }

    #[test]
    fn component_mode_takes_whole_component() {
        let cycle = graph(&[&[1, 2], &[2, 3], &[3, 4], &[4, 1]]);
        for seed in 0..4 {
            let s = select(&cycle, SelectionMode::Component, &[seed]).unwrap();
            assert_eq!(s.node_ids, BTreeSet::from([0, 1, 2, 3]));
        }
    }

    #[test]
    fn path_mode() {
        let s = select(&path_graph(), SelectionMode::Path, &[0, 3]).unwrap();
        assert_eq!(s.node_ids, BTreeSet::from([0, 1, 2, 3]));
        assert_eq!(s.seeds, vec![0, 3]);
        assert_eq!(
            select(&path_graph(), SelectionMode::Path, &[0, 4]),
            Err(SelectionError::NoPath { from: 0, to: 4 })
        );
        assert!(matches!(
            select(&path_graph(), SelectionMode::Path, &[0]),
            Err(SelectionError::WrongSeedCount { found: 1, .. })
        ));
    }

    #[test]
    fn unknown_seed() {
        assert_eq!(
            select(&path_graph(), SelectionMode::Nodes, &[1, 17]),
            Err(SelectionError::UnknownNode(17))
        );
    }

    #[test]
    fn rows_are_deduplicated_union() {
        let g = graph(&[&[1, 2], &[2, 3]]);
        let s = select(&g, SelectionMode::Nodes, &[0, 1]).unwrap();
        assert_eq!(subpopulation_rows(&s, &g).unwrap(), vec![1, 2, 3]);
        let empty = select(&g, SelectionMode::Nodes, &[]).unwrap();
        assert_eq!(subpopulation_rows(&empty, &g).unwrap(), Vec::<RowId>::new());
    }

    #[test]
    fn stale_selection() {
        let s = select(&path_graph(), SelectionMode::Nodes, &[4]).unwrap();
        let smaller = graph(&[&[1]]);
        assert_eq!(subpopulation_rows(&s, &smaller), Err(SelectionError::StaleSelection(4)));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("path".parse::<SelectionMode>().unwrap(), SelectionMode::Path);
        assert!("ring".parse::<SelectionMode>().is_err());
    }
}
