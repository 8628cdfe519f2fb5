//! Mapper graph construction.
//!
//! A filter (one or two numeric columns) is covered by overlapping intervals
//! or rectangles. The rows falling in each cover element are clustered with
//! DBSCAN in the point-cloud space; every cluster becomes a node, and two
//! nodes are joined when they share at least one row.

mod cover;
mod dbscan;
mod query;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{numeric_matrix, DataError, DataTable, FittedNormalization, MissingPolicy, Normalization, RowId};
use crate::matrix::Matrix;

pub use cover::{build_interval_cover, build_product_cover, Interval, IntervalCover, Rectangle};
pub use dbscan::{dbscan, ClusterParams, Label};
pub use query::{component_members, connected_components, shortest_path};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapperError {
    #[error("overlap must lie in [0, 1), got {0}")]
    InvalidOverlap(f64),
    #[error("number of intervals must be at least 1, got {0}")]
    InvalidCount(usize),
    #[error("invalid filter range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("min_pts must be at least 1, got {0}")]
    InvalidMinPts(usize),
    #[error("mapper takes one or two filters, got {0}")]
    FilterCount(usize),
    #[error("filter column `{0}` not found")]
    FilterColumnMissing(String),
    #[error("no point-cloud columns given")]
    NoPointColumns,
    #[error("row {0} is not present in the table")]
    StaleRowIds(RowId),
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("no path between nodes {from} and {to}")]
    NoPath { from: usize, to: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// One filter function with its cover resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub column: String,
    pub n_intervals: usize,
    pub overlap: f64,
}

impl FilterSpec {
    pub fn new(column: impl Into<String>, n_intervals: usize, overlap: f64) -> Self {
        FilterSpec {
            column: column.into(),
            n_intervals,
            overlap,
        }
    }

    pub fn validate(&self) -> Result<(), MapperError> {
        if self.n_intervals < 1 {
            return Err(MapperError::InvalidCount(self.n_intervals));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(MapperError::InvalidOverlap(self.overlap));
        }
        Ok(())
    }
}

/// Everything needed to recompute a mapper graph from its table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapperParams {
    pub point_columns: Vec<String>,
    pub filters: Vec<FilterSpec>,
    pub cluster: ClusterParams,
    pub normalization: Normalization,
}

impl MapperParams {
    pub fn validate(&self) -> Result<(), MapperError> {
        if !(1..=2).contains(&self.filters.len()) {
            return Err(MapperError::FilterCount(self.filters.len()));
        }
        if self.point_columns.is_empty() {
            return Err(MapperError::NoPointColumns);
        }
        for f in &self.filters {
            f.validate()?;
        }
        self.cluster.validate()
    }

    pub fn filter_columns(&self) -> impl Iterator<Item = &str> {
        self.filters.iter().map(|f| f.column.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    /// Rows excluded because a used column was missing.
    pub dropped_rows: Vec<RowId>,
    /// Kept rows that ended up in no node (DBSCAN noise everywhere).
    pub noise_rows: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeAggregates {
    /// Mean over member rows with a value; `None` when every member is missing.
    pub numeric_means: BTreeMap<String, Option<f64>>,
    pub category_counts: BTreeMap<String, BTreeMap<String, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapperNode {
    pub id: usize,
    /// Interval index for a 1D cover, `[i, j]` for a rectangle.
    pub cover_index: Vec<usize>,
    pub row_ids: Vec<RowId>,
    pub size: usize,
    pub aggregates: NodeAggregates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MapperEdge {
    pub source: usize,
    pub target: usize,
    pub shared_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapperGraph {
    /// Sorted by id.
    pub nodes: Vec<MapperNode>,
    /// Sorted by `(source, target)` with `source < target`.
    pub edges: Vec<MapperEdge>,
    pub params: MapperParams,
    pub provenance: Provenance,
}

impl MapperGraph {
    pub fn node(&self, id: usize) -> Option<&MapperNode> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn contains_node(&self, id: usize) -> bool {
        self.node(id).is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sorted neighbour lists keyed by node id.
    pub fn adjacency(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut adj: BTreeMap<usize, Vec<usize>> = self.nodes.iter().map(|n| (n.id, Vec::new())).collect();
        for e in &self.edges {
            adj.entry(e.source).or_default().push(e.target);
            adj.entry(e.target).or_default().push(e.source);
        }
        for v in adj.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        adj
    }

    pub fn filter_columns(&self) -> impl Iterator<Item = &str> {
        self.params.filter_columns()
    }

    /// Graphviz rendering, nodes labelled `id (size)`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph mapper {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  {} [label=\"{} ({})\"];", n.id, n.id, n.size);
        }
        for e in &self.edges {
            let _ = writeln!(out, "  {} -- {} [weight={}];", e.source, e.target, e.shared_rows);
        }
        out.push_str("}\n");
        out
    }
}

/// Edges of the 1-nerve: one per pair of nodes sharing rows, weighted by the
/// number of shared rows.
pub fn nerve(nodes: &[MapperNode]) -> Vec<MapperEdge> {
    let mut memberships: HashMap<RowId, Vec<usize>> = HashMap::new();
    for n in nodes {
        for &r in &n.row_ids {
            memberships.entry(r).or_default().push(n.id);
        }
    }
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for ids in memberships.values_mut() {
        ids.sort_unstable();
        ids.dedup();
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                *counts.entry((a, b)).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|((source, target), shared_rows)| MapperEdge {
            source,
            target,
            shared_rows,
        })
        .collect()
}

/// Means and category counts of `row_ids` over every column of `table`.
pub fn aggregate_rows(table: &DataTable, row_ids: &[RowId]) -> Result<NodeAggregates, MapperError> {
    let positions = row_ids
        .iter()
        .map(|&r| table.position_of(r).ok_or(MapperError::StaleRowIds(r)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut agg = NodeAggregates::default();
    for col in table.columns() {
        if let Some(values) = col.as_numeric() {
            let (sum, count) = positions
                .iter()
                .filter_map(|&p| values[p])
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            let mean = (count > 0).then(|| sum / count as f64);
            agg.numeric_means.insert(col.name().to_string(), mean);
        } else if let Some(labels) = col.as_categorical() {
            let mut counts = BTreeMap::new();
            for label in positions.iter().filter_map(|&p| labels[p].as_ref()) {
                *counts.entry(label.clone()).or_insert(0) += 1;
            }
            agg.category_counts.insert(col.name().to_string(), counts);
        }
    }
    Ok(agg)
}

/// Per-node aggregates of `graph` recomputed against `table`.
pub fn node_statistics(graph: &MapperGraph, table: &DataTable) -> Result<Vec<NodeAggregates>, MapperError> {
    graph.nodes.iter().map(|n| aggregate_rows(table, &n.row_ids)).collect()
}

/// A cover element together with the positions (into the kept rows) it holds.
struct Element {
    cover_index: Vec<usize>,
    members: Vec<usize>,
}

fn cover_elements(filter_values: &[Vec<f64>], covers: &[IntervalCover]) -> Vec<Element> {
    let mut elements: Vec<Element> = match covers {
        [c] => (0..c.len())
            .map(|i| Element {
                cover_index: vec![i],
                members: Vec::new(),
            })
            .collect(),
        [c1, c2] => build_product_cover(c1, c2)
            .into_iter()
            .map(|r| Element {
                cover_index: vec![r.index.0, r.index.1],
                members: Vec::new(),
            })
            .collect(),
        _ => unreachable!("filter count validated"),
    };
    let n_rows = filter_values[0].len();
    for row in 0..n_rows {
        match covers {
            [c] => {
                for i in c.containing(filter_values[0][row]) {
                    elements[i].members.push(row);
                }
            }
            [c1, c2] => {
                let js: Vec<usize> = c2.containing(filter_values[1][row]).collect();
                for i in c1.containing(filter_values[0][row]) {
                    for &j in &js {
                        elements[i * c2.len() + j].members.push(row);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    elements
}

/// Builds the mapper graph of `table` for the given parameters.
///
/// Rows missing any point or filter value are dropped and listed in the
/// provenance. The point cloud is normalized over the kept rows; filters are
/// covered on their raw observed range. Cover elements are clustered in
/// parallel, but node ids follow `(cover_index, cluster id)` order so the
/// result does not depend on scheduling.
pub fn compute_mapper(table: &DataTable, params: &MapperParams) -> Result<MapperGraph, MapperError> {
    params.validate()?;
    for f in &params.filters {
        if table.column(&f.column).is_err() {
            return Err(MapperError::FilterColumnMissing(f.column.clone()));
        }
    }

    let mut used: Vec<&str> = params.point_columns.iter().map(String::as_str).collect();
    for f in params.filter_columns() {
        if !used.contains(&f) {
            used.push(f);
        }
    }
    let raw = numeric_matrix(table, &used, Normalization::None, MissingPolicy::DropRows)?;
    let col_index = |name: &str| used.iter().position(|u| *u == name).expect("column is in use list");

    let point_idx: Vec<usize> = params.point_columns.iter().map(|c| col_index(c)).collect();
    let mut points = Matrix::zeros(raw.matrix.nrows(), point_idx.len());
    for r in 0..raw.matrix.nrows() {
        for (k, &c) in point_idx.iter().enumerate() {
            points.set(r, k, raw.matrix.get(r, c));
        }
    }
    FittedNormalization::fit(params.normalization, &points).transform(&mut points);

    let filter_values: Vec<Vec<f64>> = params
        .filters
        .iter()
        .map(|f| raw.matrix.column(col_index(&f.column)))
        .collect();
    let covers = params
        .filters
        .iter()
        .zip(&filter_values)
        .map(|(f, vals)| {
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            build_interval_cover(lo, hi, f.n_intervals, f.overlap)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let elements = cover_elements(&filter_values, &covers);
    let labels: Vec<Vec<Label>> = elements
        .par_iter()
        .map(|e| dbscan(&points.select_rows(&e.members), &params.cluster))
        .collect();

    let mut nodes = Vec::new();
    for (element, labels) in elements.iter().zip(&labels) {
        let n_clusters = labels.iter().filter_map(|l| l.cluster()).max().map_or(0, |m| m + 1);
        let mut clusters: Vec<Vec<RowId>> = vec![Vec::new(); n_clusters];
        for (&member, label) in element.members.iter().zip(labels) {
            if let Label::Cluster(c) = label {
                clusters[*c].push(raw.row_ids[member]);
            }
        }
        for mut row_ids in clusters {
            row_ids.sort_unstable();
            let aggregates = aggregate_rows(table, &row_ids)?;
            nodes.push(MapperNode {
                id: nodes.len(),
                cover_index: element.cover_index.clone(),
                size: row_ids.len(),
                row_ids,
                aggregates,
            });
        }
    }

    let mut covered = vec![false; raw.row_ids.len()];
    for (element, labels) in elements.iter().zip(&labels) {
        for (&member, label) in element.members.iter().zip(labels) {
            if label.cluster().is_some() {
                covered[member] = true;
            }
        }
    }
    let noise_rows = covered.iter().filter(|c| !**c).count();

    let mut warnings = Vec::new();
    if nodes.is_empty() {
        warnings.push("empty graph: every cover element produced only noise".to_string());
    }
    let edges = nerve(&nodes);
    Ok(MapperGraph {
        nodes,
        edges,
        params: params.clone(),
        provenance: Provenance {
            dataset: table.name().to_string(),
            dropped_rows: raw.dropped_row_ids,
            noise_rows,
            warnings,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_csv, Column, LoadOptions};

    fn params(points: &[&str], filters: Vec<FilterSpec>, eps: f64, min_pts: usize) -> MapperParams {
        MapperParams {
            point_columns: points.iter().map(|s| s.to_string()).collect(),
            filters,
            cluster: ClusterParams { epsilon: eps, min_pts },
            normalization: Normalization::MinMax,
        }
    }

    fn table(cols: &[(&str, Vec<f64>)]) -> DataTable {
        let n = cols[0].1.len();
        DataTable::from_columns(
            "t",
            cols.iter()
                .map(|(name, v)| Column::numeric(*name, v.iter().copied().map(Some).collect()))
                .collect(),
            (0..n as u64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_row_single_node() {
        let t = table(&[("x", vec![1.0])]);
        let g = compute_mapper(&t, &params(&["x"], vec![FilterSpec::new("x", 1, 0.0)], 0.5, 1)).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
        assert_eq!(g.nodes[0].row_ids, vec![0]);
    }

    #[test]
    fn disjoint_intervals_give_no_edges() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let t = table(&[("x", xs)]);
        let g = compute_mapper(
            &t,
            &params(&["x"], vec![FilterSpec::new("x", 5, 0.0)], f64::INFINITY, 1),
        )
        .unwrap();
        assert_eq!(g.nodes.len(), 5);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn overlapping_intervals_connect_a_line() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let t = table(&[("x", xs)]);
        let g = compute_mapper(&t, &params(&["x"], vec![FilterSpec::new("x", 4, 0.3)], 0.05, 2)).unwrap();
        assert_eq!(g.nodes.len(), 4);
        let pairs: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.source, e.target)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(g, compute_mapper(&t, &g.params).unwrap());
    }

    #[test]
    fn all_noise_is_an_empty_graph_with_warning() {
        let t = table(&[("x", vec![0.0, 10.0, 20.0])]);
        let g = compute_mapper(&t, &params(&["x"], vec![FilterSpec::new("x", 1, 0.0)], 0.01, 2)).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.provenance.noise_rows, 3);
        assert_eq!(g.provenance.warnings.len(), 1);
    }

    #[test]
    fn missing_rows_are_dropped_and_reported() {
        let t = load_csv("t", "x,y\n1,1\n2,\n3,3\n".as_bytes(), &LoadOptions::default()).unwrap();
        let g = compute_mapper(&t, &params(&["y"], vec![FilterSpec::new("x", 1, 0.0)], 10.0, 1)).unwrap();
        assert_eq!(g.provenance.dropped_rows, vec![1]);
        assert_eq!(g.nodes[0].row_ids, vec![0, 2]);
    }

    #[test]
    fn errors() {
        let t = table(&[("x", vec![1.0, 2.0])]);
        assert_eq!(
            compute_mapper(&t, &params(&["x"], vec![FilterSpec::new("nope", 1, 0.0)], 1.0, 1)),
            Err(MapperError::FilterColumnMissing("nope".into()))
        );
        assert_eq!(
            compute_mapper(&t, &params(&["x"], vec![], 1.0, 1)),
            Err(MapperError::FilterCount(0))
        );
        assert_eq!(
            compute_mapper(&t, &params(&["x"], vec![FilterSpec::new("x", 2, 1.0)], 1.0, 1)),
            Err(MapperError::InvalidOverlap(1.0))
        );
    }

    #[test]
    fn node_statistics_means_and_counts() {
        let t = load_csv(
            "t",
            "f,growth,g\n0,1.0,A\n0,3.0,A\n0,2.0,B\n".as_bytes(),
            &LoadOptions::default(),
        )
        .unwrap();
        let g = compute_mapper(&t, &params(&["growth"], vec![FilterSpec::new("f", 1, 0.0)], 10.0, 1)).unwrap();
        let stats = node_statistics(&g, &t).unwrap();
        assert_eq!(stats[0].numeric_means["growth"], Some(2.0));
        assert_eq!(stats[0].category_counts["g"]["A"], 2);
        assert_eq!(stats[0].category_counts["g"]["B"], 1);
        assert_eq!(stats[0], g.nodes[0].aggregates);

        let sub = t.subset(&[0]).unwrap();
        assert_eq!(node_statistics(&g, &sub), Err(MapperError::StaleRowIds(1)));
    }

    #[test]
    fn two_dimensional_cover_indices() {
        let xs: Vec<f64> = (0..50).map(|i| (i % 10) as f64).collect();
        let ys: Vec<f64> = (0..50).map(|i| (i / 10) as f64).collect();
        let t = table(&[("x", xs), ("y", ys)]);
        let g = compute_mapper(
            &t,
            &params(
                &["x", "y"],
                vec![FilterSpec::new("x", 3, 0.2), FilterSpec::new("y", 2, 0.2)],
                f64::INFINITY,
                1,
            ),
        )
        .unwrap();
        assert_eq!(g.nodes.len(), 6);
        let idx: Vec<Vec<usize>> = g.nodes.iter().map(|n| n.cover_index.clone()).collect();
        assert_eq!(idx, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1], vec![2, 0], vec![2, 1]]);
    }

    #[test]
    fn dot_output() {
        let t = table(&[("x", vec![0.0, 1.0])]);
        let g = compute_mapper(&t, &params(&["x"], vec![FilterSpec::new("x", 1, 0.0)], 10.0, 1)).unwrap();
        assert_eq!(g.to_dot(), "graph mapper {\n  0 [label=\"0 (2)\"];\n}\n");
    }
}
