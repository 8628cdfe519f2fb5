use std::f64::consts::TAU;

use phenomapper_core::data::RowId;
use phenomapper_core::mapper::{nerve, MapperNode, NodeAggregates, Provenance};
use phenomapper_core::{
    ClusterParams, Column, DataTable, FilterSpec, MapperGraph, MapperParams, Matrix, Normalization,
};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::{rng, ChaCha8Rng};

/// Points on circles of radius 1 with Gaussian noise on both coordinates.
/// Angles are uniform; `centers` are spread round-robin over the points.
pub fn noisy_circles(n_per_circle: usize, sigma: f64, centers: &[(f64, f64)], seed: u64) -> DataTable {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &(cx, cy) in centers {
        for _ in 0..n_per_circle {
            let a: f64 = r.random::<f64>() * TAU;
            xs.push(Some(cx + a.cos() + noise.sample(&mut r)));
            ys.push(Some(cy + a.sin() + noise.sample(&mut r)));
        }
    }
    let n = xs.len() as u64;
    DataTable::from_columns(
        "circles",
        vec![Column::numeric("x", xs), Column::numeric("y", ys)],
        (0..n).collect(),
    )
    .expect("well-formed fixture")
}

pub fn noisy_circle(n: usize, sigma: f64, seed: u64) -> DataTable {
    noisy_circles(n, sigma, &[(0.0, 0.0)], seed)
}

/// CSV text of a table, for feeding the HTTP and CLI front ends.
pub fn to_csv(table: &DataTable) -> String {
    table.to_csv().expect("fixture serializes")
}

/// Random numeric table with `cols` columns named `c0..`, a categorical
/// column `grp`, and occasional missing values.
pub fn random_table(r: &mut ChaCha8Rng, rows: usize, cols: usize, missing_rate: f64) -> DataTable {
    let mut columns = Vec::new();
    for c in 0..cols {
        let shift: f64 = r.random_range(-5.0..5.0);
        let scale: f64 = r.random_range(0.1..3.0);
        let values = (0..rows)
            .map(|_| {
                if r.random::<f64>() < missing_rate {
                    None
                } else {
                    let z: f64 = StandardNormal.sample(r);
                    Some(shift + scale * z)
                }
            })
            .collect();
        columns.push(Column::numeric(format!("c{c}"), values));
    }
    let groups = (0..rows)
        .map(|_| Some(["A", "B", "C"][r.random_range(0..3)].to_string()))
        .collect();
    columns.push(Column::categorical("grp", groups));
    DataTable::from_columns("random", columns, (0..rows as u64).map(|i| i * 3 + 7).collect())
        .expect("well-formed fixture")
}

/// Random mapper parameters over the `c*` columns of a [`random_table`].
pub fn random_params(r: &mut ChaCha8Rng, cols: usize) -> MapperParams {
    let n_points = r.random_range(1..=cols.min(3));
    let point_columns = (0..n_points).map(|k| format!("c{k}")).collect();
    let n_filters = r.random_range(1..=2);
    let filters = (0..n_filters)
        .map(|_| {
            FilterSpec::new(
                format!("c{}", r.random_range(0..cols)),
                r.random_range(1..=8),
                [0.0, 0.1, 0.25, 0.3, 0.5, 0.7][r.random_range(0..6)],
            )
        })
        .collect();
    let normalization = [Normalization::None, Normalization::MinMax, Normalization::ZScore][r.random_range(0..3)];
    let epsilon = match normalization {
        Normalization::MinMax => r.random_range(0.05..0.6),
        _ => r.random_range(0.2..2.5),
    };
    MapperParams {
        point_columns,
        filters,
        cluster: ClusterParams {
            epsilon,
            min_pts: r.random_range(1..=5),
        },
        normalization,
    }
}

/// Uniform random points in `[0, scale]^dims`, sometimes duplicated.
pub fn random_points(r: &mut ChaCha8Rng, n: usize, dims: usize, scale: f64) -> Matrix {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        if !rows.is_empty() && r.random::<f64>() < 0.05 {
            let k = r.random_range(0..rows.len());
            rows.push(rows[k].clone());
        } else {
            rows.push((0..dims).map(|_| r.random::<f64>() * scale).collect());
        }
    }
    Matrix::from_rows(&rows)
}

/// Graph whose nodes have the given filter means and arbitrary random memberships.
/// Means are stored under the filter column `f`.
pub fn random_graph(r: &mut ChaCha8Rng, n_nodes: usize, tie_rate: f64) -> MapperGraph {
    let mut means: Vec<f64> = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        if !means.is_empty() && r.random::<f64>() < tie_rate {
            let k = r.random_range(0..means.len());
            means.push(means[k]);
        } else {
            means.push(r.random_range(-50.0..50.0));
        }
    }
    let pool = (n_nodes * 3).max(4) as u64;
    let nodes: Vec<MapperNode> = means
        .iter()
        .enumerate()
        .map(|(id, &m)| {
            let mut rows: Vec<RowId> = (0..r.random_range(1..5)).map(|_| r.random_range(0..pool)).collect();
            rows.sort_unstable();
            rows.dedup();
            let mut aggregates = NodeAggregates::default();
            aggregates.numeric_means.insert("f".into(), Some(m));
            MapperNode {
                id,
                cover_index: vec![id],
                size: rows.len(),
                row_ids: rows,
                aggregates,
            }
        })
        .collect();
    MapperGraph {
        edges: nerve(&nodes),
        nodes,
        params: MapperParams {
            point_columns: vec!["f".into()],
            filters: vec![FilterSpec::new("f", n_nodes.max(1), 0.2)],
            cluster: ClusterParams { epsilon: 1.0, min_pts: 1 },
            normalization: Normalization::MinMax,
        },
        provenance: Provenance::default(),
    }
}

/// Binary classification data: the label is the sign of the sum of the first
/// `informative` features; the remaining features are independent noise.
pub fn informative_classification(
    seed: u64,
    rows: usize,
    informative: usize,
    noise: usize,
) -> (Matrix, Vec<String>, Vec<String>) {
    let mut r = rng(seed);
    let d = informative + noise;
    let mut data = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
        let s: f64 = row[..informative].iter().sum();
        labels.push(if s > 0.0 { "pos" } else { "neg" }.to_string());
        data.push(row);
    }
    let names = (0..d)
        .map(|j| if j < informative { format!("signal{j}") } else { format!("noise{}", j - informative) })
        .collect();
    (Matrix::from_rows(&data), names, labels)
}
