//! Node placement for mapper graphs, in the unit square.
//!
//! Two layouts are provided: a Fruchterman–Reingold force layout and a
//! filter-aligned layout whose x coordinate is the node's mean filter value.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapper::MapperGraph;

/// Minimum vertical gap the aligned layout guarantees between nodes sharing x.
pub const NODE_RADIUS: f64 = 0.01;

const ALIGNED_ITERATIONS: usize = 300;
const INITIAL_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("cannot lay out an empty graph")]
    EmptyGraph,
    #[error("`{0}` is not a filter column of this graph")]
    NotAFilterColumn(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutMethod {
    Force,
    FilterAligned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    pub positions: BTreeMap<usize, [f64; 2]>,
    pub method: LayoutMethod,
    pub aligned_filter: Option<String>,
    pub seed: u64,
}

struct Frame {
    ids: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl Frame {
    fn new(graph: &MapperGraph) -> Self {
        let ids: Vec<usize> = graph.nodes.iter().map(|n| n.id).collect();
        let index: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let edges = graph
            .edges
            .iter()
            .filter_map(|e| Some((*index.get(&e.source)?, *index.get(&e.target)?)))
            .collect();
        Frame { ids, edges }
    }
}

/// Coincident nodes get a small deterministic push so forces stay defined.
fn separation(a: [f64; 2], b: [f64; 2], i: usize, j: usize) -> ([f64; 2], f64) {
    let d = [a[0] - b[0], a[1] - b[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if len > 1e-9 {
        (d, len)
    } else {
        let angle = (i * 7919 + j * 104_729) as f64;
        ([1e-9 * angle.cos(), 1e-9 * angle.sin()], 1e-9)
    }
}

/// One cooling run. `move_x` disables horizontal motion for the aligned layout.
/// Returns the largest displacement applied in the final iteration.
fn relax(frame: &Frame, pos: &mut [[f64; 2]], iterations: usize, move_x: bool) -> f64 {
    let n = pos.len();
    let k = (1.0 / n as f64).sqrt();
    let mut last_step = 0.0;
    for it in 0..iterations {
        let temperature = INITIAL_TEMPERATURE * (1.0 - (it + 1) as f64 / iterations as f64);
        let mut disp = vec![[0.0f64; 2]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (d, len) = separation(pos[i], pos[j], i, j);
                let f = k * k / len;
                for c in 0..2 {
                    disp[i][c] += d[c] / len * f;
                    disp[j][c] -= d[c] / len * f;
                }
            }
        }
        for &(i, j) in &frame.edges {
            let (d, len) = separation(pos[i], pos[j], i, j);
            let f = len * len / k;
            for c in 0..2 {
                disp[i][c] -= d[c] / len * f;
                disp[j][c] += d[c] / len * f;
            }
        }
        last_step = 0.0;
        for (p, d) in pos.iter_mut().zip(&mut disp) {
            if !move_x {
                d[0] = 0.0;
            }
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len == 0.0 {
                continue;
            }
            let step = len.min(temperature);
            let before = *p;
            for c in 0..2 {
                p[c] = (p[c] + d[c] / len * step).clamp(0.0, 1.0);
            }
            let moved = ((p[0] - before[0]).powi(2) + (p[1] - before[1]).powi(2)).sqrt();
            last_step = f64::max(last_step, moved);
        }
    }
    last_step
}

fn force_positions(graph: &MapperGraph, iterations: usize, seed: u64) -> Result<(Vec<[f64; 2]>, Frame, f64), LayoutError> {
    if graph.is_empty() {
        return Err(LayoutError::EmptyGraph);
    }
    let frame = Frame::new(graph);
    if frame.ids.len() == 1 {
        return Ok((vec![[0.5, 0.5]], frame, 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<[f64; 2]> = (0..frame.ids.len()).map(|_| [rng.random(), rng.random()]).collect();
    let last = relax(&frame, &mut pos, iterations.max(1), true);
    Ok((pos, frame, last))
}

/// Fruchterman–Reingold layout: repulsion `k²/d` between all pairs,
/// attraction `d²/k` along edges, `k = sqrt(1/|V|)`, temperature cooled
/// linearly to zero. Deterministic for a given seed.
pub fn force_layout(graph: &MapperGraph, iterations: usize, seed: u64) -> Result<LayoutResult, LayoutError> {
    let (pos, frame, _) = force_positions(graph, iterations, seed)?;
    Ok(LayoutResult {
        positions: frame.ids.into_iter().zip(pos).collect(),
        method: LayoutMethod::Force,
        aligned_filter: None,
        seed,
    })
}

/// Layout with x fixed to the min-max normalized mean of `filter` over each
/// node's rows (0.5 when all means coincide). The y coordinate comes from a
/// force relaxation restricted to the vertical axis.
pub fn filter_aligned_layout(graph: &MapperGraph, filter: &str, seed: u64) -> Result<LayoutResult, LayoutError> {
    if !graph.filter_columns().any(|f| f == filter) {
        return Err(LayoutError::NotAFilterColumn(filter.to_string()));
    }
    if graph.is_empty() {
        return Err(LayoutError::EmptyGraph);
    }
    let frame = Frame::new(graph);
    let means: Vec<f64> = graph
        .nodes
        .iter()
        .map(|n| n.aggregates.numeric_means.get(filter).copied().flatten().unwrap_or(f64::NAN))
        .collect();
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xs: Vec<f64> = means
        .iter()
        .map(|&m| if hi > lo { (m - lo) / (hi - lo) } else { 0.5 })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<[f64; 2]> = xs.iter().map(|&x| [x, rng.random()]).collect();
    if pos.len() > 1 {
        relax(&frame, &mut pos, ALIGNED_ITERATIONS, false);
        spread_ties(&mut pos);
    }
    Ok(LayoutResult {
        positions: frame.ids.into_iter().zip(pos).collect(),
        method: LayoutMethod::FilterAligned,
        aligned_filter: Some(filter.to_string()),
        seed,
    })
}

/// Pushes apart nodes that share an x value until they are `NODE_RADIUS` apart.
fn spread_ties(pos: &mut [[f64; 2]]) {
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, p) in pos.iter().enumerate() {
        groups.entry(p[0].to_bits()).or_default().push(i);
    }
    for members in groups.values_mut().filter(|m| m.len() > 1) {
        members.sort_by(|&a, &b| pos[a][1].total_cmp(&pos[b][1]).then(a.cmp(&b)));
        for w in 1..members.len() {
            let (prev, cur) = (members[w - 1], members[w]);
            if pos[cur][1] - pos[prev][1] < NODE_RADIUS {
                pos[cur][1] = pos[prev][1] + NODE_RADIUS;
            }
        }
        // Shift the group back inside the unit interval if it overflowed.
        let top = pos[*members.last().unwrap()][1];
        if top > 1.0 {
            let shift = top - 1.0;
            for &m in members.iter() {
                pos[m][1] -= shift;
            }
        }
    }
}
