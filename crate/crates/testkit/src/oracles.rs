use std::collections::{BTreeMap, BTreeSet, VecDeque};

use phenomapper_core::data::RowId;
use phenomapper_core::mapper::{Label, MapperEdge};
use phenomapper_core::{MapperGraph, Matrix};

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn within(points: &Matrix, i: usize, j: usize, eps: f64) -> bool {
    let d2: f64 = points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
    d2 <= eps * eps
}

/// Textbook DBSCAN: core points, union-find over core pairs, border points
/// attached to the adjacent cluster with the smallest core index.
/// Returns `None` for noise.
pub fn naive_dbscan(points: &Matrix, eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.nrows();
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| within(points, i, j, eps)).count() >= min_pts)
        .collect();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if core[i] && core[j] && within(points, i, j, eps) {
                uf.union(i, j);
            }
        }
    }
    // Union-find roots are the smallest member index, so ranking roots gives
    // clusters ordered by their first core point.
    let roots: BTreeSet<usize> = (0..n).filter(|&i| core[i]).map(|i| uf.find(i)).collect();
    let rank: BTreeMap<usize, usize> = roots.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    (0..n)
        .map(|i| {
            if core[i] {
                Some(rank[&uf.find(i)])
            } else {
                (0..n)
                    .filter(|&j| core[j] && within(points, i, j, eps))
                    .map(|j| rank[&uf.find(j)])
                    .min()
            }
        })
        .collect()
}

/// Relabels clusters by first appearance so partitions can be compared up to
/// a permutation of labels.
pub fn canonical_partition(labels: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            l.map(|c| {
                let next = map.len();
                *map.entry(c).or_insert(next)
            })
        })
        .collect()
}

pub fn labels_as_options(labels: &[Label]) -> Vec<Option<usize>> {
    labels.iter().map(|l| l.cluster()).collect()
}

/// Edge weights from explicit pairwise intersection of node row sets.
pub fn brute_force_nerve(nodes: &[(usize, Vec<RowId>)]) -> BTreeMap<(usize, usize), usize> {
    let sets: Vec<(usize, BTreeSet<RowId>)> =
        nodes.iter().map(|(id, rows)| (*id, rows.iter().copied().collect())).collect();
    let mut out = BTreeMap::new();
    for (a, (ia, sa)) in sets.iter().enumerate() {
        for (ib, sb) in &sets[a + 1..] {
            let shared = sa.intersection(sb).count();
            if shared > 0 {
                out.insert(((*ia).min(*ib), (*ia).max(*ib)), shared);
            }
        }
    }
    out
}

pub fn graph_node_rows(graph: &MapperGraph) -> Vec<(usize, Vec<RowId>)> {
    graph.nodes.iter().map(|n| (n.id, n.row_ids.clone())).collect()
}

pub fn edge_map(edges: &[MapperEdge]) -> BTreeMap<(usize, usize), usize> {
    edges.iter().map(|e| ((e.source, e.target), e.shared_rows)).collect()
}

/// Node sets of the connected components, via union-find on the edge list.
pub fn components(graph: &MapperGraph) -> Vec<BTreeSet<usize>> {
    let ids: Vec<usize> = graph.nodes.iter().map(|n| n.id).collect();
    let index: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut uf = UnionFind::new(ids.len());
    for e in &graph.edges {
        uf.union(index[&e.source], index[&e.target]);
    }
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (k, &id) in ids.iter().enumerate() {
        groups.entry(uf.find(k)).or_default().insert(id);
    }
    groups.into_values().collect()
}

/// Degree of every node, counting each edge once per endpoint.
pub fn degrees(graph: &MapperGraph) -> BTreeMap<usize, usize> {
    let mut deg: BTreeMap<usize, usize> = graph.nodes.iter().map(|n| (n.id, 0)).collect();
    for e in &graph.edges {
        *deg.get_mut(&e.source).unwrap() += 1;
        *deg.get_mut(&e.target).unwrap() += 1;
    }
    deg
}

/// A component is a simple cycle when it has as many edges as nodes and
/// every node has degree two.
pub fn is_cycle(graph: &MapperGraph, component: &BTreeSet<usize>) -> bool {
    let deg = degrees(graph);
    let edges = graph
        .edges
        .iter()
        .filter(|e| component.contains(&e.source) && component.contains(&e.target))
        .count();
    component.len() >= 3 && edges == component.len() && component.iter().all(|id| deg[id] == 2)
}

/// Hop distances from `start` over the graph's edges.
pub fn bfs_distances(graph: &MapperGraph, start: usize) -> BTreeMap<usize, usize> {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in &graph.edges {
        adj.entry(e.source).or_default().push(e.target);
        adj.entry(e.target).or_default().push(e.source);
    }
    let mut dist = BTreeMap::from([(start, 0)]);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if !dist.contains_key(&v) {
                dist.insert(v, dist[&u] + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub struct NormalEquationsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r_squared: f64,
}

/// `β = (XᵀX)⁻¹ Xᵀy` with an optional leading intercept column.
pub fn normal_equations_ols(x: &[Vec<f64>], y: &[f64], intercept: bool) -> NormalEquationsFit {
    let design: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            let mut r = Vec::with_capacity(row.len() + 1);
            if intercept {
                r.push(1.0);
            }
            r.extend_from_slice(row);
            r
        })
        .collect();
    let (n, p) = (design.len(), design[0].len());
    let xtx: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| design.iter().map(|r| r[i] * r[j]).sum()).collect())
        .collect();
    let xty: Vec<f64> = (0..p).map(|i| design.iter().zip(y).map(|(r, v)| r[i] * v).sum()).collect();
    let inv = invert(&xtx).expect("well-conditioned design");
    let beta: Vec<f64> = (0..p).map(|i| (0..p).map(|j| inv[i][j] * xty[j]).sum()).collect();
    let rss: f64 = design
        .iter()
        .zip(y)
        .map(|(r, v)| {
            let f: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (v - f) * (v - f)
        })
        .sum();
    let sigma2 = rss / (n - p) as f64;
    let mean = if intercept { y.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    NormalEquationsFit {
        std_errors: (0..p).map(|i| (sigma2 * inv[i][i]).sqrt()).collect(),
        coefficients: beta,
        r_squared: 1.0 - rss / tss,
    }
}

/// Leading principal axes by power iteration with deflation on the sample
/// covariance.
pub fn power_iteration_pca(x: &Matrix, k: usize) -> Vec<(f64, Vec<f64>)> {
    let (n, d) = (x.nrows(), x.ncols());
    let mean: Vec<f64> = (0..d).map(|c| (0..n).map(|r| x.get(r, c)).sum::<f64>() / n as f64).collect();
    let mut cov: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (0..n).map(|r| (x.get(r, i) - mean[i]) * (x.get(r, j) - mean[j])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for comp in 0..k {
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i * 7 + comp * 3) as f64 * 0.01).collect();
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| cov[i][j] * v[j]).sum()).collect();
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            let next: Vec<f64> = w.iter().map(|a| a / norm).collect();
            let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = next;
            lambda = norm;
            if delta < 1e-15 {
                break;
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov[i][j] -= lambda * v[i] * v[j];
            }
        }
        out.push((lambda, v));
    }
    out
}

/// Central finite-difference gradient of `f` at `y`.
pub fn finite_difference_gradient(f: impl Fn(&Matrix) -> f64, y: &Matrix, h: f64) -> Matrix {
    let mut grad = Matrix::zeros(y.nrows(), y.ncols());
    for r in 0..y.nrows() {
        for c in 0..y.ncols() {
            let mut plus = y.clone();
            plus.set(r, c, y.get(r, c) + h);
            let mut minus = y.clone();
            minus.set(r, c, y.get(r, c) - h);
            grad.set(r, c, (f(&plus) - f(&minus)) / (2.0 * h));
        }
    }
    grad
}

/// `exp(H)` of a discrete distribution, `H` the Shannon entropy in nats.
pub fn perplexity(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    h.exp()
}
