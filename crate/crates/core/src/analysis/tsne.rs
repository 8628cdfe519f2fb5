//! Exact t-SNE.
//!
//! Input affinities use a Gaussian kernel whose per-row bandwidth is found by
//! binary search on the precision until the conditional distribution hits
//! the requested perplexity. The embedding minimises KL(P || Q) with a
//! Student-t kernel in 2D by gradient descent with momentum, adaptive gains,
//! and early exaggeration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::{squared_distance, Matrix};

use super::{AnalysisError, Embedding, EmbeddingMetadata, EmbeddingMethod};

const PERPLEXITY_TOLERANCE: f64 = 1e-5;
const MAX_BANDWIDTH_STEPS: usize = 64;
const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const LEARNING_RATE: f64 = 200.0;
const INIT_STD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;
const OUT_DIMS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub seed: u64,
    pub iterations: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            seed: 0,
            iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneMetadata {
    pub kl_divergence: f64,
    pub perplexity: f64,
    pub seed: u64,
    pub iterations: usize,
}

/// Conditional affinities `P(j | i)` stored row-major, with the perplexity
/// each row actually reached.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalAffinities {
    pub n: usize,
    pub p: Vec<f64>,
    pub perplexities: Vec<f64>,
}

fn row_distribution(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    // Shift by the smallest off-diagonal distance so exp() cannot underflow
    // the whole row.
    let dmin = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, d)| *d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (o, d)) in out.iter_mut().zip(dist).enumerate() {
        *o = if j == i { 0.0 } else { (-(d - dmin) * beta).exp() };
        sum += *o;
    }
    let mut weighted = 0.0;
    for (o, d) in out.iter_mut().zip(dist) {
        *o /= sum;
        weighted += *o * (d - dmin);
    }
    // Shannon entropy in nats: H = ln(sum) + beta * E[d - dmin].
    sum.ln() + beta * weighted
}

/// Binary search on each row's Gaussian precision for the target perplexity.
pub fn conditional_affinities(x: &Matrix, perplexity: f64) -> ConditionalAffinities {
    let n = x.nrows();
    let target = perplexity.ln();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dist: Vec<f64> = (0..n).map(|j| squared_distance(x.row(i), x.row(j))).collect();
            let mut out = vec![0.0; n];
            let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
            let mut entropy = row_distribution(&dist, i, beta, &mut out);
            for _ in 0..MAX_BANDWIDTH_STEPS {
                if (entropy.exp() - perplexity).abs() < PERPLEXITY_TOLERANCE {
                    break;
                }
                if entropy > target {
                    lo = beta;
                    beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
                entropy = row_distribution(&dist, i, beta, &mut out);
            }
            (out, entropy.exp())
        })
        .collect();
    let mut p = Vec::with_capacity(n * n);
    let mut perplexities = Vec::with_capacity(n);
    for (row, perp) in rows {
        p.extend(row);
        perplexities.push(perp);
    }
    ConditionalAffinities { n, p, perplexities }
}

/// Symmetrized joint affinities `(P(j|i) + P(i|j)) / 2n`, summing to one.
pub fn joint_probabilities(cond: &ConditionalAffinities) -> Vec<f64> {
    let n = cond.n;
    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            joint[i * n + j] = (cond.p[i * n + j] + cond.p[j * n + i]) / (2.0 * n as f64);
        }
    }
    joint
}

/// Per-row Student-t numerators `1 / (1 + |y_i - y_j|²)` and their total.
fn student_kernel(y: &Matrix) -> (Vec<f64>, f64) {
    let n = y.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { 1.0 / (1.0 + squared_distance(y.row(i), y.row(j))) })
                .collect()
        })
        .collect();
    // Summed in row order so the total is independent of thread scheduling.
    let total = rows.iter().map(|r| r.iter().sum::<f64>()).sum();
    (rows.concat(), total)
}

/// KL(P || Q) for embedding `y`.
pub fn kl_divergence(p: &[f64], y: &Matrix) -> f64 {
    let (num, z) = student_kernel(y);
    p.iter()
        .zip(&num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &nij)| pij * (pij / (nij / z)).ln())
        .sum()
}

/// Gradient of KL(αP || Q) with respect to `y`:
/// `4 Σ_j (α p_ij − q_ij)(y_i − y_j) / (1 + |y_i − y_j|²)`.
pub fn kl_gradient(p: &[f64], y: &Matrix, exaggeration: f64) -> Matrix {
    let n = y.nrows();
    let dims = y.ncols();
    let (num, z) = student_kernel(y);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = vec![0.0; dims];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let nij = num[i * n + j];
                let mult = (exaggeration * p[i * n + j] - nij / z) * nij;
                for (gd, (a, b)) in g.iter_mut().zip(y.row(i).iter().zip(y.row(j))) {
                    *gd += 4.0 * mult * (a - b);
                }
            }
            g
        })
        .collect();
    Matrix::from_rows(&rows)
}

pub fn max_perplexity(n: usize) -> f64 {
    (n as f64 - 1.0) / 3.0
}

/// Embeds the rows of `x` in 2D.
pub fn tsne(x: &Matrix, config: &TsneConfig) -> Result<Embedding, AnalysisError> {
    let n = x.nrows();
    if n < 4 {
        return Err(AnalysisError::TooFewPoints(n));
    }
    if config.perplexity.is_nan() || config.perplexity < 1.0 {
        return Err(AnalysisError::InvalidPerplexity(config.perplexity));
    }
    if config.perplexity > max_perplexity(n) {
        return Err(AnalysisError::PerplexityTooLarge {
            perplexity: config.perplexity,
            max: max_perplexity(n),
        });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }

    let p = joint_probabilities(&conditional_affinities(x, config.perplexity));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let mut y = Matrix::from_row_major(n, OUT_DIMS, (0..n * OUT_DIMS).map(|_| normal.sample(&mut rng)).collect());
    let mut update = Matrix::zeros(n, OUT_DIMS);
    let mut gains = Matrix::from_row_major(n, OUT_DIMS, vec![1.0; n * OUT_DIMS]);

    for iter in 0..config.iterations {
        let (exaggeration, momentum) = if iter < EXAGGERATION_ITERS {
            (EXAGGERATION, INITIAL_MOMENTUM)
        } else {
            (1.0, FINAL_MOMENTUM)
        };
        let grad = kl_gradient(&p, &y, exaggeration);
        for r in 0..n {
            for c in 0..OUT_DIMS {
                let g = grad.get(r, c);
                let u = update.get(r, c);
                let gain = if (g > 0.0) != (u > 0.0) {
                    gains.get(r, c) + 0.2
                } else {
                    gains.get(r, c) * 0.8
                }
                .max(MIN_GAIN);
                gains.set(r, c, gain);
                let u = momentum * u - LEARNING_RATE * gain * g;
                update.set(r, c, u);
                y.set(r, c, y.get(r, c) + u);
            }
        }
        for c in 0..OUT_DIMS {
            let mean = y.column(c).iter().sum::<f64>() / n as f64;
            for r in 0..n {
                y.set(r, c, y.get(r, c) - mean);
            }
        }
    }

    let kl = kl_divergence(&p, &y);
    Ok(Embedding {
        method: EmbeddingMethod::Tsne,
        coordinates: y.rows_iter().map(<[f64]>::to_vec).collect(),
        row_ids: Vec::new(),
        metadata: EmbeddingMetadata::Tsne(TsneMetadata {
            kl_divergence: kl,
            perplexity: config.perplexity,
            seed: config.seed,
            iterations: config.iterations,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Matrix {
        Matrix::from_rows(&(0..n).map(|i| [i as f64, (i * i % 7) as f64]).collect::<Vec<_>>())
    }

    #[test]
    fn rows_are_distributions() {
        let cond = conditional_affinities(&grid(20), 5.0);
        for i in 0..20 {
            let s: f64 = cond.p[i * 20..(i + 1) * 20].iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert_eq!(cond.p[i * 20 + i], 0.0);
            assert!((cond.perplexities[i] - 5.0).abs() < 1e-3);
        }
        let joint = joint_probabilities(&cond);
        assert!((joint.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn argument_checks() {
        let x = grid(10);
        assert_eq!(tsne(&grid(3), &TsneConfig::default()), Err(AnalysisError::TooFewPoints(3)));
        assert!(matches!(
            tsne(&x, &TsneConfig { perplexity: 3.5, ..Default::default() }),
            Err(AnalysisError::PerplexityTooLarge { .. })
        ));
        assert!(matches!(
            tsne(&x, &TsneConfig { perplexity: 0.5, ..Default::default() }),
            Err(AnalysisError::InvalidPerplexity(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let x = grid(16);
        let cfg = TsneConfig { perplexity: 4.0, seed: 9, iterations: 300 };
        let a = tsne(&x, &cfg).unwrap();
        let b = tsne(&x, &cfg).unwrap();
        assert_eq!(a, b);
        let c = tsne(&x, &TsneConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.coordinates, c.coordinates);
    }
}
