//! Linear SVM feature ranking.
//!
//! Features are standardized, then one-vs-rest linear SVMs (hinge loss with
//! an L2 penalty) are trained by Pegasos-style stochastic subgradient
//! descent. A feature's score is the largest absolute weight it receives in
//! any of the classifiers.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnScale, FittedNormalization, Normalization};
use crate::matrix::Matrix;

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-3,
            epochs: 200,
            seed: 0,
        }
    }
}

/// Trained one-vs-rest model over the non-degenerate features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub classes: Vec<String>,
    /// Indices (into the input columns) of the features the model uses.
    pub features: Vec<usize>,
    scales: Vec<ColumnScale>,
    /// One weight vector per classifier, over `features`, plus a bias term.
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl LinearSvm {
    /// Raw decision values: one column per classifier. With two classes there
    /// is a single classifier whose positive side is `classes[1]`.
    pub fn decision_values(&self, x: &Matrix) -> Vec<Vec<f64>> {
        (0..x.nrows())
            .map(|r| {
                let z = self.standardize_row(x.row(r));
                self.weights
                    .iter()
                    .zip(&self.biases)
                    .map(|(w, b)| dot(w, &z) + b)
                    .collect()
            })
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<&str> {
        self.decision_values(x)
            .into_iter()
            .map(|d| {
                let class = if d.len() == 1 {
                    usize::from(d[0] > 0.0)
                } else {
                    argmax(&d)
                };
                self.classes[class].as_str()
            })
            .collect()
    }

    /// Absolute standardized weight per used feature, maximised over classifiers.
    pub fn feature_scores(&self) -> Vec<f64> {
        (0..self.features.len())
            .map(|j| self.weights.iter().map(|w| w[j].abs()).fold(0.0, f64::max))
            .collect()
    }

    fn standardize_row(&self, row: &[f64]) -> Vec<f64> {
        self.features
            .iter()
            .zip(&self.scales)
            .map(|(&j, s)| s.apply(row[j]))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Pegasos on standardized rows `z` with ±1 targets. The bias is learned as
/// the weight of a constant feature.
fn pegasos(z: &Matrix, targets: &[f64], config: &SvmConfig, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let d = z.ncols();
    let lambda = config.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..z.nrows()).collect();
    let mut t = 0usize;
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = z.row(i);
            let margin = targets[i] * (dot(&w[..d], row) + w[d]);
            let shrink = 1.0 - eta * lambda;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            if margin < 1.0 {
                let step = eta * targets[i];
                for (v, x) in w[..d].iter_mut().zip(row) {
                    *v += step * x;
                }
                w[d] += step;
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                for v in w.iter_mut() {
                    *v *= s;
                }
            }
        }
    }
    let bias = w.pop().unwrap_or_default();
    (w, bias)
}

/// Trains the one-vs-rest model. Zero-variance features are skipped.
pub fn train_linear_svm(x: &Matrix, labels: &[String], config: &SvmConfig) -> Result<LinearSvm, AnalysisError> {
    if labels.len() != x.nrows() {
        return Err(AnalysisError::LengthMismatch {
            expected: x.nrows(),
            found: labels.len(),
        });
    }
    if !(config.lambda > 0.0 && config.lambda.is_finite()) {
        return Err(AnalysisError::InvalidParameter(format!("lambda must be positive, got {}", config.lambda)));
    }
    let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(AnalysisError::SingleClass);
    }
    for c in &classes {
        if labels.iter().filter(|l| *l == c).count() < 2 {
            return Err(AnalysisError::ClassTooSmall(c.clone()));
        }
    }

    let fitted = FittedNormalization::fit(Normalization::ZScore, x);
    let features: Vec<usize> = (0..x.ncols()).filter(|&j| fitted.scales[j].spread > 0.0).collect();
    if features.is_empty() {
        return Err(AnalysisError::NoUsableFeatures);
    }
    let scales: Vec<ColumnScale> = features.iter().map(|&j| fitted.scales[j]).collect();
    let mut z = Matrix::zeros(x.nrows(), features.len());
    for r in 0..x.nrows() {
        for (k, (&j, s)) in features.iter().zip(&scales).enumerate() {
            z.set(r, k, s.apply(x.get(r, j)));
        }
    }

    let positives: Vec<&String> = if classes.len() == 2 {
        vec![&classes[1]]
    } else {
        classes.iter().collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = Vec::with_capacity(positives.len());
    let mut biases = Vec::with_capacity(positives.len());
    for positive in positives {
        let targets: Vec<f64> = labels.iter().map(|l| if l == positive { 1.0 } else { -1.0 }).collect();
        let (w, b) = pegasos(&z, &targets, config, &mut rng);
        weights.push(w);
        biases.push(b);
    }
    Ok(LinearSvm {
        classes,
        features,
        scales,
        weights,
        biases,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// Usable features, best first.
    pub features: Vec<String>,
    pub scores: Vec<f64>,
    pub selected: Vec<String>,
    pub training_accuracy: f64,
    /// Zero-variance features left out of the ranking.
    pub excluded: Vec<String>,
    pub warnings: Vec<String>,
}

/// Ranks `feature_names` (the columns of `x`) by how strongly a linear SVM
/// relies on them to separate `labels`, and keeps the top `k_select`.
pub fn feature_selection(
    x: &Matrix,
    feature_names: &[String],
    labels: &[String],
    k_select: usize,
    config: &SvmConfig,
) -> Result<FeatureRanking, AnalysisError> {
    assert_eq!(feature_names.len(), x.ncols(), "one name per feature column");
    let model = train_linear_svm(x, labels, config)?;
    let scores = model.feature_scores();

    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort keeps input order among equal scores.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let features: Vec<String> = order.iter().map(|&k| feature_names[model.features[k]].clone()).collect();
    let sorted_scores: Vec<f64> = order.iter().map(|&k| scores[k]).collect();
    let selected = features.iter().take(k_select).cloned().collect();

    let excluded: Vec<String> = (0..x.ncols())
        .filter(|j| !model.features.contains(j))
        .map(|j| feature_names[j].clone())
        .collect();
    let warnings = excluded
        .iter()
        .map(|f| format!("feature `{f}` has zero variance and was excluded"))
        .collect();

    let predictions = model.predict(x);
    let correct = predictions.iter().zip(labels).filter(|(p, l)| **p == l.as_str()).count();
    Ok(FeatureRanking {
        features,
        scores: sorted_scores,
        selected,
        training_accuracy: correct as f64 / labels.len() as f64,
        excluded,
        warnings,
    })
}
