use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

use super::{AnalysisError, Embedding, EmbeddingMetadata, EmbeddingMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaMetadata {
    /// Eigenvalues of the sample covariance, descending.
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Unit principal axes, one per output dimension.
    pub components: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

/// Principal component projection of the rows of `x` onto `out_dims` axes.
///
/// Each axis is oriented so that its largest-magnitude loading is positive.
pub fn pca(x: &Matrix, out_dims: usize) -> Result<Embedding, AnalysisError> {
    let (n, d) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(AnalysisError::TooFewRows { needed: 2, found: n });
    }
    if out_dims == 0 || out_dims > n.min(d) {
        return Err(AnalysisError::InvalidDimensions {
            requested: out_dims,
            max: n.min(d),
        });
    }
    let mean: Vec<f64> = (0..d).map(|c| x.column(c).iter().sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |r, c| x.get(r, c) - mean[c]);
    let cov = (centered.transpose() * &centered) / (n - 1) as f64;
    let total: f64 = cov.diagonal().iter().sum();
    if total <= 0.0 {
        return Err(AnalysisError::DegenerateData);
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut explained_variance = Vec::with_capacity(out_dims);
    let mut components = Vec::with_capacity(out_dims);
    for &k in order.iter().take(out_dims) {
        let mut axis: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let pivot = axis
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > axis[best].abs() { i } else { best });
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        explained_variance.push(eig.eigenvalues[k].max(0.0));
        components.push(axis);
    }
    let explained_variance_ratio = explained_variance.iter().map(|v| v / total).collect();

    let coordinates = (0..n)
        .map(|r| {
            components
                .iter()
                .map(|axis| axis.iter().enumerate().map(|(c, a)| a * centered[(r, c)]).sum())
                .collect()
        })
        .collect();
    Ok(Embedding {
        method: EmbeddingMethod::Pca,
        coordinates,
        row_ids: Vec::new(),
        metadata: EmbeddingMetadata::Pca(PcaMetadata {
            explained_variance,
            explained_variance_ratio,
            components,
            mean,
        }),
    })
}
