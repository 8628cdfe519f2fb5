//! Statistical and machine-learning modules run on whole tables or on
//! subpopulations selected from a mapper graph.

pub mod distributions;
mod ols;
mod pca;
mod registry;
mod svm;
pub mod tsne;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, RowId};

pub use distributions::{regularized_incomplete_beta, student_t_two_sided_pvalue};
pub use ols::{ols_regression, regress_columns, RegressionSummary};
pub use pca::{pca, PcaMetadata};
pub use registry::{AnalysisModule, Registry, RegistryError};
pub use svm::{feature_selection, train_linear_svm, FeatureRanking, LinearSvm, SvmConfig};
pub use tsne::{tsne, TsneConfig, TsneMetadata};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("design matrix is rank deficient")]
    SingularDesign,
    #[error("need at least {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("class `{0}` has fewer than 2 samples")]
    ClassTooSmall(String),
    #[error("every feature has zero variance")]
    NoUsableFeatures,
    #[error("expected {expected} labels, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("requested {requested} output dimensions, at most {max} available")]
    InvalidDimensions { requested: usize, max: usize },
    #[error("data has zero total variance")]
    DegenerateData,
    #[error("perplexity {perplexity} exceeds (N-1)/3 = {max}")]
    PerplexityTooLarge { perplexity: f64, max: f64 },
    #[error("perplexity must be at least 1, got {0}")]
    InvalidPerplexity(f64),
    #[error("t-SNE needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMethod {
    Pca,
    Tsne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmbeddingMetadata {
    Pca(PcaMetadata),
    Tsne(TsneMetadata),
}

/// Low-dimensional coordinates of a set of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub method: EmbeddingMethod,
    pub coordinates: Vec<Vec<f64>>,
    /// Row ids behind `coordinates`; empty when embedding a bare matrix.
    pub row_ids: Vec<RowId>,
    pub metadata: EmbeddingMetadata,
}
