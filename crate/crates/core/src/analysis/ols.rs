use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{numeric_matrix, DataTable, MissingPolicy, Normalization, RowId};
use crate::matrix::Matrix;

use super::distributions::student_t_two_sided_pvalue;
use super::AnalysisError;

/// Relative threshold on the diagonal of R (after column equilibration)
/// below which the design is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Ordinary least squares fit with coefficient significance.
///
/// When an intercept is fitted it is the first entry of every per-term
/// vector, and `terms[0] == "intercept"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub target: String,
    pub predictors: Vec<String>,
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub n_obs: usize,
    pub dof: usize,
    /// Row ids behind `fitted`/`residuals`; empty when fitted from a bare matrix.
    pub row_ids: Vec<RowId>,
}

/// Fits `y ~ X` by Householder QR on the column-equilibrated design.
///
/// Standard errors come from `σ̂² (XᵀX)⁻¹` with `σ̂² = RSS / dof`, and
/// p-values are two-sided Student-t with `dof = n - p` degrees of freedom.
pub fn ols_regression(x: &Matrix, y: &[f64], add_intercept: bool) -> Result<RegressionSummary, AnalysisError> {
    let n = x.nrows();
    assert_eq!(n, y.len(), "design and response lengths differ");
    let k = x.ncols();
    let p = k + usize::from(add_intercept);
    if n <= p {
        return Err(AnalysisError::TooFewRows { needed: p + 1, found: n });
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }

    let design = DMatrix::from_fn(n, p, |r, c| {
        if add_intercept {
            if c == 0 {
                1.0
            } else {
                x.get(r, c - 1)
            }
        } else {
            x.get(r, c)
        }
    });
    let scales: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    if scales.contains(&0.0) {
        return Err(AnalysisError::SingularDesign);
    }
    let mut scaled = design.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= scales[j];
    }

    let qr = scaled.qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if r.diagonal().iter().any(|v| v.abs() <= RANK_TOLERANCE * diag_max) {
        return Err(AnalysisError::SingularDesign);
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta_scaled = r
        .solve_upper_triangular(&qty)
        .ok_or(AnalysisError::SingularDesign)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(AnalysisError::SingularDesign)?;

    let coefficients: Vec<f64> = beta_scaled.iter().zip(&scales).map(|(b, s)| b / s).collect();
    let fitted_v = &design * DVector::from_column_slice(&coefficients);
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(o, f)| o - f).collect();

    let dof = n - p;
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = rss / dof as f64;
    let tss: f64 = if add_intercept {
        let mean = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|v| (v - mean) * (v - mean)).sum()
    } else {
        y.iter().map(|v| v * v).sum()
    };
    // A constant response is fitted perfectly up to rounding.
    let y_sq: f64 = y.iter().map(|v| v * v).sum();
    let r_squared = if tss > 0.0 {
        1.0 - rss / tss
    } else if rss <= 1e-20 * y_sq {
        1.0
    } else {
        0.0
    };
    let baseline = if add_intercept { n - 1 } else { n } as f64;
    let adj_r_squared = 1.0 - (1.0 - r_squared) * baseline / dof as f64;

    let mut std_errors = Vec::with_capacity(p);
    let mut t_stats = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for j in 0..p {
        // Diagonal of (DᵀD)⁻¹ = S⁻¹ R⁻¹ R⁻ᵀ S⁻¹.
        let row_norm_sq: f64 = r_inv.row(j).iter().map(|v| v * v).sum();
        let se = (sigma2 * row_norm_sq).sqrt() / scales[j];
        let t = if se > 0.0 {
            coefficients[j] / se
        } else if coefficients[j] == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(coefficients[j])
        };
        std_errors.push(se);
        t_stats.push(t);
        p_values.push(student_t_two_sided_pvalue(t, dof));
    }

    let predictors: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    let mut terms = Vec::with_capacity(p);
    if add_intercept {
        terms.push("intercept".to_string());
    }
    terms.extend(predictors.iter().cloned());
    Ok(RegressionSummary {
        target: "y".to_string(),
        predictors,
        terms,
        coefficients,
        std_errors,
        t_stats,
        p_values,
        r_squared,
        adj_r_squared,
        fitted,
        residuals,
        n_obs: n,
        dof,
        row_ids: Vec::new(),
    })
}

/// Regresses column `target` on `predictors`, dropping rows with a missing
/// value in any of them.
pub fn regress_columns<S: AsRef<str>>(
    table: &DataTable,
    target: &str,
    predictors: &[S],
    add_intercept: bool,
) -> Result<RegressionSummary, AnalysisError> {
    let mut cols: Vec<&str> = predictors.iter().map(|s| s.as_ref()).collect();
    cols.push(target);
    let m = numeric_matrix(table, &cols, Normalization::None, MissingPolicy::DropRows)?;
    let k = predictors.len();
    let x = Matrix::from_rows(&m.matrix.rows_iter().map(|r| r[..k].to_vec()).collect::<Vec<_>>());
    let x = if k == 0 { Matrix::zeros(m.matrix.nrows(), 0) } else { x };
    let y = m.matrix.column(k);
    let mut summary = ols_regression(&x, &y, add_intercept)?;
    summary.target = target.to_string();
    summary.predictors = predictors.iter().map(|s| s.as_ref().to_string()).collect();
    let offset = usize::from(add_intercept);
    for (j, name) in summary.predictors.iter().enumerate() {
        summary.terms[j + offset] = name.clone();
    }
    summary.row_ids = m.row_ids;
    Ok(summary)
}
