//! Name-based dispatch of analysis modules.
//!
//! A module is a function from a table plus a JSON parameter object to a
//! serializable result. Parameters are decoded into a typed struct, so a
//! module's schema is the struct it deserializes.

use std::collections::BTreeMap;
use std::marker::PhantomData;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::data::{numeric_matrix, DataTable, MissingPolicy, Normalization, Value};
use crate::matrix::Matrix;

use super::{feature_selection, pca, regress_columns, tsne, AnalysisError, SvmConfig, TsneConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("unknown module `{name}` (registered: {})", available.join(", "))]
    UnknownModule { name: String, available: Vec<String> },
    #[error("{module}: {message}")]
    SchemaViolation {
        module: String,
        message: String,
        /// JSON path of the offending parameter, when known.
        path: Option<String>,
        cause: Option<AnalysisError>,
    },
}

pub trait AnalysisModule: Send + Sync {
    /// Human-readable description of the accepted parameters.
    fn schema(&self) -> Json;
    fn run(&self, table: &DataTable, params: Json) -> Result<Json, RegistryError>;
}

struct FnModule<P, R, F> {
    name: String,
    schema: Json,
    func: F,
    _types: PhantomData<fn(P) -> R>,
}

impl<P, R, F> AnalysisModule for FnModule<P, R, F>
where
    P: DeserializeOwned,
    R: Serialize,
    F: Fn(&DataTable, P) -> Result<R, AnalysisError> + Send + Sync,
{
    fn schema(&self) -> Json {
        self.schema.clone()
    }

    fn run(&self, table: &DataTable, params: Json) -> Result<Json, RegistryError> {
        let params: P = serde_path_to_error::deserialize(params).map_err(|e| RegistryError::SchemaViolation {
            module: self.name.clone(),
            message: e.inner().to_string(),
            path: Some(e.path().to_string()),
            cause: None,
        })?;
        let result = (self.func)(table, params).map_err(|e| RegistryError::SchemaViolation {
            module: self.name.clone(),
            message: e.to_string(),
            path: None,
            cause: Some(e),
        })?;
        serde_json::to_value(result).map_err(|e| RegistryError::SchemaViolation {
            module: self.name.clone(),
            message: format!("result is not serializable: {e}"),
            path: None,
            cause: None,
        })
    }
}

#[derive(Default)]
pub struct Registry {
    modules: BTreeMap<String, Box<dyn AnalysisModule>>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Registry holding `regression`, `feature_selection`, `pca` and `tsne`.
    pub fn with_defaults() -> Self {
        let mut r = Registry::new();
        r.register_fn(
            "regression",
            json!({
                "target": "numeric column",
                "predictors": "list of numeric columns",
                "add_intercept": "bool, default true"
            }),
            run_regression,
        );
        r.register_fn(
            "feature_selection",
            json!({
                "features": "list of numeric columns",
                "label": "categorical column, or list of columns combined into one label",
                "k": "number of features to select",
                "lambda": "L2 penalty, default 1e-3",
                "epochs": "default 200",
                "seed": "default 0"
            }),
            run_feature_selection,
        );
        r.register_fn(
            "pca",
            json!({
                "columns": "list of numeric columns",
                "out_dims": "default 2",
                "normalization": "none | minmax | zscore, default minmax"
            }),
            run_pca,
        );
        r.register_fn(
            "tsne",
            json!({
                "columns": "list of numeric columns",
                "perplexity": "default 30, at most (N-1)/3",
                "seed": "default 0",
                "iterations": "default 1000",
                "normalization": "none | minmax | zscore, default minmax"
            }),
            run_tsne,
        );
        r
    }

    pub fn register(&mut self, name: impl Into<String>, module: Box<dyn AnalysisModule>) {
        self.modules.insert(name.into(), module);
    }

    /// Registers a plain function; its parameter type doubles as the schema.
    pub fn register_fn<P, R, F>(&mut self, name: &str, schema: Json, func: F)
    where
        P: DeserializeOwned + 'static,
        R: Serialize + 'static,
        F: Fn(&DataTable, P) -> Result<R, AnalysisError> + Send + Sync + 'static,
    {
        self.register(
            name,
            Box::new(FnModule {
                name: name.to_string(),
                schema,
                func,
                _types: PhantomData,
            }),
        );
    }

    pub fn names(&self) -> Vec<String> {
        self.modules.keys().cloned().collect()
    }

    pub fn schema(&self, name: &str) -> Result<Json, RegistryError> {
        Ok(self.get(name)?.schema())
    }

    pub fn run(&self, name: &str, table: &DataTable, params: Json) -> Result<Json, RegistryError> {
        self.get(name)?.run(table, params)
    }

    fn get(&self, name: &str) -> Result<&dyn AnalysisModule, RegistryError> {
        self.modules
            .get(name)
            .map(|m| m.as_ref())
            .ok_or_else(|| RegistryError::UnknownModule {
                name: name.to_string(),
                available: self.names(),
            })
    }
}

fn default_true() -> bool {
    true
}

fn default_dims() -> usize {
    2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegressionParams {
    target: String,
    predictors: Vec<String>,
    #[serde(default = "default_true")]
    add_intercept: bool,
}

fn run_regression(table: &DataTable, p: RegressionParams) -> Result<super::RegressionSummary, AnalysisError> {
    regress_columns(table, &p.target, &p.predictors, p.add_intercept)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LabelSpec {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureSelectionParams {
    features: Vec<String>,
    label: LabelSpec,
    k: usize,
    lambda: Option<f64>,
    epochs: Option<usize>,
    seed: Option<u64>,
}

fn run_feature_selection(table: &DataTable, p: FeatureSelectionParams) -> Result<super::FeatureRanking, AnalysisError> {
    let label_cols = match p.label {
        LabelSpec::One(c) => vec![c],
        LabelSpec::Many(cs) => cs,
    };
    let label_cols = label_cols
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>, _>>()?;

    let m = numeric_matrix(table, &p.features, Normalization::None, MissingPolicy::DropRows)?;
    let mut rows = Vec::with_capacity(m.row_ids.len());
    let mut labels = Vec::with_capacity(m.row_ids.len());
    for (k, &id) in m.row_ids.iter().enumerate() {
        let pos = table.position_of(id).expect("row from this table");
        let parts: Option<Vec<String>> = label_cols
            .iter()
            .map(|c| match c.value(pos) {
                Value::Label(s) => Some(s),
                Value::Number(x) => Some(x.to_string()),
                Value::Missing => None,
            })
            .collect();
        if let Some(parts) = parts {
            labels.push(parts.join(" / "));
            rows.push(m.matrix.row(k).to_vec());
        }
    }
    let x = Matrix::from_row_major(rows.len(), p.features.len(), rows.concat());
    let defaults = SvmConfig::default();
    let config = SvmConfig {
        lambda: p.lambda.unwrap_or(defaults.lambda),
        epochs: p.epochs.unwrap_or(defaults.epochs),
        seed: p.seed.unwrap_or(defaults.seed),
    };
    feature_selection(&x, &p.features, &labels, p.k, &config)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PcaParams {
    columns: Vec<String>,
    #[serde(default = "default_dims")]
    out_dims: usize,
    #[serde(default)]
    normalization: Normalization,
}

fn run_pca(table: &DataTable, p: PcaParams) -> Result<super::Embedding, AnalysisError> {
    let m = numeric_matrix(table, &p.columns, p.normalization, MissingPolicy::DropRows)?;
    let mut e = pca(&m.matrix, p.out_dims)?;
    e.row_ids = m.row_ids;
    Ok(e)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TsneParams {
    columns: Vec<String>,
    perplexity: Option<f64>,
    seed: Option<u64>,
    iterations: Option<usize>,
    #[serde(default)]
    normalization: Normalization,
}

fn run_tsne(table: &DataTable, p: TsneParams) -> Result<super::Embedding, AnalysisError> {
    let m = numeric_matrix(table, &p.columns, p.normalization, MissingPolicy::DropRows)?;
    let defaults = TsneConfig::default();
    let config = TsneConfig {
        perplexity: p.perplexity.unwrap_or(defaults.perplexity),
        seed: p.seed.unwrap_or(defaults.seed),
        iterations: p.iterations.unwrap_or(defaults.iterations),
    };
    let mut e = tsne(&m.matrix, &config)?;
    e.row_ids = m.row_ids;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_csv, LoadOptions};

    fn table() -> DataTable {
        load_csv(
            "t",
            "x,y,g\n1,3,A\n2,5,A\n3,7,B\n4,9,B\n5,11,A\n".as_bytes(),
            &LoadOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn dispatches_regression() {
        let r = Registry::with_defaults();
        let out = r
            .run("regression", &table(), json!({"target": "y", "predictors": ["x"]}))
            .unwrap();
        assert!((out["r_squared"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(out["terms"], json!(["intercept", "x"]));
    }

    #[test]
    fn unknown_module_lists_names() {
        let r = Registry::with_defaults();
        match r.run("kmeans", &table(), json!({})) {
            Err(RegistryError::UnknownModule { available, .. }) => {
                assert_eq!(available, vec!["feature_selection", "pca", "regression", "tsne"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_parameters_are_schema_violations() {
        let r = Registry::with_defaults();
        match r.run("regression", &table(), json!({"target": "y", "predictors": "x"})) {
            Err(RegistryError::SchemaViolation { path, .. }) => assert_eq!(path.as_deref(), Some("predictors")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            r.run("regression", &table(), json!({"target": "y", "predictors": ["g"]})),
            Err(RegistryError::SchemaViolation { cause: Some(AnalysisError::Data(_)), .. })
        ));
    }

    #[test]
    fn tsne_perplexity_error_carries_module_error() {
        let r = Registry::with_defaults();
        let err = r
            .run("tsne", &table(), json!({"columns": ["x", "y"], "perplexity": 30.0}))
            .unwrap_err();
        assert!(matches!(
            err,
            RegistryError::SchemaViolation { cause: Some(AnalysisError::PerplexityTooLarge { .. }), .. }
        ));
    }

    #[test]
    fn custom_module_needs_only_registration() {
        #[derive(Deserialize)]
        struct CountParams {
            column: String,
        }
        let mut r = Registry::new();
        r.register_fn("count", json!({"column": "any column"}), |t: &DataTable, p: CountParams| {
            let c = t.column(&p.column)?;
            Ok((0..c.len()).filter(|&i| !c.is_missing(i)).count())
        });
        assert_eq!(r.run("count", &table(), json!({"column": "g"})).unwrap(), json!(5));
    }

    #[test]
    fn pca_and_feature_selection_modules() {
        let r = Registry::with_defaults();
        let e = r.run("pca", &table(), json!({"columns": ["x", "y"], "out_dims": 1})).unwrap();
        assert_eq!(e["method"], "pca");
        assert_eq!(e["row_ids"], json!([0, 1, 2, 3, 4]));
        let f = r
            .run("feature_selection", &table(), json!({"features": ["x", "y"], "label": "g", "k": 1}))
            .unwrap();
        assert_eq!(f["selected"].as_array().unwrap().len(), 1);
    }
}
