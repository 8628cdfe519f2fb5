use std::fmt::Debug;

use phenomapper_core::analysis::{AnalysisError, RegistryError};
use phenomapper_core::document::DocumentError;
use phenomapper_core::{DataError, LayoutError, MapperError, SelectionError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    /// The uploaded file could not be parsed.
    #[error("{0}")]
    Upload(DataError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Mapper(#[from] MapperError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown graph `{0}`")]
    UnknownGraph(String),
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("bad query string: {0}")]
    BadQuery(String),
    #[error("invalid request: {message}")]
    InvalidRequest { message: String, path: Option<String> },
    #[error("request body exceeds {0} bytes")]
    PayloadTooLarge(usize),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// The JSON error body every endpoint returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub error_code: String,
    pub message: String,
    pub detail_path: Option<String>,
}

/// Name of an enum variant as printed by its derived `Debug`.
fn variant_name(e: &dyn Debug) -> String {
    let text = format!("{e:?}");
    text.split(|c: char| !c.is_alphanumeric() && c != '_')
        .next()
        .unwrap_or_default()
        .to_string()
}

fn data_path(e: &DataError) -> Option<String> {
    match e {
        DataError::RaggedRow { row, .. } => Some(format!("rows[{row}]")),
        DataError::UnknownColumn(c)
        | DataError::NonNumericColumn(c)
        | DataError::NonNumericAxis(c)
        | DataError::DuplicateColumnName(c) => Some(c.clone()),
        DataError::MissingValue { column, .. } => Some(column.clone()),
        _ => None,
    }
}

impl ServiceError {
    pub fn invalid(message: impl Into<String>, path: Option<String>) -> Self {
        ServiceError::InvalidRequest {
            message: message.into(),
            path,
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ServiceError::Upload(_) | ServiceError::MalformedJson(_) | ServiceError::BadQuery(_) => 400,
            ServiceError::Document(DocumentError::SchemaError { .. }) => 400,
            ServiceError::UnknownSession(_) | ServiceError::UnknownGraph(_) => 404,
            ServiceError::Registry(RegistryError::UnknownModule { .. }) => 404,
            ServiceError::PayloadTooLarge(_) => 413,
            ServiceError::Io(_) | ServiceError::Internal(_) => 500,
            _ => 422,
        }
    }

    pub fn error_code(&self) -> String {
        match self {
            ServiceError::Upload(e) | ServiceError::Data(e) => variant_name(e),
            ServiceError::Mapper(MapperError::Data(e)) => variant_name(e),
            ServiceError::Mapper(e) => variant_name(e),
            ServiceError::Layout(e) => variant_name(e),
            ServiceError::Selection(e) => variant_name(e),
            ServiceError::Document(DocumentError::Data(e)) => variant_name(e),
            ServiceError::Document(DocumentError::Selection(e)) => variant_name(e),
            ServiceError::Document(e) => variant_name(e),
            ServiceError::Registry(RegistryError::SchemaViolation { cause: Some(c), .. }) => match c {
                AnalysisError::Data(e) => variant_name(e),
                other => variant_name(other),
            },
            ServiceError::Registry(e) => variant_name(e),
            ServiceError::Analysis(AnalysisError::Data(e)) => variant_name(e),
            ServiceError::Analysis(e) => variant_name(e),
            other => variant_name(other),
        }
    }

    pub fn detail_path(&self) -> Option<String> {
        match self {
            ServiceError::Upload(e) | ServiceError::Data(e) => data_path(e),
            ServiceError::Mapper(MapperError::Data(e)) => data_path(e),
            ServiceError::Mapper(MapperError::FilterColumnMissing(c)) => Some(c.clone()),
            ServiceError::Document(DocumentError::SchemaError { path, .. }) => Some(path.clone()),
            ServiceError::Registry(RegistryError::SchemaViolation { path, cause, .. }) => path.clone().or_else(|| {
                match cause {
                    Some(AnalysisError::Data(e)) => data_path(e),
                    _ => None,
                }
            }),
            ServiceError::Analysis(AnalysisError::Data(e)) => data_path(e),
            ServiceError::InvalidRequest { path, .. } => path.clone(),
            _ => None,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error_code: self.error_code(),
            message: self.to_string(),
            detail_path: self.detail_path(),
        }
    }

    /// Process exit code for the CLI: 2 for anything the caller can fix, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.status() >= 500 {
            1
        } else {
            2
        }
    }
}

/// Decodes a JSON request, separating syntax errors (400) from shape errors
/// (422, with the JSON path of the offending field).
pub fn decode_json<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ServiceError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| ServiceError::MalformedJson(e.to_string()))?;
    decode_value(value)
}

pub fn decode_value<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, ServiceError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ServiceError::invalid(e.into_inner().to_string(), Some(path))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_and_statuses() {
        let e = ServiceError::Upload(DataError::RaggedRow { row: 4, expected: 2, found: 1 });
        assert_eq!(e.status(), 400);
        assert_eq!(e.error_code(), "RaggedRow");
        assert_eq!(e.detail_path().as_deref(), Some("rows[4]"));

        let e = ServiceError::from(MapperError::InvalidOverlap(1.0));
        assert_eq!((e.status(), e.error_code().as_str()), (422, "InvalidOverlap"));
        assert_eq!(ServiceError::UnknownSession("x".into()).status(), 404);
        assert_eq!(ServiceError::UnknownSession("x".into()).error_code(), "UnknownSession");
        assert_eq!(ServiceError::Upload(DataError::EmptyFile).error_code(), "EmptyFile");
    }

    #[test]
    fn json_decoding_paths() {
        #[derive(Debug, serde::Deserialize)]
        #[allow(dead_code)]
        struct P {
            a: Vec<u32>,
        }
        assert!(matches!(decode_json::<P>(b"{"), Err(ServiceError::MalformedJson(_))));
        match decode_json::<P>(br#"{"a": [1, "x"]}"#) {
            Err(ServiceError::InvalidRequest { path, .. }) => assert_eq!(path.as_deref(), Some("a[1]")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
