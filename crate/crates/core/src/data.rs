//! Typed tabular data: CSV ingestion, column typing, and numeric views.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

/// Stable identifier of a data row, assigned in file order at load time.
pub type RowId = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("input contains no data rows")]
    EmptyFile,
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column name `{0}`")]
    DuplicateColumnName(String),
    #[error("column has no non-missing values")]
    AllMissing,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is not numeric")]
    NonNumericColumn(String),
    #[error("axis column `{0}` is not numeric")]
    NonNumericAxis(String),
    #[error("no rows remain after dropping rows with missing values")]
    NoRowsRemaining,
    #[error("column `{column}` is missing a value for row {row_id}")]
    MissingValue { column: String, row_id: RowId },
    #[error("unknown row id {0}")]
    UnknownRowId(RowId),
    #[error("duplicate row id {0}")]
    DuplicateRowId(RowId),
    #[error("column `{column}` has {found} values, expected {expected}")]
    ColumnLength {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("csv error: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// A single cell, as seen from outside the column store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Label(String),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    values: ColumnValues,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            values: ColumnValues::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            values: ColumnValues::Categorical(values),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        match self.values {
            ColumnValues::Numeric(_) => ColumnKind::Numeric,
            ColumnValues::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn values(&self) -> &ColumnValues {
        &self.values
    }

    pub fn len(&self) -> usize {
        match &self.values {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match &self.values {
            ColumnValues::Numeric(v) => v[row].is_none(),
            ColumnValues::Categorical(v) => v[row].is_none(),
        }
    }

    pub fn missing_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_missing(i)).collect()
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match &self.values {
            ColumnValues::Numeric(v) => Some(v),
            ColumnValues::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[Option<String>]> {
        match &self.values {
            ColumnValues::Categorical(v) => Some(v),
            ColumnValues::Numeric(_) => None,
        }
    }

    /// Sorted set of labels of a categorical column; empty for numeric columns.
    pub fn labels(&self) -> BTreeSet<&str> {
        match &self.values {
            ColumnValues::Categorical(v) => v.iter().flatten().map(String::as_str).collect(),
            ColumnValues::Numeric(_) => BTreeSet::new(),
        }
    }

    pub fn value(&self, row: usize) -> Value {
        match &self.values {
            ColumnValues::Numeric(v) => v[row].map_or(Value::Missing, Value::Number),
            ColumnValues::Categorical(v) => v[row].clone().map_or(Value::Missing, Value::Label),
        }
    }

    fn take(&self, positions: &[usize]) -> Column {
        let values = match &self.values {
            ColumnValues::Numeric(v) => ColumnValues::Numeric(positions.iter().map(|&i| v[i]).collect()),
            ColumnValues::Categorical(v) => {
                ColumnValues::Categorical(positions.iter().map(|&i| v[i].clone()).collect())
            }
        };
        Column {
            name: self.name.clone(),
            values,
        }
    }
}

/// Name and kind of a column, the schema half of a [`Column`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub kind: ColumnKind,
}

/// An immutable, column-oriented dataset with stable row identifiers.
#[derive(Debug, Clone)]
pub struct DataTable {
    name: String,
    columns: Vec<Column>,
    row_ids: Vec<RowId>,
    position: HashMap<RowId, usize>,
}

impl PartialEq for DataTable {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.columns == other.columns && self.row_ids == other.row_ids
    }
}

impl DataTable {
    /// Assembles a table from columns and explicit row ids.
    pub fn from_columns(
        name: impl Into<String>,
        columns: Vec<Column>,
        row_ids: Vec<RowId>,
    ) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(DataError::DuplicateColumnName(c.name.clone()));
            }
            if c.len() != row_ids.len() {
                return Err(DataError::ColumnLength {
                    column: c.name.clone(),
                    expected: row_ids.len(),
                    found: c.len(),
                });
            }
        }
        let mut position = HashMap::with_capacity(row_ids.len());
        for (i, &id) in row_ids.iter().enumerate() {
            if position.insert(id, i).is_some() {
                return Err(DataError::DuplicateRowId(id));
            }
        }
        Ok(DataTable {
            name: name.into(),
            columns,
            row_ids,
            position,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn schema(&self) -> Vec<ColumnInfo> {
        self.columns
            .iter()
            .map(|c| ColumnInfo {
                name: c.name.clone(),
                kind: c.kind(),
            })
            .collect()
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn row_ids(&self) -> &[RowId] {
        &self.row_ids
    }

    pub fn column(&self, name: &str) -> Result<&Column, DataError> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    /// Position of a row id within this table.
    pub fn position_of(&self, row_id: RowId) -> Option<usize> {
        self.position.get(&row_id).copied()
    }

    /// All cells of one row, in column order.
    pub fn row_values(&self, position: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c.value(position)).collect()
    }

    /// Restricts the table to the given rows, keeping their original ids.
    /// Rows keep the order of `row_ids`.
    pub fn subset(&self, row_ids: &[RowId]) -> Result<DataTable, DataError> {
        let positions = row_ids
            .iter()
            .map(|&id| self.position_of(id).ok_or(DataError::UnknownRowId(id)))
            .collect::<Result<Vec<_>, _>>()?;
        let columns = self.columns.iter().map(|c| c.take(&positions)).collect();
        DataTable::from_columns(self.name.clone(), columns, row_ids.to_vec())
    }

    /// Serializes the table as CSV with a header row. Missing cells are empty.
    pub fn to_csv(&self) -> Result<String, DataError> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .map_err(|e| DataError::Csv(e.to_string()))?;
        for pos in 0..self.n_rows() {
            let record: Vec<String> = self
                .columns
                .iter()
                .map(|c| match c.value(pos) {
                    Value::Number(x) => x.to_string(),
                    Value::Label(s) => s,
                    Value::Missing => String::new(),
                })
                .collect();
            wtr.write_record(&record).map_err(|e| DataError::Csv(e.to_string()))?;
        }
        let bytes = wtr.into_inner().map_err(|e| DataError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| DataError::Csv(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Literal treated as a missing value in addition to the empty string.
    pub missing_token: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b',',
            has_header: true,
            missing_token: "NA".to_string(),
        }
    }
}

fn is_missing_token(s: &str, missing_token: &str) -> bool {
    s.is_empty() || s == missing_token
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Decides whether a raw column is numeric or categorical.
///
/// A column is numeric iff every non-missing value parses as a finite real.
pub fn infer_column_kind<S: AsRef<str>>(values: &[S], missing_token: &str) -> Result<ColumnKind, DataError> {
    let mut present = values
        .iter()
        .map(|s| s.as_ref().trim())
        .filter(|s| !is_missing_token(s, missing_token))
        .peekable();
    if present.peek().is_none() {
        return Err(DataError::AllMissing);
    }
    if present.all(|s| parse_finite(s).is_some()) {
        Ok(ColumnKind::Numeric)
    } else {
        Ok(ColumnKind::Categorical)
    }
}

/// Reads a CSV stream into a typed [`DataTable`]. Row ids follow file order.
///
/// Columns whose every cell is missing are kept as categorical columns with
/// an empty label set.
pub fn load_csv<R: Read>(name: &str, source: R, options: &LoadOptions) -> Result<DataTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut records = reader.records();
    let mut raw_rows: Vec<Vec<String>> = Vec::new();
    let header: Vec<String> = if options.has_header {
        match records.next() {
            Some(r) => r.map_err(|e| DataError::Csv(e.to_string()))?.iter().map(str::to_string).collect(),
            None => return Err(DataError::EmptyFile),
        }
    } else {
        Vec::new()
    };
    for rec in records {
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        raw_rows.push(rec.iter().map(str::to_string).collect());
    }
    if raw_rows.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let header = if options.has_header {
        header
    } else {
        (1..=raw_rows[0].len()).map(|i| format!("column_{i}")).collect()
    };
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(DataError::DuplicateColumnName(h.clone()));
        }
    }
    for (i, row) in raw_rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(DataError::RaggedRow {
                row: i,
                expected: header.len(),
                found: row.len(),
            });
        }
    }

    let token = options.missing_token.as_str();
    let columns = header
        .iter()
        .enumerate()
        .map(|(j, col_name)| {
            let raw: Vec<&str> = raw_rows.iter().map(|r| r[j].as_str()).collect();
            let kind = infer_column_kind(&raw, token).unwrap_or(ColumnKind::Categorical);
            match kind {
                ColumnKind::Numeric => Column::numeric(
                    col_name.clone(),
                    raw.iter()
                        .map(|s| if is_missing_token(s, token) { None } else { parse_finite(s) })
                        .collect(),
                ),
                ColumnKind::Categorical => Column::categorical(
                    col_name.clone(),
                    raw.iter()
                        .map(|s| (!is_missing_token(s, token)).then(|| s.to_string()))
                        .collect(),
                ),
            }
        })
        .collect();
    let row_ids = (0..raw_rows.len() as RowId).collect();
    DataTable::from_columns(name, columns, row_ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    None,
    #[default]
    MinMax,
    ZScore,
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Normalization::None),
            "minmax" | "min-max" => Ok(Normalization::MinMax),
            "zscore" | "z-score" => Ok(Normalization::ZScore),
            other => Err(format!("unknown normalization `{other}` (expected none, minmax or zscore)")),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::MinMax => "minmax",
            Normalization::ZScore => "zscore",
        })
    }
}

/// Per-column statistics captured when a normalization is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    /// Value subtracted (min for min-max, mean for z-score, 0 otherwise).
    pub offset: f64,
    /// Divisor (max-min, sample std, or 1). Zero spreads map to 0.
    pub spread: f64,
}

impl ColumnScale {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if self.spread > 0.0 {
            (x - self.offset) / self.spread
        } else {
            x - self.offset
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedNormalization {
    pub method: Normalization,
    pub scales: Vec<ColumnScale>,
}

impl FittedNormalization {
    pub fn fit(method: Normalization, matrix: &Matrix) -> Self {
        let n = matrix.nrows();
        let scales = (0..matrix.ncols())
            .map(|c| {
                let col = matrix.column(c);
                match method {
                    Normalization::None => ColumnScale { offset: 0.0, spread: 1.0 },
                    Normalization::MinMax => {
                        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        ColumnScale { offset: lo, spread: hi - lo }
                    }
                    Normalization::ZScore => {
                        let mean = col.iter().sum::<f64>() / n as f64;
                        let var = if n > 1 {
                            col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
                        } else {
                            0.0
                        };
                        ColumnScale { offset: mean, spread: var.sqrt() }
                    }
                }
            })
            .collect();
        FittedNormalization { method, scales }
    }

    pub fn transform(&self, matrix: &mut Matrix) {
        if self.method == Normalization::None {
            return;
        }
        for r in 0..matrix.nrows() {
            for (x, s) in matrix.row_mut(r).iter_mut().zip(&self.scales) {
                *x = s.apply(*x);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    DropRows,
    Error,
}

/// Numeric view of selected columns, with the rows that survived the
/// missing-value policy.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericMatrix {
    pub matrix: Matrix,
    pub row_ids: Vec<RowId>,
    pub dropped_row_ids: Vec<RowId>,
    pub normalization: FittedNormalization,
}

pub fn numeric_matrix<S: AsRef<str>>(
    table: &DataTable,
    columns: &[S],
    norm: Normalization,
    policy: MissingPolicy,
) -> Result<NumericMatrix, DataError> {
    let cols = columns
        .iter()
        .map(|name| {
            let c = table.column(name.as_ref())?;
            c.as_numeric()
                .ok_or_else(|| DataError::NonNumericColumn(name.as_ref().to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut data = Vec::with_capacity(table.n_rows() * cols.len());
    let mut kept = Vec::with_capacity(table.n_rows());
    let mut dropped = Vec::new();
    'rows: for (pos, &id) in table.row_ids().iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            if c[pos].is_none() {
                match policy {
                    MissingPolicy::DropRows => {
                        dropped.push(id);
                        continue 'rows;
                    }
                    MissingPolicy::Error => {
                        return Err(DataError::MissingValue {
                            column: columns[j].as_ref().to_string(),
                            row_id: id,
                        })
                    }
                }
            }
        }
        data.extend(cols.iter().map(|c| c[pos].unwrap_or_default()));
        kept.push(id);
    }
    if kept.is_empty() {
        return Err(DataError::NoRowsRemaining);
    }
    let mut matrix = Matrix::from_row_major(kept.len(), cols.len(), data);
    let normalization = FittedNormalization::fit(norm, &matrix);
    normalization.transform(&mut matrix);
    Ok(NumericMatrix {
        matrix,
        row_ids: kept,
        dropped_row_ids: dropped,
        normalization,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub row_id: RowId,
    pub x: f64,
    pub y: f64,
    pub color_value: Option<Value>,
}

/// Points for a two-column scatter plot, optionally colored by a third column.
/// Rows missing either axis value are skipped.
pub fn scatter_data(
    table: &DataTable,
    x: &str,
    y: &str,
    color: Option<&str>,
) -> Result<Vec<ScatterPoint>, DataError> {
    let xs = table
        .column(x)?
        .as_numeric()
        .ok_or_else(|| DataError::NonNumericAxis(x.to_string()))?;
    let ys = table
        .column(y)?
        .as_numeric()
        .ok_or_else(|| DataError::NonNumericAxis(y.to_string()))?;
    let color = color.map(|c| table.column(c)).transpose()?;
    Ok(table
        .row_ids()
        .iter()
        .enumerate()
        .filter_map(|(pos, &row_id)| {
            Some(ScatterPoint {
                row_id,
                x: xs[pos]?,
                y: ys[pos]?,
                color_value: color.map(|c| c.value(pos)),
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load(s: &str) -> Result<DataTable, DataError> {
        load_csv("t", s.as_bytes(), &LoadOptions::default())
    }

    #[test]
    fn loads_two_numeric_columns() {
        let t = load("x,y\n1,2\n3,4").unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.row_ids(), &[0, 1]);
        assert!(t.columns().iter().all(|c| c.kind() == ColumnKind::Numeric));
        assert_eq!(t.column("y").unwrap().as_numeric().unwrap(), &[Some(2.0), Some(4.0)]);
    }

    #[test]
    fn non_numeric_forces_categorical() {
        let t = load("g\nA\nB\nA\n").unwrap();
        let g = t.column("g").unwrap();
        assert_eq!(g.kind(), ColumnKind::Categorical);
        assert_eq!(g.labels().into_iter().collect::<Vec<_>>(), vec!["A", "B"]);
    }

    #[test]
    fn load_errors() {
        assert_eq!(load("x,y\n"), Err(DataError::EmptyFile));
        assert_eq!(load(""), Err(DataError::EmptyFile));
        assert_eq!(
            load("x,y\n1,2\n3\n"),
            Err(DataError::RaggedRow { row: 1, expected: 2, found: 1 })
        );
        assert_eq!(load("x,x\n1,2\n"), Err(DataError::DuplicateColumnName("x".into())));
    }

    #[test]
    fn missing_tokens_and_quoting() {
        let t = load("a,b,c\n1,NA,\"x, y\"\n,2,z\n").unwrap();
        assert_eq!(t.column("a").unwrap().missing_mask(), vec![false, true]);
        assert_eq!(t.column("b").unwrap().as_numeric().unwrap(), &[None, Some(2.0)]);
        assert_eq!(t.column("c").unwrap().value(0), Value::Label("x, y".into()));
    }

    #[test]
    fn semicolon_delimiter_without_header() {
        let opts = LoadOptions { delimiter: b';', has_header: false, ..Default::default() };
        let t = load_csv("t", "1;2\n3;4\n".as_bytes(), &opts).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.columns()[1].name(), "column_2");
    }

    #[test]
    fn infer_kinds() {
        assert_eq!(infer_column_kind(&["1.5", "2", "-3e1"], "NA"), Ok(ColumnKind::Numeric));
        assert_eq!(infer_column_kind(&["1", "B", "2"], "NA"), Ok(ColumnKind::Categorical));
        assert_eq!(infer_column_kind(&["", "", ""], "NA"), Err(DataError::AllMissing));
        assert_eq!(infer_column_kind(&["1", "inf"], "NA"), Ok(ColumnKind::Categorical));
        assert_eq!(infer_column_kind(&["1", "NA", ""], "NA"), Ok(ColumnKind::Numeric));
    }

    #[test]
    fn min_max_normalization() {
        let t = load("v\n0\n5\n10\n").unwrap();
        let m = numeric_matrix(&t, &["v"], Normalization::MinMax, MissingPolicy::DropRows).unwrap();
        assert_eq!(m.matrix.column(0), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn z_score_uses_sample_std() {
        let t = load("v\n2\n4\n").unwrap();
        let m = numeric_matrix(&t, &["v"], Normalization::ZScore, MissingPolicy::DropRows).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.matrix.get(0, 0) + h).abs() < 1e-12);
        assert!((m.matrix.get(1, 0) - h).abs() < 1e-12);
    }

    #[test]
    fn drop_rows_reports_dropped_ids() {
        let t = load("a,b,c\n1,2,3\n4,,6\n7,8,9\n").unwrap();
        let m = numeric_matrix(&t, &["a", "b", "c"], Normalization::None, MissingPolicy::DropRows).unwrap();
        assert_eq!(m.matrix.nrows(), 2);
        assert_eq!(m.row_ids, vec![0, 2]);
        assert_eq!(m.dropped_row_ids, vec![1]);
        let err = numeric_matrix(&t, &["b"], Normalization::None, MissingPolicy::Error).unwrap_err();
        assert_eq!(err, DataError::MissingValue { column: "b".into(), row_id: 1 });
    }

    #[test]
    fn numeric_matrix_errors() {
        let t = load("a,g\n1,A\n").unwrap();
        assert_eq!(
            numeric_matrix(&t, &["zz"], Normalization::None, MissingPolicy::DropRows),
            Err(DataError::UnknownColumn("zz".into()))
        );
        assert_eq!(
            numeric_matrix(&t, &["g"], Normalization::None, MissingPolicy::DropRows),
            Err(DataError::NonNumericColumn("g".into()))
        );
        let t = load("a,b\n,1\n2,\n").unwrap();
        assert_eq!(
            numeric_matrix(&t, &["a", "b"], Normalization::None, MissingPolicy::DropRows),
            Err(DataError::NoRowsRemaining)
        );
    }

    #[test]
    fn scatter_points() {
        let t = load("x,y,g\n1,2,A\n3,,B\n5,6,\n").unwrap();
        let pts = scatter_data(&t, "x", "y", Some("g")).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].color_value, Some(Value::Label("A".into())));
        assert_eq!(pts[1].color_value, Some(Value::Missing));
        let diag = scatter_data(&t, "x", "x", None).unwrap();
        assert!(diag.iter().all(|p| p.x == p.y));
        assert_eq!(diag.len(), 3);
        assert_eq!(scatter_data(&t, "g", "x", None), Err(DataError::NonNumericAxis("g".into())));
        assert_eq!(scatter_data(&t, "x", "q", None), Err(DataError::UnknownColumn("q".into())));
    }

    #[test]
    fn subset_keeps_original_ids() {
        let t = load("x\n10\n20\n30\n").unwrap();
        let s = t.subset(&[2, 0]).unwrap();
        assert_eq!(s.row_ids(), &[2, 0]);
        assert_eq!(s.column("x").unwrap().as_numeric().unwrap(), &[Some(30.0), Some(10.0)]);
        assert_eq!(t.subset(&[7]), Err(DataError::UnknownRowId(7)));
    }

    fn cell() -> impl Strategy<Value = String> {
        prop_oneof![
            (-1e6f64..1e6).prop_map(|x| x.to_string()),
            Just(String::new()),
            "[A-Za-z][A-Za-z ,\"]{0,6}[A-Za-z]".prop_map(|s| s),
        ]
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(cell(), 3), 1..20)) {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["a", "b", "c"]).unwrap();
            for r in &rows { w.write_record(r).unwrap(); }
            let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
            let t = load(&text).unwrap();
            let again = load(&t.to_csv().unwrap()).unwrap();
            prop_assert_eq!(t, again);
        }

        #[test]
        fn inference_is_order_independent(
            vals in prop::collection::vec(cell(), 1..30),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = vals.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(infer_column_kind(&vals, "NA"), infer_column_kind(&shuffled, "NA"));
        }

        #[test]
        fn no_normalization_is_bit_identical(xs in prop::collection::vec(-1e9f64..1e9, 1..40)) {
            let text = std::iter::once("v".to_string()).chain(xs.iter().map(|x| x.to_string())).collect::<Vec<_>>().join("\n");
            let t = load(&text).unwrap();
            let m = numeric_matrix(&t, &["v"], Normalization::None, MissingPolicy::DropRows).unwrap();
            for (a, b) in m.matrix.column(0).iter().zip(&xs) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn min_max_is_idempotent(xs in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            let col = |v: &[f64]| Column::numeric("v", v.iter().copied().map(Some).collect());
            let t = DataTable::from_columns("t", vec![col(&xs)], (0..xs.len() as u64).collect()).unwrap();
            let once = numeric_matrix(&t, &["v"], Normalization::MinMax, MissingPolicy::DropRows).unwrap().matrix.column(0);
            let t2 = DataTable::from_columns("t", vec![col(&once)], (0..xs.len() as u64).collect()).unwrap();
            let twice = numeric_matrix(&t2, &["v"], Normalization::MinMax, MissingPolicy::DropRows).unwrap().matrix.column(0);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(a));
            }
        }

        #[test]
        fn z_score_moments(xs in prop::collection::vec(-1e3f64..1e3, 3..40)) {
            prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-3));
            let t = DataTable::from_columns("t", vec![Column::numeric("v", xs.iter().copied().map(Some).collect())], (0..xs.len() as u64).collect()).unwrap();
            let z = numeric_matrix(&t, &["v"], Normalization::ZScore, MissingPolicy::DropRows).unwrap().matrix.column(0);
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }
}
