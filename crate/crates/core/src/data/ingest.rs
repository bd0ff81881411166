//! CSV ingestion with row-level validation.

use std::path::Path;

use crate::data::schema::{AttributeKind, DatasetSchema};
use crate::error::{Error, Result};

/// One typed attribute cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Continuous(f64),
    /// Raw category string; empty means missing and encodes as unknown.
    Categorical(String),
}

/// A dropped input row and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    /// Zero-based data-row index, header excluded.
    pub row: usize,
    pub reason: String,
}

/// Validated rows in file order, plus the rejects.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub ids: Vec<String>,
    /// Binary labels, one per accepted row.
    pub labels: Vec<u8>,
    /// One cell per schema attribute, in schema order.
    pub rows: Vec<Vec<CellValue>>,
    pub rejected: Vec<RowIssue>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    /// New table holding the given rows in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<RawTable> {
        for &i in indices {
            if i >= self.n_rows() {
                return Err(Error::Partition(format!(
                    "row {i} out of {} selected",
                    self.n_rows()
                )));
            }
        }
        Ok(RawTable {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            rejected: Vec::new(),
        })
    }
}

/// Reads a headered CSV, typing cells against the schema. Rows with an
/// unparsable or missing continuous cell, or a label outside {0, 1}, are
/// reported in `rejected` rather than failing the load. Missing categorical
/// cells are kept as empty strings.
pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column {name:?} missing from header")))
    };
    let id_col = position(&schema.id_column)?;
    let label_col = position(&schema.label_column)?;
    let attr_cols: Vec<(usize, AttributeKind)> = schema
        .attributes
        .iter()
        .map(|a| Ok((position(&a.name)?, a.kind)))
        .collect::<Result<_>>()?;

    let mut table = RawTable {
        ids: Vec::new(),
        labels: Vec::new(),
        rows: Vec::new(),
        rejected: Vec::new(),
    };
    for (row, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                table.rejected.push(RowIssue {
                    row,
                    reason: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        match parse_row(&record, id_col, label_col, &attr_cols, schema) {
            Ok((id, label, cells)) => {
                table.ids.push(id);
                table.labels.push(label);
                table.rows.push(cells);
            }
            Err(reason) => table.rejected.push(RowIssue { row, reason }),
        }
    }
    Ok(table)
}

fn parse_row(
    record: &csv::StringRecord,
    id_col: usize,
    label_col: usize,
    attr_cols: &[(usize, AttributeKind)],
    schema: &DatasetSchema,
) -> std::result::Result<(String, u8, Vec<CellValue>), String> {
    let field = |col: usize| record.get(col).unwrap_or("").trim();
    let id = field(id_col).to_owned();
    if id.is_empty() {
        return Err("empty id".into());
    }
    let label = match field(label_col) {
        "0" => 0,
        "1" => 1,
        other => return Err(format!("label {other:?} is not 0 or 1")),
    };
    let mut cells = Vec::with_capacity(attr_cols.len());
    for (&(col, kind), attr) in attr_cols.iter().zip(&schema.attributes) {
        let raw = field(col);
        match kind {
            AttributeKind::Continuous => {
                let value: f64 = raw
                    .parse()
                    .map_err(|_| format!("attribute {:?}: unparsable value {raw:?}", attr.name))?;
                if !value.is_finite() {
                    return Err(format!(
                        "attribute {:?}: non-finite value {raw:?}",
                        attr.name
                    ));
                }
                cells.push(CellValue::Continuous(value));
            }
            AttributeKind::Categorical => cells.push(CellValue::Categorical(raw.to_owned())),
        }
    }
    Ok((id, label, cells))
}
