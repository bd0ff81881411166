//! Feature encoding: z-scored continuous columns, one-hot categoricals.

use std::collections::BTreeSet;

use crate::data::ingest::{CellValue, RawTable};
use crate::data::schema::{AttributeKind, DatasetSchema};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Per-attribute statistics fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnStats {
    /// Population mean and standard deviation (1/n variance).
    Continuous { mean: f64, sd: f64 },
    /// Distinct non-empty training values, sorted; encoding appends an
    /// unknown column after these.
    Categorical { vocab: Vec<String> },
}

/// Statistics for every attribute, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct FitStatistics {
    pub columns: Vec<ColumnStats>,
}

/// Encoded column range of one attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpan {
    pub attribute: String,
    pub start: usize,
    pub len: usize,
}

/// Fully encoded dataset slice ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub ids: Vec<String>,
    pub x: Matrix<T>,
    pub y: Vec<T>,
    /// One span per schema attribute, contiguous and in schema order.
    pub column_map: Vec<ColumnSpan>,
}

/// [`preprocess`] output: the matrix, the statistics that encoded it, and
/// any zero-variance warnings.
#[derive(Debug, Clone)]
pub struct Preprocessed<T> {
    pub features: FeatureMatrix<T>,
    pub stats: FitStatistics,
    pub warnings: Vec<String>,
}

/// Computes encoding statistics from a (training) table.
pub fn fit_statistics(table: &RawTable, schema: &DatasetSchema) -> Result<FitStatistics> {
    if table.n_rows() == 0 {
        return Err(Error::EmptyInput("fit over an empty table".into()));
    }
    check_shape(table, schema)?;
    let n = table.n_rows() as f64;
    let columns = schema
        .attributes
        .iter()
        .enumerate()
        .map(|(a, attr)| match attr.kind {
            AttributeKind::Continuous => {
                let mut sum = 0.0;
                for row in &table.rows {
                    sum += continuous(&row[a]);
                }
                let mean = sum / n;
                let mut ss = 0.0;
                for row in &table.rows {
                    let d = continuous(&row[a]) - mean;
                    ss += d * d;
                }
                ColumnStats::Continuous {
                    mean,
                    sd: (ss / n).sqrt(),
                }
            }
            AttributeKind::Categorical => {
                let vocab: BTreeSet<&str> = table
                    .rows
                    .iter()
                    .map(|row| categorical(&row[a]))
                    .filter(|v| !v.is_empty())
                    .collect();
                ColumnStats::Categorical {
                    vocab: vocab.into_iter().map(str::to_owned).collect(),
                }
            }
        })
        .collect();
    Ok(FitStatistics { columns })
}

/// Encodes a table. When `stats` is absent they are fitted from this table
/// (training use); test tables must pass the training statistics.
pub fn preprocess<T: Scalar>(
    table: &RawTable,
    schema: &DatasetSchema,
    stats: Option<&FitStatistics>,
) -> Result<Preprocessed<T>> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => fit_statistics(table, schema)?,
    };
    if stats.columns.len() != schema.attributes.len() {
        return Err(Error::Schema(format!(
            "{} column statistics against {} attributes",
            stats.columns.len(),
            schema.attributes.len()
        )));
    }
    check_shape(table, schema)?;

    let mut column_map = Vec::with_capacity(schema.attributes.len());
    let mut width = 0;
    for (attr, col) in schema.attributes.iter().zip(&stats.columns) {
        let len = match (attr.kind, col) {
            (AttributeKind::Continuous, ColumnStats::Continuous { .. }) => 1,
            (AttributeKind::Categorical, ColumnStats::Categorical { vocab }) => vocab.len() + 1,
            _ => {
                return Err(Error::Schema(format!(
                    "statistics kind mismatch for attribute {:?}",
                    attr.name
                )))
            }
        };
        column_map.push(ColumnSpan {
            attribute: attr.name.clone(),
            start: width,
            len,
        });
        width += len;
    }

    let mut warnings = Vec::new();
    for (attr, col) in schema.attributes.iter().zip(&stats.columns) {
        if let ColumnStats::Continuous { sd, .. } = col {
            if *sd == 0.0 {
                warnings.push(format!(
                    "attribute {:?} has zero variance; encoded as constant 0",
                    attr.name
                ));
            }
        }
    }

    let n = table.n_rows();
    let mut x = Matrix::zeros(n, width);
    for (r, row) in table.rows.iter().enumerate() {
        for (a, col) in stats.columns.iter().enumerate() {
            let span = &column_map[a];
            match col {
                ColumnStats::Continuous { mean, sd } => {
                    let z = if *sd == 0.0 {
                        0.0
                    } else {
                        (continuous(&row[a]) - mean) / sd
                    };
                    x.set(r, span.start, T::from(z).unwrap());
                }
                ColumnStats::Categorical { vocab } => {
                    let value = categorical(&row[a]);
                    let offset = if value.is_empty() {
                        vocab.len()
                    } else {
                        vocab
                            .binary_search_by(|v| v.as_str().cmp(value))
                            .unwrap_or(vocab.len())
                    };
                    x.set(r, span.start + offset, T::one());
                }
            }
        }
    }

    Ok(Preprocessed {
        features: FeatureMatrix {
            ids: table.ids.clone(),
            x,
            y: table.labels.iter().map(|&l| T::from(l).unwrap()).collect(),
            column_map,
        },
        stats,
        warnings,
    })
}

fn check_shape(table: &RawTable, schema: &DatasetSchema) -> Result<()> {
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != schema.attributes.len() {
            return Err(Error::Schema(format!(
                "row {r} has {} cells, schema has {} attributes",
                row.len(),
                schema.attributes.len()
            )));
        }
        for (cell, attr) in row.iter().zip(&schema.attributes) {
            let ok = matches!(
                (cell, attr.kind),
                (CellValue::Continuous(_), AttributeKind::Continuous)
                    | (CellValue::Categorical(_), AttributeKind::Categorical)
            );
            if !ok {
                return Err(Error::Schema(format!(
                    "row {r}: cell kind does not match attribute {:?}",
                    attr.name
                )));
            }
        }
    }
    Ok(())
}

fn continuous(cell: &CellValue) -> f64 {
    match cell {
        CellValue::Continuous(v) => *v,
        CellValue::Categorical(_) => unreachable!("checked by check_shape"),
    }
}

fn categorical(cell: &CellValue) -> &str {
    match cell {
        CellValue::Categorical(v) => v,
        CellValue::Continuous(_) => unreachable!("checked by check_shape"),
    }
}
