//! Dataset loading lowered to protocol inputs: align, split, encode,
//! partition.

use crate::align::{hash_ids, intersect};
use crate::data::{
    fit_statistics, generate, load_csv, preprocess, vertical_partition, DatasetSchema, RawTable,
    SyntheticKind,
};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::split::GUEST_COUNT;
use crate::tensor::Matrix;

use super::config::DatasetConfig;

/// Everything a [`crate::protocol::Simulation`] needs: per-guest feature
/// views for both halves of the row split, plus the host's labels.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train_views: Vec<Matrix<f64>>,
    pub train_labels: Vec<f64>,
    pub test_views: Vec<Matrix<f64>>,
    pub test_labels: Vec<f64>,
    /// Data issues worth surfacing (rejected rows, zero-variance columns).
    pub warnings: Vec<String>,
}

impl PreparedData {
    pub fn n_train(&self) -> usize {
        self.train_labels.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_labels.len()
    }
}

/// Runs the full input pipeline. Each participant hashes the ID column
/// with the shared salt, the intersection fixes a canonical row order,
/// and only then are rows split 80/20 into train and test. Encoding
/// statistics are fitted on the training rows alone and reused to encode
/// the test rows, so nothing about the test half leaks into the encoding.
pub fn prepare(dataset: &DatasetConfig, salt: &[u8]) -> Result<PreparedData> {
    let (schema, table, split_seed) = match dataset {
        DatasetConfig::Synthetic { kind, n, seed } => {
            let kind = SyntheticKind::parse(kind)?;
            let (schema, table) = generate(kind, *n, *seed);
            (schema, table, derive_seed(*seed, "split", 0))
        }
        DatasetConfig::Csv {
            path,
            schema,
            split_seed,
        } => {
            let schema = DatasetSchema::named(schema)
                .ok_or_else(|| Error::Config(format!("unknown schema {schema:?}")))?;
            let table = load_csv(path, &schema)?;
            (schema, table, *split_seed)
        }
    };

    let mut warnings: Vec<String> = table
        .rejected
        .iter()
        .map(|issue| format!("rejected row {}: {}", issue.row, issue.reason))
        .collect();

    let aligned = align_rows(&table, salt)?;
    let table = table.select_rows(&aligned)?;

    let n = table.n_rows();
    let n_train = n * 8 / 10;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "{n} aligned rows cannot be split 80/20 with both halves non-empty"
        )));
    }
    let order = crate::data::batch_iter(n, n, split_seed, true)?
        .pop()
        .expect("single full-size batch");
    let train_table = table.select_rows(&order[..n_train])?;
    let test_table = table.select_rows(&order[n_train..])?;

    let stats = fit_statistics(&train_table, &schema)?;
    let train = preprocess::<f64>(&train_table, &schema, Some(&stats))?;
    let test = preprocess::<f64>(&test_table, &schema, Some(&stats))?;
    warnings.extend(train.warnings.iter().cloned());

    let train_views = vertical_partition(&train.features, GUEST_COUNT)?;
    let test_views = vertical_partition(&test.features, GUEST_COUNT)?;

    Ok(PreparedData {
        train_views: train_views.into_iter().map(|v| v.x).collect(),
        train_labels: train.features.y,
        test_views: test_views.into_iter().map(|v| v.x).collect(),
        test_labels: test.features.y,
        warnings,
    })
}

/// Simulates private set intersection across the four participants. All
/// of them hold the same ID column here, so the intersection keeps every
/// row; what matters is the canonical order it fixes.
fn align_rows(table: &RawTable, salt: &[u8]) -> Result<Vec<usize>> {
    let mut sets = Vec::with_capacity(GUEST_COUNT + 1);
    for g in 0..GUEST_COUNT {
        sets.push(hash_ids(&format!("guest{g}"), &table.ids, salt)?);
    }
    sets.push(hash_ids("host", &table.ids, salt)?);
    let aligned = intersect(&sets)?;
    Ok(aligned.rows.into_iter().next().expect("at least one set"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::write_csv;

    fn synthetic(n: usize, seed: u64) -> DatasetConfig {
        DatasetConfig::Synthetic {
            kind: "adult_like".into(),
            n,
            seed,
        }
    }

    #[test]
    fn split_is_80_20_and_views_line_up() {
        let data = prepare(&synthetic(100, 3), b"salt").unwrap();
        assert_eq!(data.n_train(), 80);
        assert_eq!(data.n_test(), 20);
        assert_eq!(data.train_views.len(), GUEST_COUNT);
        for views in [&data.train_views, &data.test_views] {
            let rows = views[0].rows();
            assert!(views.iter().all(|v| v.rows() == rows));
        }
        let widths: Vec<usize> = data.train_views.iter().map(Matrix::cols).collect();
        let test_widths: Vec<usize> = data.test_views.iter().map(Matrix::cols).collect();
        assert_eq!(widths, test_widths);
        assert!(data
            .train_labels
            .iter()
            .chain(&data.test_labels)
            .all(|&y| y == 0.0 || y == 1.0));
    }

    #[test]
    fn preparation_is_deterministic() {
        let a = prepare(&synthetic(60, 9), b"salt").unwrap();
        let b = prepare(&synthetic(60, 9), b"salt").unwrap();
        assert_eq!(a.train_views[0].data(), b.train_views[0].data());
        assert_eq!(a.test_views[2].data(), b.test_views[2].data());
        assert_eq!(a.train_labels, b.train_labels);

        let c = prepare(&synthetic(60, 10), b"salt").unwrap();
        assert_ne!(a.train_views[0].data(), c.train_views[0].data());

        // The salt participates in the canonical row order, so a different
        // salt shuffles a different split out of the same data.
        let d = prepare(&synthetic(60, 9), b"other-salt").unwrap();
        assert_ne!(a.train_labels, d.train_labels);
    }

    #[test]
    fn csv_with_matching_split_seed_reproduces_the_synthetic_run() {
        let kind = SyntheticKind::parse("avazu_like").unwrap();
        let (schema, table) = generate(kind, 50, 21);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roundtrip.csv");
        write_csv(&path, &schema, &table).unwrap();

        let from_csv = prepare(
            &DatasetConfig::Csv {
                path: path.clone(),
                schema: "avazu_like".into(),
                split_seed: derive_seed(21, "split", 0),
            },
            b"salt",
        )
        .unwrap();
        let from_gen = prepare(
            &DatasetConfig::Synthetic {
                kind: "avazu_like".into(),
                n: 50,
                seed: 21,
            },
            b"salt",
        )
        .unwrap();

        assert_eq!(from_csv.train_labels, from_gen.train_labels);
        for g in 0..GUEST_COUNT {
            let a = from_csv.train_views[g].data();
            let b = from_gen.train_views[g].data();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn tiny_datasets_cannot_be_split() {
        let err = prepare(&synthetic(2, 0), b"salt");
        assert!(err.is_ok(), "two rows still split 1/1");
        // One row cannot: generate refuses nothing, the split does.
        let err = prepare(
            &DatasetConfig::Synthetic {
                kind: "adult_like".into(),
                n: 1,
                seed: 0,
            },
            b"salt",
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn test_rows_are_encoded_with_training_statistics() {
        // With a fixed schema the encoded width is a schema property, so
        // train and test agree even though their value ranges differ.
        let data = prepare(&synthetic(40, 5), b"salt").unwrap();
        assert_eq!(data.train_views[1].cols(), data.test_views[1].cols());
        // Standardized training columns are mean-centered; test columns
        // need not be. Check the training side to pin the convention.
        let v = &data.train_views[0];
        let mean: f64 = (0..v.rows()).map(|r| v.get(r, 0)).sum::<f64>() / v.rows() as f64;
        assert!(mean.abs() < 1e-9, "training column mean {mean}");
    }
}
