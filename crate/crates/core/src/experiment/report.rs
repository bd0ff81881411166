//! Cross-seed aggregation of a run directory's metrics file.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

use super::runner::{mean_std, METRICS_FILE};

pub const REPORT_FILE: &str = "report.csv";

/// Mean and spread across seeds at one epoch. Standard deviations are
/// population ones, so a single seed reports exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochAggregate {
    pub epoch: u32,
    pub n_seeds: usize,
    pub loss_mean: f64,
    pub loss_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
}

#[derive(Debug, Deserialize)]
struct MetricsRow {
    #[allow(dead_code)]
    seed: u64,
    epoch: u32,
    loss: f64,
    test_auc: Option<f64>,
}

/// Reads `metrics.csv` from a run directory and aggregates it per epoch.
pub fn aggregate(run_dir: &Path) -> Result<Vec<EpochAggregate>> {
    let path = run_dir.join(METRICS_FILE);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&path)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;

    let mut by_epoch: std::collections::BTreeMap<u32, (Vec<f64>, Vec<f64>)> = Default::default();
    for record in reader.deserialize() {
        let row: MetricsRow =
            record.map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        let auc = row.test_auc.ok_or_else(|| {
            Error::Schema(format!(
                "{}: epoch {} has no test_auc to aggregate",
                path.display(),
                row.epoch
            ))
        })?;
        let slot = by_epoch.entry(row.epoch).or_default();
        slot.0.push(row.loss);
        slot.1.push(auc);
    }
    if by_epoch.is_empty() {
        return Err(Error::Schema(format!("{}: no data rows", path.display())));
    }

    let n_seeds = by_epoch.values().next().map_or(0, |(l, _)| l.len());
    let mut out = Vec::with_capacity(by_epoch.len());
    for (epoch, (losses, aucs)) in by_epoch {
        if losses.len() != n_seeds {
            return Err(Error::Schema(format!(
                "{}: epoch {epoch} has {} rows, others have {n_seeds}",
                path.display(),
                losses.len()
            )));
        }
        let (loss_mean, loss_std) = mean_std(&losses);
        let (auc_mean, auc_std) = mean_std(&aucs);
        out.push(EpochAggregate {
            epoch,
            n_seeds,
            loss_mean,
            loss_std,
            auc_mean,
            auc_std,
        });
    }
    Ok(out)
}

/// Aggregates a run directory and writes `report.csv` next to its input.
pub fn write_report(run_dir: &Path) -> Result<Vec<EpochAggregate>> {
    let aggregates = aggregate(run_dir)?;
    let mut out = String::from(
        "# schema: vflsim.report.v1\nepoch,n_seeds,loss_mean,loss_std,auc_mean,auc_std\n",
    );
    for a in &aggregates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            a.epoch, a.n_seeds, a.loss_mean, a.loss_std, a.auc_mean, a.auc_std
        );
    }
    let path = run_dir.join(REPORT_FILE);
    let tmp = run_dir.join(format!("{REPORT_FILE}.tmp"));
    std::fs::write(&tmp, out)?;
    std::fs::rename(&tmp, path)?;
    Ok(aggregates)
}

/// Plain-text table of the aggregates, for terminal display.
pub fn render_table(aggregates: &[EpochAggregate]) -> String {
    let mut out = String::from("epoch  seeds  loss_mean   loss_std    auc_mean    auc_std\n");
    for a in aggregates {
        let _ = writeln!(
            out,
            "{:>5}  {:>5}  {:<10.6}  {:<10.6}  {:<10.6}  {:<10.6}",
            a.epoch, a.n_seeds, a.loss_mean, a.loss_std, a.auc_mean, a.auc_std
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::ExperimentConfig;
    use crate::experiment::runner::run_to_dir;
    use std::fs;

    fn config_with_seeds(seeds: &[u64]) -> ExperimentConfig {
        let mut config = ExperimentConfig::from_toml(
            r#"
                [dataset]
                source = "synthetic"
                kind = "adult_like"
                n = 60
                seed = 4

                [model]
                cut_layer = 2

                [train]
                epochs = 2
                batch_size = 16
                seeds = [11]
            "#,
        )
        .unwrap();
        config.train.seeds = seeds.to_vec();
        config
    }

    #[test]
    fn aggregation_matches_independent_recomputation() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let study = run_to_dir(&config_with_seeds(&[1, 2, 3]), dir).unwrap();
        let aggregates = aggregate(dir).unwrap();
        assert_eq!(aggregates.len(), 2);

        for a in &aggregates {
            assert_eq!(a.n_seeds, 3);
            let losses: Vec<f64> = study
                .runs
                .iter()
                .map(|r| r.reports[a.epoch as usize].train_loss)
                .collect();
            let aucs: Vec<f64> = study
                .runs
                .iter()
                .map(|r| r.reports[a.epoch as usize].test_auc.unwrap())
                .collect();
            let expect_loss = losses.iter().sum::<f64>() / 3.0;
            let expect_auc = aucs.iter().sum::<f64>() / 3.0;
            assert!((a.loss_mean - expect_loss).abs() < 1e-12);
            assert!((a.auc_mean - expect_auc).abs() < 1e-12);
            let var = aucs.iter().map(|x| (x - expect_auc).powi(2)).sum::<f64>() / 3.0;
            assert!((a.auc_std - var.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_seed_reports_zero_spread() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        run_to_dir(&config_with_seeds(&[5]), dir).unwrap();
        let aggregates = write_report(dir).unwrap();
        for a in &aggregates {
            assert_eq!(a.n_seeds, 1);
            assert_eq!(a.loss_std, 0.0);
            assert_eq!(a.auc_std, 0.0);
        }
        let text = fs::read_to_string(dir.join(REPORT_FILE)).unwrap();
        assert!(text.starts_with("# schema: vflsim.report.v1\n"));
        assert_eq!(text.lines().count(), 2 + 2, "comment, header, two epochs");
    }

    #[test]
    fn missing_or_corrupt_metrics_are_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        assert!(matches!(aggregate(dir), Err(Error::Schema(_))));

        fs::write(
            dir.join(METRICS_FILE),
            "# schema: vflsim.metrics.v1\nseed,epoch,loss,test_auc\n1,0,not_a_number,0.5\n",
        )
        .unwrap();
        assert!(matches!(aggregate(dir), Err(Error::Schema(_))));

        fs::write(
            dir.join(METRICS_FILE),
            "# schema: vflsim.metrics.v1\nseed,epoch,loss,test_auc\n",
        )
        .unwrap();
        assert!(matches!(aggregate(dir), Err(Error::Schema(_))));

        // Ragged seed counts across epochs mean a truncated file.
        fs::write(
            dir.join(METRICS_FILE),
            "# schema: vflsim.metrics.v1\nseed,epoch,loss,test_auc\n1,0,0.7,0.5\n2,0,0.7,0.5\n1,1,0.6,0.6\n",
        )
        .unwrap();
        assert!(matches!(aggregate(dir), Err(Error::Schema(_))));
    }

    #[test]
    fn table_rendering_lists_every_epoch() {
        let rows = vec![
            EpochAggregate {
                epoch: 0,
                n_seeds: 3,
                loss_mean: 0.69,
                loss_std: 0.01,
                auc_mean: 0.52,
                auc_std: 0.02,
            },
            EpochAggregate {
                epoch: 1,
                n_seeds: 3,
                loss_mean: 0.62,
                loss_std: 0.02,
                auc_mean: 0.61,
                auc_std: 0.01,
            },
        ];
        let table = render_table(&rows);
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().nth(1).unwrap().starts_with("    0      3"));
    }
}
