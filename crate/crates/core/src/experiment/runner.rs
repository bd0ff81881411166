//! Executes configured studies and writes their result files.
//!
//! Every file is written next to its final name and renamed into place,
//! so readers never observe a half-written file. All numeric cells use
//! the shortest round-trip float formatting, which makes reruns of the
//! same configuration byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::protocol::{run_training, EpochReport, Simulation, SimulationConfig};
use crate::split::{CostRow, ParticipantId};

use super::config::{ExperimentConfig, ResolvedPlan, SweepAxis};
use super::pipeline::{prepare, PreparedData};

pub const METRICS_FILE: &str = "metrics.csv";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";
pub const SUMMARY_FILE: &str = "summary.csv";

/// One full training run under a single seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub reports: Vec<EpochReport>,
    /// Cumulative per-participant cost totals at the end of training.
    pub final_ledger: Vec<(ParticipantId, CostRow)>,
}

impl SeedRun {
    pub fn final_auc(&self) -> Option<f64> {
        self.reports.last().and_then(|r| r.test_auc)
    }
}

/// A study's in-memory results: one run per configured seed.
#[derive(Debug, Clone)]
pub struct ExecutedStudy {
    pub runs: Vec<SeedRun>,
    pub warnings: Vec<String>,
}

impl ExecutedStudy {
    /// Final test AUC per seed, in seed order.
    pub fn final_aucs(&self) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| r.final_auc().unwrap_or(f64::NAN))
            .collect()
    }
}

/// Resolves, prepares and trains; no files are touched.
pub fn execute(config: &ExperimentConfig) -> Result<ExecutedStudy> {
    let plan = config.resolve()?;
    let data = prepare(&config.dataset, &plan.salt)?;
    let runs = execute_prepared(&plan, &data)?;
    Ok(ExecutedStudy {
        runs,
        warnings: data.warnings,
    })
}

/// Trains one simulation per seed on already-prepared data.
pub fn execute_prepared(plan: &ResolvedPlan, data: &PreparedData) -> Result<Vec<SeedRun>> {
    let mut runs = Vec::with_capacity(plan.seeds.len());
    for &seed in &plan.seeds {
        let sim_config = SimulationConfig {
            scheme: plan.scheme,
            channel: plan.channel.clone(),
            adam: plan.adam,
            batch_size: plan.batch_size,
            seed,
            noisy_inference: plan.noisy_inference,
        };
        let mut sim = Simulation::new(
            sim_config,
            data.train_views.clone(),
            data.train_labels.clone(),
        )?;
        let reports = run_training(&mut sim, plan.epochs, &data.test_views, &data.test_labels)?;
        let final_ledger = sim.ledger().rows().collect();
        runs.push(SeedRun {
            seed,
            reports,
            final_ledger,
        });
    }
    Ok(runs)
}

/// Executes the study and writes `metrics.csv`, one ledger CSV per seed,
/// and a resolved copy of the configuration into `dir`.
pub fn run_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<ExecutedStudy> {
    let study = execute(config)?;
    write_run(config, &study, dir)?;
    Ok(study)
}

/// Writes a study's result files. The resolved configuration has every
/// default materialized, so it re-runs bit-identically on its own.
pub fn write_run(config: &ExperimentConfig, study: &ExecutedStudy, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomically(&dir.join(RESOLVED_CONFIG_FILE), &config.to_toml()?)?;
    write_atomically(&dir.join(METRICS_FILE), &render_metrics(study))?;
    for run in &study.runs {
        write_atomically(
            &dir.join(format!("ledger_seed{}.csv", run.seed)),
            &render_ledger(run),
        )?;
    }
    Ok(())
}

/// Runs one study per swept value into `<out_root>/<axis>=<value>/` and
/// writes a combined summary. All values share the base seed list.
pub fn sweep_to_dir(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
    out_root: &Path,
) -> Result<Vec<(String, ExecutedStudy)>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut points = Vec::with_capacity(values.len());
    for value in values {
        let mut config = base.clone();
        let label = axis.apply(&mut config, value)?;
        config.resolve()?;
        if points.iter().any(|(existing, _)| *existing == label) {
            return Err(Error::Config(format!(
                "sweep value {label:?} appears more than once"
            )));
        }
        points.push((label, config));
    }

    fs::create_dir_all(out_root)?;
    let mut results = Vec::with_capacity(points.len());
    for (label, config) in points {
        let dir = out_root.join(format!("{}={label}", axis.name()));
        let study = run_to_dir(&config, &dir)?;
        results.push((label, study));
    }
    write_atomically(
        &out_root.join(SUMMARY_FILE),
        &render_summary(axis, &results),
    )?;
    Ok(results)
}

fn render_metrics(study: &ExecutedStudy) -> String {
    let mut out = String::from("# schema: vflsim.metrics.v1\nseed,epoch,loss,test_auc\n");
    for run in &study.runs {
        for report in &run.reports {
            let _ = write!(out, "{},{},{},", run.seed, report.epoch, report.train_loss);
            match report.test_auc {
                Some(auc) => {
                    let _ = writeln!(out, "{auc}");
                }
                None => out.push('\n'),
            }
        }
    }
    out
}

fn render_ledger(run: &SeedRun) -> String {
    let mut out = String::from(
        "# schema: vflsim.ledger.v1\nparticipant,epoch,flops_fwd,flops_bwd,bytes_sent,bytes_received\n",
    );
    for report in &run.reports {
        for (id, row) in &report.ledger_delta {
            let _ = writeln!(
                out,
                "{id},{},{},{},{},{}",
                report.epoch,
                row.flops_forward,
                row.flops_backward,
                row.bytes_sent,
                row.bytes_received
            );
        }
    }
    out
}

fn render_summary(axis: SweepAxis, results: &[(String, ExecutedStudy)]) -> String {
    let mut out = String::from(
        "# schema: vflsim.summary.v1\naxis,value,participant,final_auc_mean,final_auc_std,\
         flops_fwd_mean,flops_bwd_mean,bytes_sent_mean,bytes_received_mean\n",
    );
    for (label, study) in results {
        let aucs = study.final_aucs();
        let (auc_mean, auc_std) = mean_std(&aucs);
        let participants: Vec<ParticipantId> = study
            .runs
            .first()
            .map(|r| r.final_ledger.iter().map(|(id, _)| *id).collect())
            .unwrap_or_default();
        for id in participants {
            let mut fwd = Vec::new();
            let mut bwd = Vec::new();
            let mut sent = Vec::new();
            let mut received = Vec::new();
            for run in &study.runs {
                let row = run
                    .final_ledger
                    .iter()
                    .find(|(other, _)| *other == id)
                    .map(|(_, row)| *row)
                    .unwrap_or_default();
                fwd.push(row.flops_forward as f64);
                bwd.push(row.flops_backward as f64);
                sent.push(row.bytes_sent as f64);
                received.push(row.bytes_received as f64);
            }
            let _ = writeln!(
                out,
                "{},{label},{id},{auc_mean},{auc_std},{},{},{},{}",
                axis.name(),
                mean_std(&fwd).0,
                mean_std(&bwd).0,
                mean_std(&sent).0,
                mean_std(&received).0,
            );
        }
    }
    out
}

/// Mean and population standard deviation; a single value has std 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} has no file name", path.display())))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{DpSection, ExperimentConfig};

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig::from_toml(
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
        .unwrap()
    }

    fn data_lines(path: &Path) -> Vec<String> {
        let text = fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# schema: vflsim."));
        lines.next().unwrap();
        lines.map(str::to_owned).collect()
    }

    #[test]
    fn minimal_run_writes_expected_row_counts() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config();
        let study = run_to_dir(&config, dir.path()).unwrap();
        assert_eq!(study.runs.len(), 1);
        assert_eq!(study.runs[0].reports.len(), 2);

        let metrics = data_lines(&dir.path().join(METRICS_FILE));
        assert_eq!(metrics.len(), 2);
        assert!(metrics[0].starts_with("11,0,"));
        assert!(metrics[1].starts_with("11,1,"));

        let ledger = data_lines(&dir.path().join("ledger_seed11.csv"));
        assert_eq!(ledger.len(), 2 * 4, "two epochs, three guests plus host");
        assert!(ledger[0].starts_with("guest0,0,"));
        assert!(ledger[3].starts_with("host,0,"));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let config = tiny_config();
        run_to_dir(&config, dir_a.path()).unwrap();
        run_to_dir(&config, dir_b.path()).unwrap();
        for name in [METRICS_FILE, "ledger_seed11.csv", RESOLVED_CONFIG_FILE] {
            let a = fs::read(dir_a.path().join(name)).unwrap();
            let b = fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
    }

    #[test]
    fn resolved_config_reloads_to_the_same_study() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config();
        run_to_dir(&config, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(RESOLVED_CONFIG_FILE)).unwrap();
        let reloaded = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(reloaded, config);
    }

    #[test]
    fn no_temporary_files_survive_a_run() {
        let dir = tempfile::tempdir().unwrap();
        run_to_dir(&tiny_config(), dir.path()).unwrap();
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|name| name.ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty(), "{leftovers:?}");
    }

    #[test]
    fn sweep_writes_one_directory_per_value_and_a_summary() {
        let root = tempfile::tempdir().unwrap();
        let mut config = tiny_config();
        config.train.seeds = vec![11, 12];
        let axis = SweepAxis::parse("scheme.cut_layer").unwrap();
        let values = vec!["1".to_string(), "3".to_string()];
        let results = sweep_to_dir(&config, axis, &values, root.path()).unwrap();
        assert_eq!(results.len(), 2);
        assert!(root
            .path()
            .join("scheme.cut_layer=1")
            .join(METRICS_FILE)
            .exists());
        assert!(root
            .path()
            .join("scheme.cut_layer=3")
            .join(METRICS_FILE)
            .exists());

        let summary = data_lines(&root.path().join(SUMMARY_FILE));
        assert_eq!(summary.len(), 2 * 4, "two values, four participants");
        assert!(summary[0].starts_with("scheme.cut_layer,1,guest0,"));

        // Costs in the summary equal the in-memory final ledgers.
        let (_, study) = &results[0];
        let (_, host_row) = study.runs[0]
            .final_ledger
            .iter()
            .find(|(id, _)| *id == ParticipantId::Host)
            .unwrap();
        let host_line = &summary[3];
        assert!(
            host_line.contains(&format!(",{},", host_row.flops_forward as f64)),
            "{host_line} missing {}",
            host_row.flops_forward
        );
    }

    #[test]
    fn sweep_rejects_empty_and_duplicate_values() {
        let root = tempfile::tempdir().unwrap();
        let config = tiny_config();
        let axis = SweepAxis::parse("scheme.cut_layer").unwrap();
        assert!(matches!(
            sweep_to_dir(&config, axis, &[], root.path()),
            Err(Error::Config(_))
        ));
        let dupes = vec!["2".to_string(), "2".to_string()];
        assert!(matches!(
            sweep_to_dir(&config, axis, &dupes, root.path()),
            Err(Error::Config(_))
        ));

        // Axis values are validated before anything runs or is written.
        let mut dp_config = tiny_config();
        dp_config.channel.kind = "dp".into();
        dp_config.channel.dp = Some(DpSection {
            epsilon: 1.0,
            delta: 1e-5,
            clip_norm: 1.0,
        });
        let eps_axis = SweepAxis::parse("dp.epsilon").unwrap();
        let bad = vec!["1".to_string(), "-3".to_string()];
        assert!(sweep_to_dir(&dp_config, eps_axis, &bad, root.path()).is_err());
        assert!(!root.path().join("dp.epsilon=1").exists(), "nothing ran");
    }

    #[test]
    fn seed_order_in_metrics_matches_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config();
        config.train.seeds = vec![7, 3];
        run_to_dir(&config, dir.path()).unwrap();
        let metrics = data_lines(&dir.path().join(METRICS_FILE));
        assert!(metrics[0].starts_with("7,0,"));
        assert!(metrics[2].starts_with("3,0,"));
        assert!(dir.path().join("ledger_seed7.csv").exists());
        assert!(dir.path().join("ledger_seed3.csv").exists());
    }
}
