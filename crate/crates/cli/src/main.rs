//! `vflsim`: train split models over vertically partitioned data and emit
//! plot-ready CSVs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vflsim_core::data::{generate, write_csv, SyntheticKind};
use vflsim_core::experiment::{
    render_table, run_to_dir, sweep_to_dir, write_report, ExecutedStudy, ExperimentConfig,
    SweepAxis, REPORT_FILE, SUMMARY_FILE,
};
use vflsim_core::{Error, Result};

/// Environment variable naming the default root for result directories.
const OUT_ROOT_VAR: &str = "VFLSIM_OUT_ROOT";

#[derive(Parser)]
#[command(
    name = "vflsim",
    version,
    about = "Vertical federated learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configured study and write metrics, ledgers and a
    /// resolved config copy.
    Run(RunArgs),
    /// Train the study once per swept value and write a combined summary.
    Sweep(SweepArgs),
    /// Aggregate a run directory's metrics across seeds.
    Report(ReportArgs),
    /// Generate a synthetic dataset CSV.
    GenData(GenDataArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seed list replacing the one in the config.
    #[arg(long, value_delimiter = ',')]
    seed_override: Option<Vec<u64>>,
    /// Output directory. Defaults to the config's `output.dir`, then
    /// $VFLSIM_OUT_ROOT/<config stem>, then ./results/<config stem>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Swept parameter: dp.epsilon, quantize.n_buckets, quantize.approx
    /// or scheme.cut_layer.
    #[arg(long)]
    axis: String,
    /// Comma-separated values for the axis, one run directory per value.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    seed_override: Option<Vec<u64>>,
    /// Root directory for the per-value run directories.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory containing metrics.csv.
    dir: PathBuf,
    /// Also print the aggregate table.
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
struct GenDataArgs {
    /// Generator name: adult_like or avazu_like.
    #[arg(long)]
    kind: String,
    /// Number of rows.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Report(args) => report(args),
        Command::GenData(args) => gen_data(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let config = load_config(&args.config, args.seed_override)?;
    let out = resolve_out_dir(args.out, &config, &args.config);
    let study = run_to_dir(&config, &out)?;
    print_warnings(&study);
    for run in &study.runs {
        match run.final_auc() {
            Some(auc) => println!("seed {}: final test AUC {auc:.4}", run.seed),
            None => println!("seed {}: no test evaluation", run.seed),
        }
    }
    println!("results in {}", out.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let config = load_config(&args.config, args.seed_override)?;
    let axis = SweepAxis::parse(&args.axis)?;
    let out = resolve_out_dir(args.out, &config, &args.config);
    let results = sweep_to_dir(&config, axis, &args.values, &out)?;
    for (label, study) in &results {
        print_warnings(study);
        let aucs = study.final_aucs();
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        println!(
            "{}={label}: final test AUC {mean:.4} (mean of {} seeds)",
            axis.name(),
            aucs.len()
        );
    }
    println!("summary in {}", out.join(SUMMARY_FILE).display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let aggregates = write_report(&args.dir)?;
    if args.table {
        print!("{}", render_table(&aggregates));
    }
    println!("report in {}", args.dir.join(REPORT_FILE).display());
    Ok(())
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let kind = SyntheticKind::parse(&args.kind)?;
    let (schema, table) = generate(kind, args.n, args.seed);
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_csv(&args.out, &schema, &table)?;
    let positives = table.labels.iter().filter(|&&y| y == 1).count();
    println!(
        "wrote {} rows ({positives} positive) to {}",
        table.n_rows(),
        args.out.display()
    );
    Ok(())
}

fn load_config(path: &Path, seed_override: Option<Vec<u64>>) -> Result<ExperimentConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_toml(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(seeds) = seed_override {
        config.train.seeds = seeds;
    }
    config.resolve()?;
    Ok(config)
}

fn resolve_out_dir(
    cli_out: Option<PathBuf>,
    config: &ExperimentConfig,
    config_path: &Path,
) -> PathBuf {
    if let Some(dir) = cli_out {
        return dir;
    }
    if let Some(dir) = &config.output.dir {
        return dir.clone();
    }
    let stem = config_path
        .file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    match std::env::var_os(OUT_ROOT_VAR) {
        Some(root) => PathBuf::from(root).join(stem),
        None => PathBuf::from("results").join(stem),
    }
}

fn print_warnings(study: &ExecutedStudy) {
    for warning in &study.warnings {
        eprintln!("warning: {warning}");
    }
}
