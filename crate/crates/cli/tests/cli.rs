use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vflsim(args: &[&str], cwd: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vflsim"));
    cmd.args(args)
        .current_dir(cwd)
        .env_remove("VFLSIM_OUT_ROOT");
    cmd.output().unwrap()
}

fn minimal_config() -> &'static str {
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
    "#
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn run_writes_result_files() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("exp.toml");
    fs::write(&config, minimal_config()).unwrap();

    let out = vflsim(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "results",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = tmp.path().join("results");
    assert!(dir.join("metrics.csv").exists());
    assert!(dir.join("ledger_seed11.csv").exists());
    assert!(dir.join("config.resolved.toml").exists());
    let text = stdout(&out);
    assert!(text.contains("seed 11: final test AUC"), "{text}");
    assert!(text.contains("results in"), "{text}");
}

#[test]
fn malformed_toml_fails_with_a_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("broken.toml");
    fs::write(&config, "[dataset\nsource = \"synthetic\"\n").unwrap();

    let out = vflsim(&["run", "--config", config.to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("error:"), "{err}");
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn stacked_channel_blocks_need_the_explicit_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("stacked.toml");
    let text = format!(
        "{}\n[channel]\nkind = \"dp\"\n[channel.dp]\nepsilon = 1.0\n[channel.quantize]\nn_buckets = 4\n",
        minimal_config()
    );
    fs::write(&config, text).unwrap();

    let out = vflsim(&["run", "--config", config.to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("dp_then_quantize"),
        "{}",
        stderr(&out)
    );
    assert!(
        !tmp.path().join("results").exists(),
        "nothing should be written"
    );
}

#[test]
fn seed_override_replaces_the_config_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("exp.toml");
    fs::write(&config, minimal_config()).unwrap();

    let out = vflsim(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--seed-override",
            "99,100",
            "--out",
            "override",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = tmp.path().join("override");
    assert!(dir.join("ledger_seed99.csv").exists());
    assert!(dir.join("ledger_seed100.csv").exists());
    let metrics = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(metrics.contains("\n99,0,"), "{metrics}");
}

#[test]
fn output_root_env_var_names_the_default_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("study.toml");
    fs::write(&config, minimal_config()).unwrap();
    let root = tmp.path().join("all-results");

    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vflsim"));
    let out = cmd
        .args(["run", "--config", config.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("VFLSIM_OUT_ROOT", &root)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(root.join("study").join("metrics.csv").exists());
}

#[test]
fn without_overrides_results_land_under_the_working_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("study.toml");
    fs::write(&config, minimal_config()).unwrap();

    let out = vflsim(&["run", "--config", config.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(tmp
        .path()
        .join("results")
        .join("study")
        .join("metrics.csv")
        .exists());
}

#[test]
fn sweep_runs_every_value_and_summarizes() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("exp.toml");
    fs::write(&config, minimal_config()).unwrap();

    let out = vflsim(
        &[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--axis",
            "scheme.cut_layer",
            "--values",
            "1,3",
            "--out",
            "sweep",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let root = tmp.path().join("sweep");
    assert!(root.join("scheme.cut_layer=1").join("metrics.csv").exists());
    assert!(root.join("scheme.cut_layer=3").join("metrics.csv").exists());
    let summary = fs::read_to_string(root.join("summary.csv")).unwrap();
    assert!(
        summary.starts_with("# schema: vflsim.summary.v1\n"),
        "{summary}"
    );
    assert!(stdout(&out).contains("scheme.cut_layer=1: final test AUC"));
}

#[test]
fn sweep_without_values_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("exp.toml");
    fs::write(&config, minimal_config()).unwrap();

    let out = vflsim(
        &[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--axis",
            "scheme.cut_layer",
        ],
        tmp.path(),
    );
    assert!(!out.status.success());

    let out = vflsim(
        &[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--axis",
            "model.depth",
            "--values",
            "1",
        ],
        tmp.path(),
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("unknown sweep axis"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn report_aggregates_a_finished_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("exp.toml");
    fs::write(&config, minimal_config()).unwrap();
    let run = vflsim(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--seed-override",
            "1,2,3",
            "--out",
            "done",
        ],
        tmp.path(),
    );
    assert!(run.status.success(), "{}", stderr(&run));

    let out = vflsim(&["report", "done", "--table"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(tmp.path().join("done").join("report.csv").exists());
    let text = stdout(&out);
    assert!(text.contains("epoch  seeds"), "{text}");

    let missing = vflsim(&["report", "nowhere"], tmp.path());
    assert!(!missing.status.success());
}

#[test]
fn generated_csv_feeds_a_file_backed_run() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = vflsim(
        &[
            "gen-data",
            "--kind",
            "adult_like",
            "--n",
            "60",
            "--seed",
            "4",
            "--out",
            "data/adult.csv",
        ],
        tmp.path(),
    );
    assert!(gen.status.success(), "{}", stderr(&gen));
    assert!(stdout(&gen).contains("wrote 60 rows"), "{}", stdout(&gen));

    let config = tmp.path().join("csv.toml");
    fs::write(
        &config,
        r#"
            [dataset]
            source = "csv"
            path = "data/adult.csv"
            schema = "adult_like"
            split_seed = 7

            [model]
            cut_layer = 1

            [train]
            epochs = 1
            batch_size = 16
            seeds = [5]
        "#,
    )
    .unwrap();
    let out = vflsim(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "fromcsv",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(tmp.path().join("fromcsv").join("metrics.csv").exists());

    let bad = vflsim(
        &[
            "gen-data",
            "--kind",
            "unknown_thing",
            "--n",
            "10",
            "--seed",
            "1",
            "--out",
            "x.csv",
        ],
        tmp.path(),
    );
    assert!(!bad.status.success());
}
