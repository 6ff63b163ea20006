//! End-to-end workflow through the installed binary: generate a network,
//! record a dataset, fit, evaluate, run scenarios, compare baselines.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixtraffic"))
}

fn ok(output: Output) -> String {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("utf8 stdout")
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn the_whole_workflow_runs_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // Network generation: parseable output, stable metadata line.
    let net_path = root.join("net.toml");
    let stdout = ok(bin()
        .args(["gen-net", "--rows", "3", "--cols", "3"])
        .arg("--out")
        .arg(&net_path)
        .output()
        .unwrap());
    assert!(stdout.contains("segments"));
    assert!(net_path.exists());

    // Dataset on that network, small but two-split.
    let data_dir = root.join("dataset");
    let stdout = ok(bin()
        .args(["gen-data", "--runs", "5", "--duration", "80", "--seed", "10"])
        .arg("--network")
        .arg(&net_path)
        .arg("--out-dir")
        .arg(&data_dir)
        .output()
        .unwrap());
    assert!(stdout.contains("train/eval/validation = 3/1/1"));
    assert!(data_dir.join("manifest.json").exists());
    assert!(data_dir.join("network.toml").exists());
    assert!(data_dir.join("run_004.csv").exists());

    // Fit a model from the training split.
    let model_path = root.join("model.json");
    ok(bin()
        .arg("fit")
        .arg("--data")
        .arg(&data_dir)
        .arg("--out")
        .arg(&model_path)
        .output()
        .unwrap());
    assert!(model_path.exists());

    // Score the forecasters at short horizons.
    let eval_path = root.join("eval.csv");
    ok(bin()
        .arg("eval-forecast")
        .arg("--data")
        .arg(&data_dir)
        .arg("--model")
        .arg(&model_path)
        .args(["--horizons", "5,10"])
        .arg("--out")
        .arg(&eval_path)
        .output()
        .unwrap());
    let eval_text = String::from_utf8(read(&eval_path)).unwrap();
    assert_eq!(eval_text.lines().count(), 4, "comment, header, two rows");
    assert!(eval_text.lines().nth(1).unwrap().starts_with("horizon,const_mae"));

    // A forecast-driven run, twice, byte for byte.
    let (out_a, out_b) = (root.join("run-a"), root.join("run-b"));
    for out in [&out_a, &out_b] {
        let stdout = ok(bin()
            .args(["run", "--seed", "42", "--duration", "150", "--cadence", "50"])
            .arg("--network")
            .arg(&net_path)
            .arg("--model")
            .arg(&model_path)
            .arg("--out-dir")
            .arg(out)
            .output()
            .unwrap());
        assert!(stdout.contains("seed 42"));
    }
    for name in ["metrics.csv", "summary.json", "replay.jsonl"] {
        assert_eq!(
            read(&out_a.join(name)),
            read(&out_b.join(name)),
            "{name} differs between identical runs"
        );
    }

    // The metrics file records the seed it ran with.
    let metrics = String::from_utf8(read(&out_a.join("metrics.csv"))).unwrap();
    assert!(metrics.starts_with("# config_hash="));
    assert!(metrics.lines().next().unwrap().contains("seed=42"));

    // Baseline sweep: four methods, one rate, table row each.
    let cmp_dir = root.join("cmp");
    let stdout = ok(bin()
        .args(["compare", "--duration", "60", "--rates", "0.5", "--seeds", "3"])
        .arg("--network")
        .arg(&net_path)
        .arg("--out-dir")
        .arg(&cmp_dir)
        .output()
        .unwrap());
    assert!(stdout.contains("all-way-stop"));
    assert!(stdout.contains("negotiated-rebalance"));
    let table = String::from_utf8(read(&cmp_dir.join("compare.csv"))).unwrap();
    assert_eq!(table.lines().count(), 6, "comment, header, four cells");
}

#[test]
fn run_requires_a_seed() {
    let output = bin().args(["run", "--duration", "5"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--seed"), "stderr was: {stderr}");
}

#[test]
fn config_files_override_flags_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    std::fs::write(
        &cfg,
        r#"
        duration = 40
        router = "shortest"
        [grid]
        rows = 3
        cols = 3
        "#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let stdout = ok(bin()
        .args(["run", "--seed", "5", "--duration", "999"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap());
    assert!(stdout.contains("rounds 0"), "shortest router never rounds: {stdout}");
    let metrics = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let data_rows = metrics.lines().filter(|l| !l.starts_with('#') && !l.starts_with("tick")).count();
    assert_eq!(data_rows, 40, "file duration beat the flag");
    assert!(!out_dir.join("replay.jsonl").exists());
}

#[test]
fn a_dataset_whose_network_was_swapped_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data_dir = root.join("dataset");
    ok(bin()
        .args(["gen-data", "--runs", "1", "--duration", "20", "--grid", "3x3"])
        .arg("--out-dir")
        .arg(&data_dir)
        .output()
        .unwrap());
    // Replace the embedded network with a different one.
    let other = ok(bin()
        .args(["gen-net", "--rows", "4", "--cols", "4", "--out"])
        .arg(root.join("other.toml"))
        .output()
        .unwrap());
    drop(other);
    std::fs::copy(root.join("other.toml"), data_dir.join("network.toml")).unwrap();
    let output = bin()
        .arg("fit")
        .arg("--data")
        .arg(&data_dir)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("hash"), "stderr was: {stderr}");
}
