use std::path::Path;
use std::process::{Command, Output};

fn gcoarse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcoarse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

fn synth(dir: &Path) {
    let out = gcoarse(&[
        "synth",
        "--blocks",
        "40,40",
        "--p-in",
        "0.25",
        "--p-out",
        "0.01",
        "--features",
        "8",
        "--separation",
        "2.0",
        "--train-per-class",
        "10",
        "--val-per-class",
        "5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    for file in ["edges.tsv", "features.csv", "labels.csv", "split.tsv"] {
        assert!(dir.join(file).exists(), "missing {file}");
    }
}

#[test]
fn synthetic_bundle_runs_through_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("sbm");
    synth(&data);
    let report = tmp.path().join("report.json");
    let out = gcoarse(&[
        "pipeline",
        "--dataset",
        data.to_str().unwrap(),
        "--model",
        "appnp",
        "--ratio",
        "0.5",
        "--runs",
        "2",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 2);
    let acc = json["mean_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn coarsen_writes_a_partition() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("sbm");
    synth(&data);
    let part = tmp.path().join("partition.tsv");
    let out = gcoarse(&[
        "coarsen",
        "--dataset",
        data.to_str().unwrap(),
        "--method",
        "heavy_edge",
        "--ratio",
        "0.3",
        "--out",
        part.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    let rows = std::fs::read_to_string(&part).unwrap();
    assert!(rows.lines().filter(|l| !l.trim().is_empty()).count() >= 80);
}

#[test]
fn train_prints_the_loss_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("sbm");
    synth(&data);
    let out = gcoarse(&[
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--ratio",
        "0.7",
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("train loss"));
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("sbm");
    synth(&data);
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "runs = 3\nepochs = 5\n").unwrap();
    let report = tmp.path().join("report.json");
    let out = gcoarse(&[
        "pipeline",
        "--dataset",
        data.to_str().unwrap(),
        "--runs",
        "1",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 3);

    std::fs::write(&cfg, "bogus_key = 1\n").unwrap();
    let out = gcoarse(&[
        "pipeline",
        "--dataset",
        data.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1, "{}", text(&out));
}

#[test]
fn sweep_reports_failed_cells_without_aborting() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("sbm");
    synth(&data);
    let cfg = tmp.path().join("quick.cfg");
    std::fs::write(&cfg, "epochs = 3\n").unwrap();
    let out = gcoarse(&[
        "sweep",
        "--dataset",
        data.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--ratios",
        "0.5,0.0",
        "--methods",
        "heavy_edge,variation_edges",
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("failed"));
}

#[test]
fn verify_passes_and_detects_an_injected_fault() {
    let out = gcoarse(&["verify", "--depth", "quick"]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    let out = gcoarse(&["verify", "--depth", "quick", "--inject-fault"]);
    assert_eq!(code(&out), 3, "{}", text(&out));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&gcoarse(&["pipeline", "--no-such-flag"])), 1);
    assert_eq!(code(&gcoarse(&["pipeline"])), 1);
    assert_eq!(
        code(&gcoarse(&["pipeline", "--dataset", "x", "--ratio", "1.5"])),
        1
    );
    assert_eq!(code(&gcoarse(&["pipeline", "--model", "transformer"])), 1);
    assert_eq!(code(&gcoarse(&["--help"])), 0);
}

#[test]
fn data_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent");
    let out = gcoarse(&["pipeline", "--dataset", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", text(&out));

    let broken = tmp.path().join("broken");
    synth(&broken);
    std::fs::write(broken.join("edges.tsv"), "0\tnot_a_node\n").unwrap();
    let out = gcoarse(&["coarsen", "--dataset", broken.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", text(&out));
}
