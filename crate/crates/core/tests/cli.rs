use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fairge::FairnessReport;

fn fairge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairge"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn generate(dir: &Path) {
    let out = fairge(
        dir,
        &["gen", "--n", "200", "--p_in", "0.1", "--p_out", "0.02", "--seed", "5", "--edges", "g.txt", "--attributes", "a.csv"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

/// Report JSON with the runtime field removed.
fn without_runtime(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.trim_start().starts_with("\"runtime_s\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn help_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fairge(dir.path(), &["--help"])), 0);
    assert_eq!(code(&fairge(dir.path(), &["--version"])), 0);
    assert_eq!(code(&fairge(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&fairge(dir.path(), &["train", "--epochs", "many"])), 1);
    // missing inputs
    assert_eq!(code(&fairge(dir.path(), &["train"])), 1);
}

#[test]
fn train_is_deterministic_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    let args = [
        "train", "--edges", "g.txt", "--attributes", "a.csv", "--dataset", "sbm", "--missing_rate", "0.3",
        "--epochs", "40", "--seed", "2",
    ];
    let mut runs = Vec::new();
    for out_dir in ["r1", "r2"] {
        let mut a = args.to_vec();
        a.extend(["--output_dir", out_dir]);
        let out = fairge(d, &a);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        runs.push(d.join(out_dir).join("sbm_r0.3_s2.report.json"));
    }
    assert_eq!(without_runtime(&runs[0]), without_runtime(&runs[1]));
    let report = FairnessReport::from_json(&fs::read_to_string(&runs[0]).unwrap()).unwrap();
    assert_eq!(report.missing_rate, 0.3);
    assert_eq!(report.config.epochs, 40);
    assert_eq!(report.n_eval(), 50);
    let ckpt = fs::read_to_string(d.join("r1/sbm_r0.3_s2.checkpoint.json")).unwrap();
    assert_eq!(ckpt, fs::read_to_string(d.join("r2/sbm_r0.3_s2.checkpoint.json")).unwrap());
    fairge::model::checkpoint_from_json(&ckpt).unwrap();
}

#[test]
fn config_file_then_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    fs::write(
        d.join("cfg.json"),
        r#"{"dataset": "fromfile", "edges": "g.txt", "attributes": "a.csv", "epochs": 7, "hidden": 16, "output_dir": "o"}"#,
    )
    .unwrap();
    let out = fairge(d, &["train", "--config", "cfg.json", "--hidden", "8", "--spectral", "false"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = FairnessReport::from_json(&fs::read_to_string(d.join("o/fromfile_r0_s0.report.json")).unwrap()).unwrap();
    assert_eq!(r.config.epochs, 7);
    assert_eq!(r.config.hidden, 8);
    assert!(!r.config.spectral);
}

#[test]
fn mask_file_is_honoured_by_train() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    let out = fairge(d, &["mask", "--attributes", "a.csv", "--rate", "0.25", "--seed", "1", "--out", "m.txt"]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(d.join("m.txt")).unwrap().lines().count(), 50);
    let out = fairge(
        d,
        &["train", "--edges", "g.txt", "--attributes", "a.csv", "--mask-file", "m.txt", "--epochs", "5", "--output-dir", "o"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = fairge(
        d,
        &["sweep", "--edges", "g.txt", "--attributes", "a.csv", "--mask_file", "m.txt", "--epochs", "5"],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn sweep_grid_and_aggregate_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    let out = fairge(
        d,
        &[
            "sweep", "--edges", "g.txt", "--attributes", "a.csv", "--dataset", "sbm", "--missing_rates",
            "0.1,0.2,0.3,0.4,0.5,0.6", "--seeds", "0,1,2,3,4", "--epochs", "3", "--hidden", "16", "--output_dir", "s",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let reports = fs::read_dir(d.join("s"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".report.json"))
        .count();
    assert_eq!(reports, 30);
    let csv = fs::read_to_string(d.join("s/sbm_aggregate.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("5")));
}

#[test]
fn verify_k3_passes_and_impossible_tolerance_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("k3.txt"), "0 1\n1 2\n0 2\n").unwrap();
    fs::write(d.join("k3.csv"), "id,f,sensitive,label\n0,1,0,0\n1,0,1,1\n2,1,1,0\n").unwrap();
    let out = fairge(
        d,
        &["verify", "--edges", "k3.txt", "--attributes", "k3.csv", "--variants", "thm1,thm3", "--k_max", "30", "--tol", "1e-8"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(d.join("out/verify.csv")).unwrap();
    assert!(csv.starts_with("variant,graph_id,n,k,cos_k,limit,residual"));
    for row in csv.lines().filter(|l| l.contains(",30,")) {
        let residual: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(residual <= 1e-8, "{row}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("out/verify_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);

    let out = fairge(
        d,
        &["verify", "--edges", "k3.txt", "--attributes", "k3.csv", "--k_max", "2", "--tol", "1e-12", "--decay", "false"],
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn verify_generated_suites() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairge(dir.path(), &["verify", "--suite", "3", "--cliques", "2", "--output-dir", "v"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("v/verify_summary.json")).unwrap()).unwrap();
    assert!(summary["checks"]["multiplicity"]["passed"].as_u64().unwrap() >= 2);
}
