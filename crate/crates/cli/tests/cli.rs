use spikerank::fourier_model::CoefficientMatrix;
use spikerank::VideoPatch;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikerank")).args(args).output().expect("binary runs")
}

fn read_coeffs(path: &Path) -> CoefficientMatrix {
    CoefficientMatrix::read_csv(fs::File::open(path).unwrap()).unwrap()
}

fn diagnostics(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path.join("diagnostics.json")).unwrap()).unwrap()
}

/// Encodes a random 3×3×3 patch into `dir/enc`.
fn encode_patch(dir: &Path, budget: usize) -> std::path::PathBuf {
    let patch = dir.join("patch.vpf");
    VideoPatch::random(3, 3, 3, 5).unwrap().write_vpf(fs::File::create(&patch).unwrap()).unwrap();
    let enc = dir.join("enc");
    let out = run(&["encode", "--patch", patch.to_str().unwrap(), "--budget", &budget.to_string(), "--out", enc.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    enc
}

fn decode(enc: &Path, dec: &Path, extra: &[&str]) -> Output {
    let spikes = enc.join("spikes.csv");
    let tems = enc.join("tems.json");
    let mixing = enc.join("mixing.csv");
    let mut args = vec![
        "decode",
        "--spikes",
        spikes.to_str().unwrap(),
        "--tems",
        tems.to_str().unwrap(),
        "--mixing",
        mixing.to_str().unwrap(),
        "--out",
        dec.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn patch_round_trip_recovers_scene() {
    let dir = tempfile::tempdir().unwrap();
    let enc = encode_patch(dir.path(), 4);
    for name in ["spikes.csv", "tems.json", "mixing.csv", "truth_cx.csv", "truth_cy.csv", "scene.csv", "scene.json"] {
        assert!(enc.join(name).exists(), "missing {name}");
    }
    let dec = dir.path().join("dec");
    let out = decode(&enc, &dec, &["--require-feasible"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let err = read_coeffs(&dec.join("coefficients.csv")).relative_error(&read_coeffs(&enc.join("truth_cx.csv")));
    assert!(err < 1e-8, "relative error {err:.2e}");
    assert_eq!(diagnostics(&dec)["status"], "ok");
}

#[test]
fn svp_decode_reports_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let enc = encode_patch(dir.path(), 6);
    let dec = dir.path().join("dec");
    let out = run(&[
        "decode",
        "--spikes",
        enc.join("spikes.csv").to_str().unwrap(),
        "--tems",
        enc.join("tems.json").to_str().unwrap(),
        "--rank",
        "2",
        "--max-iters",
        "50",
        "--out",
        dec.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d = diagnostics(&dec);
    assert!(d["iterations"].as_u64().unwrap() <= 50);
    assert_eq!(read_coeffs(&dec.join("coefficients.csv")).rows(), 9);
}

#[test]
fn empty_spike_file_is_underdetermined() {
    let dir = tempfile::tempdir().unwrap();
    let enc = encode_patch(dir.path(), 3);
    fs::write(enc.join("spikes.csv"), "tem_id,spike_index,time\n").unwrap();
    let dec = dir.path().join("dec");
    let out = decode(&enc, &dec, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d = diagnostics(&dec);
    assert_eq!(d["status"], "underdetermined");
    assert_eq!(d["feasible"], false);
}

#[test]
fn require_feasible_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let enc = encode_patch(dir.path(), 2);
    let out = decode(&enc, &dir.path().join("dec"), &["--require-feasible"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn encoding_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("enc.json");
    fs::write(
        &config,
        r#"{"ensemble": {"channels": 4, "rank": 2, "basis": {"kind": "periodic-exp", "period": 1.0, "max_order": 2}, "amplitude_bound": 1.0}, "budget": 6, "seed": 3}"#,
    )
    .unwrap();
    let dirs = ["a", "b"].map(|n| dir.path().join(n));
    for d in &dirs {
        let out = run(&["encode", "--config", config.to_str().unwrap(), "--out", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["spikes.csv", "tems.json", "mixing.csv", "truth_cx.csv", "truth_cy.csv"] {
        assert_eq!(fs::read(dirs[0].join(name)).unwrap(), fs::read(dirs[1].join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"budgets": [1, 2], "no_such_field": true}"#).unwrap();
    let out = run(&["sweep-spikes", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_field"));

    fs::write(&config, "{ not json").unwrap();
    assert_eq!(run(&["sweep-tems", "--config", config.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn small_sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&["sweep-spikes", "--seeds", "0..2", "--budgets", "2,5", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_value,grid,tems,budget,seed,total_spikes,relative_error,feasible,theorem_threshold,naive_threshold"
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn gram_check_prints_report() {
    let out = run(&["gram-check", "--k1", "2", "--k2", "1", "--d1", "5", "--d2", "3", "--require-identity"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["is_scaled_identity"], true);

    let out = run(&["gram-check", "--k1", "2", "--grid", "3x1", "--require-identity"]);
    assert_eq!(out.status.code(), Some(3));
}
