use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alphalaw"))
        .current_dir(dir)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} exited with {}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--output", "recs.jsonl"];
    args.extend_from_slice(extra);
    ok(dir, &args);
}

#[test]
fn synth_then_estimate_recovers_alpha() {
    let tmp = tempfile::tempdir().unwrap();
    synth(
        tmp.path(),
        &["--n", "200", "--alpha", "1.163", "--seed", "4"],
    );
    let fit = ok(
        tmp.path(),
        &["estimate", "--input", "recs.jsonl", "--bootstrap", "0"],
    );
    assert!((fit["alpha"].as_f64().unwrap() - 1.163).abs() < 1e-9);
    assert_eq!(fit["n_records"], 200);
    let csv = std::fs::read_to_string(tmp.path().join("out/estimate.csv")).unwrap();
    assert!(csv.starts_with("method,"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn manifest_hashes_match_files() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &["--n", "50", "--sigma", "0.1"]);
    ok(
        tmp.path(),
        &["report", "--input", "recs.jsonl", "--bootstrap", "100"],
    );
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("out/manifest.json")).unwrap())
            .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        let bytes =
            std::fs::read(tmp.path().join("out").join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(
            f["sha256"].as_str().unwrap(),
            alphalaw::report::sha256_hex(&bytes)
        );
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(dir, &["--help"]), 0);
    assert_eq!(code(dir, &["--version"]), 0);
    assert_eq!(code(dir, &[]), 1);
    assert_eq!(code(dir, &["estimate", "--no-such-flag"]), 1);
    assert_eq!(code(dir, &["synth", "--k", "1"]), 1);
    assert_eq!(code(dir, &["synth", "--prior", "beta"]), 1);
    assert_eq!(code(dir, &["synth", "--jobs", "0"]), 1);
    assert_eq!(code(dir, &["simulate"]), 1);
    assert_eq!(code(dir, &["estimate", "--input", "missing.jsonl"]), 2);

    std::fs::write(dir.join("junk.jsonl"), "not json\n").unwrap();
    assert_eq!(code(dir, &["estimate", "--input", "junk.jsonl"]), 1);
}

#[test]
fn unreachable_endpoint_is_a_transport_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &[
            "collect",
            "--mock-problems",
            "2",
            "--provider",
            "http",
            "--endpoint",
            "http://127.0.0.1:9/v1/chat/completions",
            "--max-retries",
            "0",
            "--timeout-secs",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["written"], 0);
    assert_eq!(summary["failed"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_fills_unset_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("run.toml"),
        "seed = 5\n\n[synth]\nn = 30\nprior = \"uniform\"\n\n[estimate]\nby-group = true\nbootstrap = 0\n",
    )
    .unwrap();
    let a = ok(
        dir,
        &["synth", "--config", "run.toml", "--output", "a.jsonl"],
    );
    assert_eq!(a["records"], 30);
    let b = ok(
        dir,
        &[
            "synth", "--config", "run.toml", "--n", "7", "--output", "b.jsonl",
        ],
    );
    assert_eq!(b["records"], 7);
    let c = ok(
        dir,
        &[
            "synth", "--seed", "5", "--n", "30", "--prior", "uniform", "--output", "c.jsonl",
        ],
    );
    assert_eq!(c["records"], 30);
    assert_eq!(
        std::fs::read(dir.join("a.jsonl")).unwrap(),
        std::fs::read(dir.join("c.jsonl")).unwrap()
    );

    ok(
        dir,
        &["estimate", "--config", "run.toml", "--input", "a.jsonl"],
    );
    assert!(dir.join("out/groups.csv").exists());

    std::fs::write(dir.join("bad.toml"), "[synth]\nsamples = 3\n").unwrap();
    assert_eq!(code(dir, &["synth", "--config", "bad.toml"]), 1);
    std::fs::write(dir.join("bad.toml"), "[nonsense]\nn = 3\n").unwrap();
    assert_eq!(code(dir, &["synth", "--config", "bad.toml"]), 1);
    assert_eq!(code(dir, &["synth", "--config", "absent.toml"]), 2);
}

#[test]
fn analysis_commands_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, &["--n", "120", "--sigma", "0.1"]);
    ok(
        dir,
        &[
            "synth",
            "--n",
            "40",
            "--schedule",
            "0.9,0.8,0.7",
            "--sigma",
            "0.05",
            "--output",
            "steps.jsonl",
        ],
    );
    let cases: [(&[&str], &str); 9] = [
        (&["per-problem", "--input", "recs.jsonl"], "per_problem"),
        (
            &[
                "sweep-evidence",
                "--input",
                "recs.jsonl",
                "--bootstrap",
                "100",
                "--permutations",
                "99",
            ],
            "evidence_sensitivity",
        ),
        (
            &[
                "ablate-noise",
                "--input",
                "recs.jsonl",
                "--permutations",
                "99",
            ],
            "noise_ablation",
        ),
        (
            &["ablate-k", "--input", "recs.jsonl", "--permutations", "99"],
            "k_ablation",
        ),
        (
            &[
                "multistep",
                "--input",
                "steps.jsonl",
                "--bootstrap",
                "100",
                "--permutations",
                "99",
            ],
            "multistep",
        ),
        (
            &["identifiability", "--trials", "10", "--records", "20"],
            "identifiability",
        ),
        (&["calibrate", "--input", "recs.jsonl"], "calibration"),
        (&["filter", "--input", "recs.jsonl"], "quality"),
        (
            &["simulate", "--alpha", "0.6", "--steps", "8"],
            "trajectory",
        ),
    ];
    for (args, table) in cases {
        let out = format!("o-{table}");
        let mut full = args.to_vec();
        full.extend(["--out", &out]);
        ok(dir, &full);
        let csv = std::fs::read_to_string(dir.join(&out).join(format!("{table}.csv"))).unwrap();
        assert!(csv.lines().count() >= 2, "{table}: {csv}");
    }
    let traj = std::fs::read_to_string(dir.join("o-trajectory/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 10);
    assert!(dir.join("o-quality/filtered.jsonl").exists());
}

#[test]
fn mock_collection_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let summary = ok(
        dir,
        &[
            "collect",
            "--mock-problems",
            "40",
            "--mock-alpha",
            "1.2",
            "--m-candidates",
            "5",
        ],
    );
    assert_eq!(summary["written"], 40);
    let fit = ok(
        dir,
        &[
            "estimate",
            "--input",
            "out/collected.jsonl",
            "--bootstrap",
            "0",
        ],
    );
    assert!((fit["alpha"].as_f64().unwrap() - 1.2).abs() < 1e-6);
}
