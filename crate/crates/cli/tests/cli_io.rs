//! End-to-end CLI checks: subcommand outputs, file formats, exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gqe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gqe"))
}

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn stdout_field(output: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&output.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")).map(str::to_string))
        .unwrap_or_else(|| panic!("no `{key}:` line in {text}"))
}

fn tiny_config(dir: &Path, seed: u64) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        format!(
            r#"{{"n_buffer_max":50,"n_batch":6,"n_sample":6,"n_iter":2,"n_epochs":3,
                "warmup_samples":8,"seq_len":4,"n_layers":1,"n_heads":2,"embed_dim":8,
                "mlp_ratio":2,"seed":{seed}}}"#
        ),
    )
    .unwrap();
    path
}

fn build_pool_file(dir: &Path) -> PathBuf {
    let path = dir.join("pool.txt");
    let out = gqe()
        .args(["pool", "--qubits", "4", "--electrons", "2", "--k-max", "4"])
        .arg("--out")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    path
}

fn train_run(dir: &Path, seed: u64) -> PathBuf {
    let pool = build_pool_file(dir);
    let config = tiny_config(dir, seed);
    let out_dir = dir.join("run");
    let out = gqe()
        .arg("train")
        .arg("--hamiltonian")
        .arg(fixture_path("h2_sto3g_0.7414.txt"))
        .arg("--pool")
        .arg(&pool)
        .arg("--config")
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out_dir
}

#[test]
fn pool_build_reports_size_law() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pool.txt");
    let out = gqe()
        .args(["pool", "--qubits", "4", "--electrons", "2"])
        .arg("--out")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(stdout_field(&out, "pool_size"), "145"); // 12 generators × 12 angles + 1
    assert_eq!(stdout_field(&out, "n_generators"), "12");

    let k4 = gqe()
        .args(["pool", "--qubits", "4", "--electrons", "2", "--k-max", "4"])
        .arg("--out")
        .arg(dir.path().join("pool4.txt"))
        .output()
        .unwrap();
    assert_eq!(stdout_field(&k4, "pool_size"), "121"); // |T| = 10 variant
}

#[test]
fn pool_custom_passthrough_validates() {
    let dir = tempfile::tempdir().unwrap();
    let custom = dir.path().join("custom.pool");
    std::fs::write(&custom, "I\n0.1 XY\n-0.1 XY\n").unwrap();
    let out_path = dir.path().join("out.pool");
    let out = gqe()
        .arg("pool")
        .arg("--custom")
        .arg(&custom)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(stdout_field(&out, "pool_size"), "3");

    // identity token mandatory -> validation exit code 1
    std::fs::write(&custom, "0.1 XY\n").unwrap();
    let bad = gqe()
        .arg("pool")
        .arg("--custom")
        .arg(&custom)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn invalid_arguments_exit_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    // odd electron count
    let out = gqe()
        .args(["pool", "--qubits", "4", "--electrons", "3"])
        .arg("--out")
        .arg(dir.path().join("x.pool"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    // unknown flag is a validation failure
    let out = gqe().args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    // missing hamiltonian file
    let out = gqe()
        .arg("train")
        .args(["--hamiltonian", "/nonexistent.txt"])
        .args(["--pool", "/nonexistent.pool"])
        .arg("--out-dir")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = train_run(dir.path(), 5);
    let csv = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epoch,min_energy,mean_energy,std_energy,beta,loss,n_energy_evaluations"
    );
    assert_eq!(lines.count(), 3);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["hamiltonian_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["finished_unix"].is_u64());

    let records = std::fs::read_to_string(out_dir.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 8 + 3 * 6);
    let first: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert!(first["energy"].is_f64());
    assert_eq!(first["geometry"], "H2_sto-3g_0.7414A");
    assert!(first["pauli_expectations"].is_object());

    assert!(out_dir.join("checkpoint_final.json").exists());
}

#[test]
fn sample_emits_json_lines_with_energies() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = train_run(dir.path(), 6);
    let samples = dir.path().join("samples.jsonl");
    let out = gqe()
        .arg("sample")
        .arg("--checkpoint")
        .arg(out_dir.join("checkpoint_final.json"))
        .arg("--pool")
        .arg(dir.path().join("pool.txt"))
        .arg("--hamiltonian")
        .arg(fixture_path("h2_sto3g_0.7414.txt"))
        .args(["--count", "5", "--seq-len", "4", "--seed", "3"])
        .arg("--out")
        .arg(&samples)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&samples).unwrap();
    assert_eq!(text.lines().count(), 5);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["sequence"].as_array().unwrap().len(), 4);
        assert!(v["w_sum"].is_f64());
        assert!(v["energy"].is_f64());
    }
}

#[test]
fn evaluate_identity_sequence_reports_hartree_fock() {
    let dir = tempfile::tempdir().unwrap();
    let pool = build_pool_file(dir.path());
    let sequences = dir.path().join("seqs.jsonl");
    std::fs::write(&sequences, "{\"sequence\": [1, 1, 1, 1]}\n").unwrap();
    let out = gqe()
        .arg("evaluate")
        .arg("--hamiltonian")
        .arg(fixture_path("h2_sto3g_0.7414.txt"))
        .arg("--pool")
        .arg(&pool)
        .arg("--sequences")
        .arg(&sequences)
        .output()
        .unwrap();
    assert!(out.status.success());
    let best: f64 = stdout_field(&out, "best_energy").parse().unwrap();
    let exact: f64 = stdout_field(&out, "exact_ground_energy").parse().unwrap();
    let error: f64 = stdout_field(&out, "absolute_error").parse().unwrap();
    assert!((best - (-1.1166843836563212)).abs() < 1e-8); // fixture HF energy
    assert!((exact - (-1.1372701678170625)).abs() < 1e-9);
    assert!((error - (best - exact).abs()).abs() < 1e-12);
    assert!(error >= 0.0);
    let verdict = stdout_field(&out, "verdict");
    assert!(
        verdict.starts_with("outside chemical accuracy"),
        "{verdict}"
    );
}

#[test]
fn reweight_emits_stats_and_prefix_property() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = train_run(dir.path(), 7);
    let records = out_dir.join("records.jsonl");

    let run_frac = |frac: &str, out_name: &str| -> (usize, f64) {
        let out_path = dir.path().join(out_name);
        let out = gqe()
            .arg("reweight")
            .arg("--records")
            .arg(&records)
            .arg("--hamiltonian")
            .arg(fixture_path("h2_sto3g_1.1000.txt"))
            .args(["--top-frac", frac])
            .arg("--out")
            .arg(&out_path)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let count: usize = stdout_field(&out, "count").parse().unwrap();
        let min: f64 = stdout_field(&out, "min").parse().unwrap();
        assert!(stdout_field(&out, "mean").parse::<f64>().is_ok());
        assert!(stdout_field(&out, "std").parse::<f64>().is_ok());
        assert_eq!(
            std::fs::read_to_string(&out_path).unwrap().lines().count(),
            count
        );
        (count, min)
    };
    // 26 source records: floor(0.05·26) = 1, floor(0.10·26) = 2
    let (count5, min5) = run_frac("0.05", "top5.jsonl");
    let (count10, min10) = run_frac("0.10", "top10.jsonl");
    assert_eq!(count5, 1);
    assert_eq!(count10, 2);
    assert_eq!(min5, min10); // sorted-prefix property

    // identity target reproduces source energies
    let out_path = dir.path().join("identity.jsonl");
    let out = gqe()
        .arg("reweight")
        .arg("--records")
        .arg(&records)
        .arg("--hamiltonian")
        .arg(fixture_path("h2_sto3g_0.7414.txt"))
        .args(["--top-frac", "1.0"])
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let source_energies: Vec<f64> = std::fs::read_to_string(&records)
        .unwrap()
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["energy"]
                .as_f64()
                .unwrap()
        })
        .collect();
    let mut sorted = source_energies.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let reweighted: Vec<f64> = std::fs::read_to_string(&out_path)
        .unwrap()
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["energy"]
                .as_f64()
                .unwrap()
        })
        .collect();
    for (a, b) in sorted.iter().zip(&reweighted) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn help_exits_zero() {
    let out = gqe().arg("--help").output().unwrap();
    assert!(out.status.success());
    for sub in ["pool", "train", "reweight", "sample", "evaluate"] {
        assert!(String::from_utf8_lossy(&out.stdout).contains(sub));
    }
}
