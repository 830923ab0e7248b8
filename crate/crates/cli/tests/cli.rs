//! End-to-end checks of the command-line surface: exit codes per error
//! class, byte-identical reports for identical configs, and the
//! sample/oracle/compare round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

static DIR_COUNTER: AtomicU32 = AtomicU32::new(0);

fn scratch_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "ergotrans-cli-test-{}-{}",
        std::process::id(),
        DIR_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn config_path(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergotrans"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

#[test]
fn solve_and_kernel_succeed_on_the_sample_config() {
    let out = run(&["et-solve", &config_path("cost_sample.json")]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("candidates:"));
    assert!(text.contains("Admissible"));

    let out = run(&["et-kernel", &config_path("cost_sample.json")]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0.596709"), "{text}");
}

#[test]
fn identical_configs_give_byte_identical_reports() {
    let dir = scratch_dir();
    let target = dir.join("report.csv");
    let config = config_path("stochastic_sample.json");
    let args = [
        "et-sample",
        &config,
        "--steps",
        "20000",
        "--output",
        target.to_str().unwrap(),
    ];
    let out = run(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = std::fs::read(&target).unwrap();
    std::fs::remove_file(&target).unwrap();
    let out = run(&args);
    assert!(out.status.success());
    let second = std::fs::read(&target).unwrap();
    assert_eq!(first, second);
}

#[test]
fn sample_oracle_compare_round_trip_passes() {
    // Full-scale run: 20 replicas of a million steps each; the verdict
    // tolerates one straggler seed under the 95% rule.
    let dir = scratch_dir();
    let sample = dir.join("sample.csv");
    let oracle = dir.join("oracle.csv");
    let config = config_path("cost_sample.json");
    let out = run(&[
        "et-sample",
        &config,
        "--chains",
        "20",
        "--output",
        sample.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = run(&["et-oracle", &config, "--output", oracle.to_str().unwrap()]);
    assert!(out.status.success());
    let out = run(&[
        "compare",
        "--sampler",
        sample.to_str().unwrap(),
        "--oracle",
        oracle.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("-> PASS"), "{stdout}");
}

#[test]
fn compare_fails_with_exit_one_when_estimates_disagree() {
    let dir = scratch_dir();
    let sample = dir.join("sample.csv");
    let oracle = dir.join("oracle.csv");
    let header = "run_id,mode,function_id,value,ci_halfwidth,n,seed,residuals";
    write(
        &sample,
        &format!("{header}\nid,et-sample,x:1,0.5,0.001,1000,1,0e0\n"),
    );
    write(
        &oracle,
        &format!("{header}\nid,et-oracle,x:1,0.7,0,0,0,0e0\n"),
    );
    let out = run(&[
        "compare",
        "--sampler",
        sample.to_str().unwrap(),
        "--oracle",
        oracle.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn config_errors_exit_with_code_two() {
    // Missing file.
    let out = run(&["et-solve", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown field.
    let dir = scratch_dir();
    let bad = dir.join("bad.json");
    write(&bad, r#"{"stepz": 10}"#);
    let out = run(&["et-solve", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Missing scale.
    let noscale = dir.join("noscale.json");
    write(
        &noscale,
        r#"{"C1": [[1,1],[1,1]], "C2": [[1,1],[1,1]], "p": 0.5}"#,
    );
    let out = run(&["et-solve", noscale.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Mode pin mismatch.
    let pinned = dir.join("pinned.json");
    write(
        &pinned,
        r#"{"mode": "et-kernel", "C1": [[1,1],[1,1]], "C2": [[1,1],[1,1]], "p": 0.5, "scale": "exp"}"#,
    );
    let out = run(&["et-solve", pinned.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_with_code_three() {
    // Zero steps violates the N >= 1 contract.
    let out = run(&[
        "et-sample",
        &config_path("cost_sample.json"),
        "--steps",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));

    // p outside (0,1).
    let dir = scratch_dir();
    let bad_p = dir.join("badp.json");
    write(
        &bad_p,
        r#"{"C1": [[1,1],[1,1]], "C2": [[1,1],[1,1]], "p": 1.0, "scale": "exp"}"#,
    );
    let out = run(&["et-solve", bad_p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn numerical_errors_exit_with_code_four() {
    // One power-iteration step cannot meet the residual contract.
    let dir = scratch_dir();
    let starved = dir.join("starved.json");
    write(
        &starved,
        r#"{"matrix": [[1,2],[3,4]], "scale": "exp",
            "tolerances": {"eigen_max_iterations": 1}}"#,
    );
    let out = run(&["tf-normalize", starved.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
}

#[test]
fn rejected_candidates_exit_with_code_five() {
    // A spectral margin so wide that every candidate lands in the ambiguous
    // band forces the infeasibility report.
    let dir = scratch_dir();
    let strict = dir.join("strict.json");
    write(
        &strict,
        r#"{"C1": [[3,5],[2,4]], "C2": [[2,1],[4,3]], "p": 0.7, "scale": "exp",
            "tolerances": {"spectral_margin": 1.5}}"#,
    );
    let out = run(&["et-solve", strict.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn output_dir_env_var_redirects_reports() {
    let dir = scratch_dir();
    let out = Command::new(env!("CARGO_BIN_EXE_ergotrans"))
        .args([
            "et-oracle",
            &config_path("cost_sample.json"),
            "--output",
            "elsewhere/report.csv",
        ])
        .env("ERGOTRANS_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("report.csv").exists());
}

#[test]
fn tf_sample_runs_with_flag_functions() {
    let dir = scratch_dir();
    let out_path = dir.join("tf.csv");
    let out = run(&[
        "tf-sample",
        &config_path("potential_sample.json"),
        "--steps",
        "50000",
        "--function",
        "cyl:12",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("cyl:12"));
    // Flag overrides replace the config's function list entirely.
    assert!(!text.lines().any(|l| l.contains(",cyl:1,")));
}
