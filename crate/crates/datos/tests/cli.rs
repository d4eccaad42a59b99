//! Black-box tests of the command-line harness and its file contracts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_datos"))
}

const SMALL_ELASTIC: &str = "\
problem.family = elastic_net
problem.m = 4
problem.n = 5
problem.d = 6
problem.lambda = 0.05
problem.seed = 3
graph.p = 0.8
graph.seed = 2
solver.k_max = 15
";

fn write_cfg(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("exp.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn run_writes_trace_and_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SMALL_ELASTIC);
    let out_dir = dir.path().join("out");
    let out = bin().args(["run"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    run_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("final gap"));

    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines().peekable();
    let mut echo = 0;
    while lines.peek().is_some_and(|l| l.starts_with('#')) {
        lines.next();
        echo += 1;
    }
    assert!(echo > 0, "config echo missing");
    let header = lines.next().unwrap();
    assert!(header.starts_with("k,alpha_min,alpha_max,"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16, "initial row plus k_max rounds");
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.split(',').next().unwrap(), i.to_string());
    }

    for name in ["gap.csv", "consensus.csv", "alpha.csv"] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        assert!(text.starts_with("k,value\n"), "{name} header");
        assert_eq!(text.lines().count(), 17, "{name} rows");
    }
}

#[test]
fn invalid_mixing_rate_names_field_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &format!("{SMALL_ELASTIC}gossip.c = 0.7\n"));
    let out = bin().args(["run"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gossip.c") && err.contains("(0, 1/2)"), "stderr: {err}");
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SMALL_ELASTIC);
    for sub in ["a", "b"] {
        let out = bin()
            .args(["run"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        run_ok(&out);
    }
    for name in ["trace.csv", "gap.csv", "consensus.csv", "alpha.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SMALL_ELASTIC);
    let base =
        bin().args(["run"]).arg(&cfg).arg("--out").arg(dir.path().join("s0")).output().unwrap();
    run_ok(&base);
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("s5"))
        .args(["--seed", "5"])
        .output()
        .unwrap();
    run_ok(&out);
    let a = fs::read(dir.path().join("s0/trace.csv")).unwrap();
    let b = fs::read(dir.path().join("s5/trace.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn compare_emits_per_algorithm_traces_and_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        &format!("{SMALL_ELASTIC}compare.algorithms = datos, local_datos, pg_extra\nalgorithm.pg_alpha = 0.02\n"),
    );
    let out_dir = dir.path().join("out");
    let out = bin().args(["compare"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    run_ok(&out);
    for name in ["trace_datos.csv", "trace_local_datos.csv", "trace_pg_extra.csv"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let merged = fs::read_to_string(out_dir.join("compare.csv")).unwrap();
    let mut lines = merged.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,datos_gap,datos_consensus,local_datos_gap,local_datos_consensus,pg_extra_gap,pg_extra_consensus"
    );
    assert_eq!(lines.count(), 16);
}

#[test]
fn compare_single_algorithm_matches_its_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &format!("{SMALL_ELASTIC}compare.algorithms = datos\n"));
    let out_dir = dir.path().join("out");
    let out = bin().args(["compare"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    run_ok(&out);
    let merged = fs::read_to_string(out_dir.join("compare.csv")).unwrap();
    let trace = fs::read_to_string(out_dir.join("trace_datos.csv")).unwrap();
    let trace_rows: Vec<Vec<String>> = trace
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    let merged_rows: Vec<Vec<String>> =
        merged.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(trace_rows.len(), merged_rows.len());
    for (t, m) in trace_rows.iter().zip(&merged_rows) {
        assert_eq!(t[0], m[0]);
        assert_eq!(t[4], m[1], "gap column");
        assert_eq!(t[5], m[2], "consensus column");
    }
}

#[test]
fn validate_reports_groups_and_succeeds() {
    let out = bin().args(["validate"]).output().unwrap();
    run_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    for group in ["gossip", "gradients", "prox", "lifted_equivalence", "uniform_stepsize"] {
        assert!(text.contains(&format!("{group}: pass")), "missing group line: {text}");
    }
}
