use std::fs;
use std::process::Command;

use exprb::integrators::SchemeId;
use exprb::problems::ProblemId;
use exprb_bench::cache::{ReferenceCache, ReferenceFile, CACHE_DIR_ENV};
use exprb_bench::experiment::{build_reference, run_convergence, ConvergenceRow, ExperimentSpec, Mode};
use exprb_bench::report::{read_csv, to_csv_string};
use exprb_bench::BenchError;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_exprb-bench"));
    c.env_remove(CACHE_DIR_ENV);
    c
}

fn two_body_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(ProblemId::TwoBody, Mode::FixedConvergence);
    spec.schemes = vec![SchemeId::Exprb42, SchemeId::Exprb42N];
    spec.steps = vec![64, 128];
    spec
}

#[test]
fn convergence_csv_round_trips() {
    let table = run_convergence(&two_body_spec()).unwrap();
    let text = to_csv_string(&table.rows).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "scheme,N,h,error,order,wall_seconds,matvecs"
    );
    let back: Vec<ConvergenceRow> = read_csv(text.as_bytes()).unwrap();
    assert_eq!(back, table.rows);
}

#[test]
fn repeated_runs_give_identical_errors() {
    let a = run_convergence(&two_body_spec()).unwrap();
    let mut spec = two_body_spec();
    spec.jobs = 3;
    let b = run_convergence(&spec).unwrap();
    let key = |rows: &[ConvergenceRow]| {
        rows.iter()
            .map(|r| (r.scheme, r.n, r.error.map(f64::to_bits), r.matvecs))
            .collect::<Vec<_>>()
    };
    assert_eq!(key(&a.rows), key(&b.rows));
}

#[test]
fn missing_reference_names_the_build_command() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(ProblemId::VanDerPol, Mode::FixedConvergence);
    spec.steps = vec![64];
    spec.cache_dir = dir.path().to_path_buf();
    match run_convergence(&spec) {
        Err(e @ BenchError::MissingReference { .. }) => {
            assert!(e.to_string().contains("build-reference --problem van-der-pol"), "{e}");
        }
        other => panic!("expected a missing reference, got {other:?}"),
    }
}

#[test]
fn cli_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex1.csv");
    let status = bin()
        .args([
            "convergence",
            "--problem",
            "two-body",
            "--schemes",
            "exprb42,gauss42",
            "--N",
            "32..64",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let rows: Vec<ConvergenceRow> = read_csv(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1].n, 64);
    assert!(rows[1].order.is_some());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ex1.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "convergence");
    assert_eq!(manifest["params"]["reference"]["kind"], "exact");
}

#[test]
fn cli_reports_missing_reference_with_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["convergence", "--problem", "ex2", "--N", "64"])
        .env(CACHE_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("build-reference --problem van-der-pol"), "{err}");
    assert!(err.contains(&dir.path().display().to_string()), "{err}");
}

#[test]
fn env_cache_dir_is_used_and_flag_overrides_it() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["build-reference", "--problem", "van-der-pol", "--N", "256"])
        .env(CACHE_DIR_ENV, env_dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let cached = ReferenceCache::new(env_dir.path());
    assert_eq!(cached.available(ProblemId::VanDerPol, SchemeId::Exprb42), vec![256]);

    let out = bin()
        .args(["convergence", "--problem", "van-der-pol", "--N", "16,32"])
        .env(CACHE_DIR_ENV, env_dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);

    let out = bin()
        .args(["convergence", "--problem", "van-der-pol", "--N", "16", "--cache-dir"])
        .arg(flag_dir.path())
        .env(CACHE_DIR_ENV, env_dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cached_reference_file_is_version_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ReferenceCache::new(dir.path());
    let b = build_reference(ProblemId::VanDerPol, 128, &cache, &Default::default()).unwrap();
    let text = fs::read_to_string(&b.path).unwrap();
    assert!(text.starts_with("# exprb-reference v1\n"));
    assert_eq!(ReferenceFile::parse(&text).unwrap(), b.file);
    let tampered = text.replace("v1", "v9");
    assert!(ReferenceFile::parse(&tampered).is_err());
}

#[test]
fn build_reference_refuses_problems_with_exact_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["build-reference", "--problem", "two-body", "--cache-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn order_check_emits_json_with_the_expected_failure() {
    let out = bin().args(["order-check", "--trials", "5"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = v["report"]["checks"].as_array().unwrap();
    let stiff = checks
        .iter()
        .find(|c| c["name"] == "exprb42n: stiff conditions on 5 random matrices")
        .unwrap();
    assert_eq!(stiff["expected"], "fail");
    assert_eq!(stiff["held"], false);
    assert_eq!(v["manifest"]["command"], "order-check");
}

#[test]
fn phi_selftest_passes() {
    let out = bin().args(["phi-selftest"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn trace_and_sweep_run_on_van_der_pol() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bin()
        .args(["build-reference", "--problem", "ex2", "--N", "512", "--cache-dir"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status
        .success());
    let out = bin()
        .args(["sweep", "--problem", "ex2", "--tol", "1e-4,1e-5", "--cache-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("scheme,tol,accepted,rejected,error,error_rms,wall_seconds,matvecs,status"));
    assert_eq!(text.lines().count(), 3);

    let csv = dir.path().join("trace.csv");
    let out = bin()
        .args(["trace", "--problem", "ex2", "--tol", "1e-5", "--cache-dir"])
        .arg(dir.path())
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("index,t,h,err_estimate"));
    assert!(text.lines().count() > 10);
}
