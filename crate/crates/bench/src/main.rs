use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use exprb::integrators::SchemeId;
use exprb::problems::ProblemId;
use exprb_bench::cache::{default_reference_steps, resolve_cache_dir, ReferenceCache, CACHE_DIR_ENV};
use exprb_bench::experiment::{self, ExperimentSpec, Mode, StepTrace};
use exprb_bench::report::{self, manifest, manifest_path, reference_json};
use exprb_bench::selftest::{self, SelfTestReport, DEFAULT_SEED, STIFF_TRIALS};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "exprb-bench",
    version,
    about = "Experiments for two-stage exponential Rosenbrock integrators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed-step errors and observed orders at the final time.
    Convergence(RunArgs),
    /// Adaptive runs over a list of tolerances (ATOL = RTOL).
    Sweep(RunArgs),
    /// Accepted step sizes of one adaptive run.
    Trace {
        #[command(flatten)]
        run: RunArgs,
        /// Achieved max-norm error to aim for when --tol is not given.
        #[arg(long, default_value_t = 1e-3)]
        target: f64,
    },
    /// Classical and stiff order conditions of the fourth-order tableaus.
    OrderCheck(CheckArgs),
    /// Scalar and matrix phi-function checks.
    PhiSelftest(CheckArgs),
    /// Every self-check, including linear exactness of each scheme.
    Selftest(CheckArgs),
    /// Compute and cache a reference solution for a problem without a closed form.
    BuildReference {
        #[arg(long)]
        problem: ProblemId,
        /// Fixed steps of exprb42; the run with half as many gives the doubling change.
        #[arg(long = "N")]
        steps: Option<usize>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// two-body, van-der-pol, parabolic-1d or adr-2d (also ex1..ex4).
    #[arg(long)]
    problem: ProblemId,
    /// Comma-separated scheme names.
    #[arg(long, value_delimiter = ',', default_value = "exprb42")]
    schemes: Vec<SchemeId>,
    /// Step counts: a comma list, or `A..B` for powers of two from A to B.
    #[arg(long = "N")]
    steps: Option<String>,
    /// Tolerances: a comma list; `1e-4.5` means 10^-4.5.
    #[arg(long)]
    tol: Option<String>,
    /// CSV output path; a `.manifest.json` is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Reference cache directory; overrides the environment variable.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = STIFF_TRIALS)]
    trials: usize,
    /// JSON output path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_steps(s: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        if a == 0 || a > b {
            bail!("bad step range {s}");
        }
        return Ok(std::iter::successors(Some(a), |n| n.checked_mul(2))
            .take_while(|&n| n <= b)
            .collect());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("bad step count '{t}'"))
        })
        .collect()
}

fn parse_tol(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (m, e) = s
        .split_once(['e', 'E'])
        .with_context(|| format!("bad tolerance '{s}'"))?;
    let m: f64 = m.parse().with_context(|| format!("bad tolerance '{s}'"))?;
    let e: f64 = e.parse().with_context(|| format!("bad tolerance '{s}'"))?;
    Ok(m * 10f64.powf(e))
}

fn default_steps(problem: ProblemId) -> Vec<usize> {
    let (a, b) = match problem {
        ProblemId::TwoBody | ProblemId::VanDerPol => (64, 512),
        ProblemId::Parabolic1d => (4, 256),
        ProblemId::Adr2d => (32, 512),
    };
    std::iter::successors(Some(a), |n| Some(n * 2))
        .take_while(|&n| n <= b)
        .collect()
}

fn spec_from(args: &RunArgs, mode: Mode) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(args.problem, mode);
    spec.schemes = args.schemes.clone();
    spec.steps = match &args.steps {
        Some(s) => parse_steps(s)?,
        None => default_steps(args.problem),
    };
    if let Some(t) = &args.tol {
        spec.tols = t.split(',').map(parse_tol).collect::<Result<_>>()?;
    }
    spec.out = args.out.clone();
    spec.jobs = args.jobs;
    spec.cache_dir = resolve_cache_dir(args.cache_dir.as_deref());
    Ok(spec)
}

fn spec_json(spec: &ExperimentSpec) -> serde_json::Value {
    json!({
        "problem": spec.problem.as_str(),
        "schemes": spec.schemes.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        "mode": spec.mode,
        "N": spec.steps,
        "tol": spec.tols,
        "jobs": spec.jobs,
        "cache_dir": spec.cache_dir.display().to_string(),
    })
}

fn emit_csv<T: serde::Serialize>(out: Option<&Path>, rows: &[T], manifest_value: serde_json::Value) -> Result<()> {
    match out {
        Some(path) => {
            report::write_csv_file(path, rows)?;
            report::write_json(&manifest_path(path), &manifest_value)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", report::to_csv_string(rows)?),
    }
    Ok(())
}

fn emit_report(out: Option<&Path>, command: &str, report: &SelfTestReport) -> Result<bool> {
    let value = json!({ "manifest": manifest(command, json!({ "seed": report.seed })), "report": report });
    match out {
        Some(path) => {
            report::write_json(path, &value)?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&value)?),
    }
    for c in report.checks.iter().filter(|c| !c.ok) {
        eprintln!("FAILED: {} (value {:e}, tolerance {:e})", c.name, c.value, c.tolerance);
    }
    Ok(report.all_ok())
}

fn trace_manifest(spec: &ExperimentSpec, target: f64, trace: &StepTrace) -> serde_json::Value {
    let s = &trace.summary;
    manifest(
        "trace",
        json!({
            "spec": spec_json(spec),
            "target": target,
            "reference": reference_json(&trace.reference),
            "chosen": {
                "scheme": s.scheme.as_str(),
                "tol": s.tol,
                "accepted": s.accepted,
                "rejected": s.rejected,
                "error": s.error,
                "error_rms": s.error_rms,
                "wall_seconds": s.wall_seconds,
            },
            "search": trace.search.iter().map(|r| json!({
                "tol": r.tol, "error": r.error, "accepted": r.accepted, "status": r.status,
            })).collect::<Vec<_>>(),
        }),
    )
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Convergence(args) => {
            let spec = spec_from(&args, Mode::FixedConvergence)?;
            let table = experiment::run_convergence(&spec)?;
            for (s, n, msg) in &table.failures {
                eprintln!("{s} N={n} did not complete: {msg}");
            }
            let m = manifest(
                "convergence",
                json!({
                    "spec": spec_json(&spec),
                    "reference": reference_json(&table.reference),
                    "failures": table.failures.iter().map(|(s, n, m)| json!({
                        "scheme": s.as_str(), "N": n, "message": m,
                    })).collect::<Vec<_>>(),
                }),
            );
            emit_csv(spec.out.as_deref(), &table.rows, m)?;
            Ok(true)
        }
        Command::Sweep(args) => {
            let spec = spec_from(&args, Mode::AdaptiveSweep)?;
            let table = experiment::run_adaptive_sweep(&spec)?;
            let m = manifest(
                "sweep",
                json!({ "spec": spec_json(&spec), "reference": reference_json(&table.reference) }),
            );
            emit_csv(spec.out.as_deref(), &table.rows, m)?;
            Ok(true)
        }
        Command::Trace { run, target } => {
            let spec = spec_from(&run, Mode::StepsizeTrace)?;
            let trace = experiment::run_trace(&spec, target)?;
            let s = &trace.summary;
            eprintln!(
                "{} tol {:e}: {} accepted, {} rejected, error {:e}",
                s.scheme,
                s.tol,
                s.accepted,
                s.rejected,
                s.error.unwrap_or(f64::NAN)
            );
            emit_csv(spec.out.as_deref(), &trace.steps, trace_manifest(&spec, target, &trace))?;
            Ok(true)
        }
        Command::OrderCheck(a) => {
            let r = SelfTestReport {
                seed: a.seed,
                checks: selftest::order_checks(a.trials, a.seed),
            };
            emit_report(a.out.as_deref(), "order-check", &r)
        }
        Command::PhiSelftest(a) => {
            let r = SelfTestReport {
                seed: a.seed,
                checks: selftest::phi_checks(a.seed),
            };
            emit_report(a.out.as_deref(), "phi-selftest", &r)
        }
        Command::Selftest(a) => {
            let mut r = selftest::run_selftests(a.seed);
            if a.trials != STIFF_TRIALS {
                r.checks.retain(|c| !c.name.contains("random matrices"));
                r.checks.extend(
                    selftest::order_checks(a.trials, a.seed)
                        .into_iter()
                        .filter(|c| c.name.contains("random matrices")),
                );
            }
            emit_report(a.out.as_deref(), "selftest", &r)
        }
        Command::BuildReference {
            problem,
            steps,
            cache_dir,
        } => {
            let p = problem.build();
            if p.has_exact() {
                bail!("{problem} has a closed-form solution and needs no reference");
            }
            let cache = ReferenceCache::new(resolve_cache_dir(cache_dir.as_deref()));
            let steps = steps.unwrap_or_else(|| default_reference_steps(problem));
            eprintln!(
                "building {problem} reference with {steps} steps in {} (override with --cache-dir or {CACHE_DIR_ENV})",
                cache.dir().display()
            );
            let b = experiment::build_reference(problem, steps, &cache, &Default::default())?;
            println!(
                "{}: doubling change {:e}, {:.1} s",
                b.path.display(),
                b.file.doubling_change,
                b.wall_seconds
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_ranges_double() {
        assert_eq!(parse_steps("4..256").unwrap(), vec![4, 8, 16, 32, 64, 128, 256]);
        assert_eq!(parse_steps("16, 32,48").unwrap(), vec![16, 32, 48]);
        assert!(parse_steps("0..8").is_err());
    }

    #[test]
    fn fractional_exponent_tolerances() {
        assert_eq!(parse_tol("1e-4").unwrap(), 1e-4);
        assert!((parse_tol("1e-4.5").unwrap() - 10f64.powf(-4.5)).abs() < 1e-20);
        assert!(parse_tol("abc").is_err());
    }
}
