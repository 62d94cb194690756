use std::path::PathBuf;

use exprb::integrators::SchemeId;
use exprb::problems::ProblemId;
use exprb::stepcontrol::{
    error_max_norm, integrate_adaptive, integrate_fixed, ControllerConfig, IntegrationResult, SolverOptions,
};
use exprb::OdeProblem;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{ReferenceCache, ReferenceFile, REFERENCE_SCHEME};
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FixedConvergence,
    AdaptiveSweep,
    StepsizeTrace,
    OrderCheck,
    PhiSelftest,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub problem: ProblemId,
    pub schemes: Vec<SchemeId>,
    pub mode: Mode,
    pub steps: Vec<usize>,
    pub tols: Vec<f64>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub cache_dir: PathBuf,
    pub options: SolverOptions,
}

impl ExperimentSpec {
    pub fn new(problem: ProblemId, mode: Mode) -> Self {
        Self {
            problem,
            schemes: vec![SchemeId::Exprb42],
            mode,
            steps: Vec::new(),
            tols: Vec::new(),
            out: None,
            jobs: 1,
            cache_dir: crate::cache::resolve_cache_dir(None),
            options: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if self.schemes.is_empty() {
            return bad("at least one scheme is required".into());
        }
        if self.jobs == 0 {
            return bad("--jobs must be at least 1".into());
        }
        if self.steps.contains(&0) {
            return bad("step counts must be positive".into());
        }
        if self.steps.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("N values must be strictly increasing: {:?}", self.steps));
        }
        if self.tols.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return bad("tolerances must be positive".into());
        }
        if self.tols.windows(2).any(|w| w[0] <= w[1]) {
            return bad(format!("tolerances must be strictly decreasing: {:?}", self.tols));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, BenchError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| BenchError::InvalidSpec(e.to_string()))
    }
}

/// Where the error at the final time is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSource {
    Exact,
    Cached {
        path: PathBuf,
        steps: usize,
        doubling_change: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Reference {
    pub source: ReferenceSource,
    pub values: DVector<f64>,
}

impl Reference {
    /// Closed-form solution when the problem has one, otherwise the finest cached run.
    pub fn resolve(problem_id: ProblemId, problem: &OdeProblem, cache: &ReferenceCache) -> Result<Self, BenchError> {
        if let Some(values) = problem.exact(problem.t_end) {
            return Ok(Self {
                source: ReferenceSource::Exact,
                values,
            });
        }
        let (path, file) = cache.load_finest(problem_id)?;
        if file.values.len() != problem.dim() || file.t_end != problem.t_end {
            return Err(BenchError::CorruptReference {
                path,
                reason: format!(
                    "stored dim {} / t_end {} do not match the problem ({} / {})",
                    file.values.len(),
                    file.t_end,
                    problem.dim(),
                    problem.t_end
                ),
            });
        }
        Ok(Self {
            source: ReferenceSource::Cached {
                path,
                steps: file.steps,
                doubling_change: file.doubling_change,
            },
            values: file.values,
        })
    }

    /// Max-norm error over the problem's solution components.
    pub fn error(&self, problem: &OdeProblem, u: &DVector<f64>) -> Result<f64, BenchError> {
        Ok(solution_error(problem, u, &self.values)?)
    }
}

fn solution_error(
    problem: &OdeProblem,
    u: &DVector<f64>,
    reference: &DVector<f64>,
) -> Result<f64, exprb::stepcontrol::IntegrationError> {
    let r = problem.solution_components.clone();
    if u.len() != reference.len() {
        return error_max_norm(u, reference);
    }
    error_max_norm(
        &u.rows(r.start, r.len()).into_owned(),
        &reference.rows(r.start, r.len()).into_owned(),
    )
}

mod scheme_text {
    use super::SchemeId;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: &SchemeId, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(s.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<SchemeId, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One fixed-step run. `error` is empty when the run did not complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(with = "scheme_text")]
    pub scheme: SchemeId,
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
    pub error: Option<f64>,
    /// `log(err_prev / err) / log(N / N_prev)` against the previous row of the same scheme.
    pub order: Option<f64>,
    pub wall_seconds: f64,
    pub matvecs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub reference: ReferenceSource,
    /// `(scheme, N, message)` for every run that failed.
    pub failures: Vec<(SchemeId, usize, String)>,
}

impl ConvergenceTable {
    pub fn scheme_rows(&self, scheme: SchemeId) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }

    pub fn row(&self, scheme: SchemeId, n: usize) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.scheme == scheme && r.n == n)
    }

    /// Observed order between the two largest step counts of `scheme`.
    pub fn finest_order(&self, scheme: SchemeId) -> Option<f64> {
        self.scheme_rows(scheme).last().and_then(|r| r.order)
    }
}

/// Observed orders for consecutive rows of the same scheme; rows must be
/// grouped by scheme with `N` increasing.
pub fn fill_orders(rows: &mut [ConvergenceRow]) {
    for i in 0..rows.len() {
        rows[i].order = None;
        if i == 0 || rows[i - 1].scheme != rows[i].scheme {
            continue;
        }
        if let (Some(prev), Some(cur)) = (rows[i - 1].error, rows[i].error) {
            if prev > 0.0 && cur > 0.0 {
                let ratio = rows[i].n as f64 / rows[i - 1].n as f64;
                rows[i].order = Some((prev / cur).ln() / ratio.ln());
            }
        }
    }
}

pub fn run_convergence(spec: &ExperimentSpec) -> Result<ConvergenceTable, BenchError> {
    spec.validate()?;
    if spec.steps.is_empty() {
        return Err(BenchError::InvalidSpec("convergence needs at least one N".into()));
    }
    let problem = spec.problem.build();
    let reference = Reference::resolve(spec.problem, &problem, &ReferenceCache::new(&spec.cache_dir))?;
    let cells: Vec<(SchemeId, usize)> = spec
        .schemes
        .iter()
        .flat_map(|&s| spec.steps.iter().map(move |&n| (s, n)))
        .collect();
    let outcomes: Vec<Result<IntegrationResult, String>> = spec.pool()?.install(|| {
        cells
            .par_iter()
            .map(|&(s, n)| integrate_fixed(&problem, s, n, &spec.options).map_err(|e| e.to_string()))
            .collect()
    });
    let span = problem.t_end - problem.t0;
    let mut rows = Vec::with_capacity(cells.len());
    let mut failures = Vec::new();
    for (&(scheme, n), outcome) in cells.iter().zip(outcomes) {
        let h = span / n as f64;
        match outcome {
            Ok(res) => rows.push(ConvergenceRow {
                scheme,
                n,
                h,
                error: Some(reference.error(&problem, &res.u_final)?),
                order: None,
                wall_seconds: res.wall_time_seconds,
                matvecs: res.total_matvecs,
            }),
            Err(msg) => {
                rows.push(ConvergenceRow {
                    scheme,
                    n,
                    h,
                    error: None,
                    order: None,
                    wall_seconds: 0.0,
                    matvecs: 0,
                });
                failures.push((scheme, n, msg));
            }
        }
    }
    fill_orders(&mut rows);
    Ok(ConvergenceTable {
        rows,
        reference: reference.source,
        failures,
    })
}

/// One adaptive run. A controller failure leaves `error` empty and sets `status`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(with = "scheme_text")]
    pub scheme: SchemeId,
    pub tol: f64,
    pub accepted: usize,
    pub rejected: usize,
    /// Max-norm error at the final time.
    pub error: Option<f64>,
    /// Root-mean-square error at the final time.
    pub error_rms: Option<f64>,
    pub wall_seconds: f64,
    pub matvecs: usize,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub reference: ReferenceSource,
}

/// Fig. 4 style tolerances `10^-4, 10^-4.5, ..., 10^-6`.
pub fn default_sweep_tols() -> Vec<f64> {
    (0..5).map(|k| 10f64.powf(-4.0 - 0.5 * k as f64)).collect()
}

fn adaptive_row(
    problem: &OdeProblem,
    reference: &Reference,
    scheme: SchemeId,
    tol: f64,
    opts: &SolverOptions,
) -> Result<(SweepRow, Option<IntegrationResult>), BenchError> {
    match integrate_adaptive(problem, scheme, &ControllerConfig::with_tol(tol), opts) {
        Ok(res) => {
            let err = reference.error(problem, &res.u_final)?;
            let r = problem.solution_components.clone();
            let diff = res.u_final.rows(r.start, r.len()) - reference.values.rows(r.start, r.len());
            let rms = (diff.norm_squared() / r.len().max(1) as f64).sqrt();
            Ok((
                SweepRow {
                    scheme,
                    tol,
                    accepted: res.n_accepted,
                    rejected: res.n_rejected,
                    error: Some(err),
                    error_rms: Some(rms),
                    wall_seconds: res.wall_time_seconds,
                    matvecs: res.total_matvecs,
                    status: "ok".into(),
                },
                Some(res),
            ))
        }
        Err(e) => Ok((
            SweepRow {
                scheme,
                tol,
                accepted: 0,
                rejected: 0,
                error: None,
                error_rms: None,
                wall_seconds: 0.0,
                matvecs: 0,
                status: e.to_string(),
            },
            None,
        )),
    }
}

pub fn run_adaptive_sweep(spec: &ExperimentSpec) -> Result<SweepTable, BenchError> {
    spec.validate()?;
    let tols = if spec.tols.is_empty() {
        default_sweep_tols()
    } else {
        spec.tols.clone()
    };
    let problem = spec.problem.build();
    let reference = Reference::resolve(spec.problem, &problem, &ReferenceCache::new(&spec.cache_dir))?;
    let cells: Vec<(SchemeId, f64)> = spec
        .schemes
        .iter()
        .flat_map(|&s| tols.iter().map(move |&t| (s, t)))
        .collect();
    let rows = spec.pool()?.install(|| {
        cells
            .par_iter()
            .map(|&(s, t)| adaptive_row(&problem, &reference, s, t, &spec.options).map(|r| r.0))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(SweepTable {
        rows,
        reference: reference.source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    pub t: f64,
    pub h: f64,
    pub err_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub summary: SweepRow,
    pub steps: Vec<TraceStep>,
    /// Every tolerance tried while searching for the target accuracy.
    pub search: Vec<SweepRow>,
    pub reference: ReferenceSource,
}

/// Quarter-decade tolerances from `1e-2` down to `1e-6`.
pub fn trace_search_tols() -> Vec<f64> {
    (8..=24).map(|k| 10f64.powf(-(k as f64) / 4.0)).collect()
}

/// Step-size history of one adaptive run. With `spec.tols` empty the
/// tolerance is chosen from [`trace_search_tols`] so that the achieved
/// max-norm error is closest to `target` on a log scale.
pub fn run_trace(spec: &ExperimentSpec, target: f64) -> Result<StepTrace, BenchError> {
    spec.validate()?;
    let scheme = spec.schemes[0];
    let problem = spec.problem.build();
    let reference = Reference::resolve(spec.problem, &problem, &ReferenceCache::new(&spec.cache_dir))?;
    let mut opts = spec.options;
    opts.record_trajectory = false;

    let mut search = Vec::new();
    let mut best: Option<(f64, SweepRow, IntegrationResult)> = None;
    let candidates = if spec.tols.is_empty() {
        trace_search_tols()
    } else {
        vec![spec.tols[0]]
    };
    let log_target = target.log10();
    for tol in candidates {
        let (row, res) = adaptive_row(&problem, &reference, scheme, tol, &opts)?;
        search.push(row.clone());
        let (Some(err), Some(res)) = (row.error, res) else {
            continue;
        };
        let dist = (err.log10() - log_target).abs();
        if best.as_ref().is_none_or(|b| dist < b.0) {
            best = Some((dist, row, res));
        }
        // Errors shrink with the tolerance; stop half a decade past the target.
        if err.log10() < log_target - 0.5 {
            break;
        }
    }
    let Some((_, summary, res)) = best else {
        return Err(BenchError::NoSuccessfulRun(format!(
            "no adaptive run of {scheme} on {} completed",
            spec.problem
        )));
    };
    let mut t = problem.t0;
    let steps = res
        .step_sizes
        .iter()
        .zip(&res.error_estimates)
        .enumerate()
        .map(|(index, (&h, &e))| {
            t += h;
            TraceStep {
                index,
                t,
                h,
                err_estimate: e,
            }
        })
        .collect();
    Ok(StepTrace {
        summary,
        steps,
        search,
        reference: reference.source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBuild {
    pub path: PathBuf,
    pub file: ReferenceFile,
    pub wall_seconds: f64,
}

/// Integrates with `steps` and `steps / 2` fixed steps and caches the finer
/// result together with the change between the two.
pub fn build_reference(
    problem_id: ProblemId,
    steps: usize,
    cache: &ReferenceCache,
    opts: &SolverOptions,
) -> Result<ReferenceBuild, BenchError> {
    if steps < 2 || !steps.is_multiple_of(2) {
        return Err(BenchError::InvalidSpec(format!(
            "reference step count must be even and at least 2, got {steps}"
        )));
    }
    let problem = problem_id.build();
    let fine = integrate_fixed(&problem, REFERENCE_SCHEME, steps, opts)?;
    let coarse = integrate_fixed(&problem, REFERENCE_SCHEME, steps / 2, opts)?;
    let change = solution_error(&problem, &fine.u_final, &coarse.u_final)?;
    let file = ReferenceFile {
        problem: problem_id,
        scheme: REFERENCE_SCHEME,
        steps,
        t_end: problem.t_end,
        doubling_change: change,
        values: fine.u_final,
    };
    let path = cache.store(&file)?;
    Ok(ReferenceBuild {
        path,
        file,
        wall_seconds: fine.wall_time_seconds + coarse.wall_time_seconds,
    })
}
