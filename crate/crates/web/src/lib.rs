//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function returns plain numbers or a JSON string so the page
//! needs no bundler. The same functions are usable natively for testing.

use exprb::phi::phi_scalar;
use exprb::{integrate_adaptive, integrate_fixed, ControllerConfig, OdeProblem, ProblemId, SchemeId, SolverOptions};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn max_abs_diff(p: &OdeProblem, a: &[f64], b: &[f64]) -> f64 {
    let r = p.solution_components.clone();
    a[r.clone()]
        .iter()
        .zip(&b[r])
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Samples `z, phi_0(z), ..., phi_{k_max}(z)` at `samples` evenly spaced
/// points, flattened row by row.
#[wasm_bindgen]
pub fn phi_curves(k_max: usize, z_min: f64, z_max: f64, samples: usize) -> Vec<f64> {
    let samples = samples.max(2);
    let mut out = Vec::with_capacity(samples * (k_max + 2));
    for i in 0..samples {
        let z = z_min + (z_max - z_min) * i as f64 / (samples - 1) as f64;
        out.push(z);
        out.extend((0..=k_max).map(|k| phi_scalar(k, z)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoRow {
    pub scheme: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub error: Option<f64>,
    pub order: Option<f64>,
    pub wall_seconds: f64,
    pub matvecs: usize,
}

fn parse_problem(name: &str) -> Result<(ProblemId, OdeProblem), String> {
    let id: ProblemId = name.parse::<ProblemId>().map_err(|e| e.to_string())?;
    Ok((id, id.build()))
}

fn parse_schemes(list: &str) -> Result<Vec<SchemeId>, String> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<SchemeId>().map_err(|e| e.to_string()))
        .collect()
}

/// Fixed-step errors at the final time for `N = n_min, 2 n_min, ..., n_max`.
/// Only problems with a closed-form solution are offered, since the page
/// has no reference cache.
pub fn convergence_rows(problem: &str, schemes: &str, n_min: usize, n_max: usize) -> Result<Vec<DemoRow>, String> {
    let (id, p) = parse_problem(problem)?;
    let exact = p
        .exact(p.t_end)
        .ok_or_else(|| format!("{id} has no closed-form solution; use the exprb-bench CLI with a cached reference"))?;
    if n_min == 0 || n_min > n_max {
        return Err(format!("bad step range {n_min}..{n_max}"));
    }
    let steps: Vec<usize> = std::iter::successors(Some(n_min), |n| n.checked_mul(2))
        .take_while(|&n| n <= n_max)
        .collect();
    let mut rows = Vec::new();
    for scheme in parse_schemes(schemes)? {
        let mut prev: Option<(usize, f64)> = None;
        for &n in &steps {
            let row = match integrate_fixed(&p, scheme, n, &SolverOptions::default()) {
                Ok(r) => {
                    let e = max_abs_diff(&p, r.u_final.as_slice(), exact.as_slice());
                    let order = prev.map(|(pn, pe)| (pe / e).ln() / (n as f64 / pn as f64).ln());
                    prev = Some((n, e));
                    DemoRow {
                        scheme: scheme.to_string(),
                        n,
                        error: Some(e),
                        order,
                        wall_seconds: r.wall_time_seconds,
                        matvecs: r.total_matvecs,
                    }
                }
                Err(_) => {
                    prev = None;
                    DemoRow {
                        scheme: scheme.to_string(),
                        n,
                        error: None,
                        order: None,
                        wall_seconds: 0.0,
                        matvecs: 0,
                    }
                }
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoTrace {
    pub scheme: String,
    pub tol: f64,
    pub accepted: usize,
    pub rejected: usize,
    /// Start time of each accepted step.
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub err_estimate: Vec<f64>,
}

/// Accepted step sizes of one adaptive run with `ATOL = RTOL = tol`.
pub fn adaptive_trace(problem: &str, scheme: &str, tol: f64) -> Result<DemoTrace, String> {
    let (_, p) = parse_problem(problem)?;
    let scheme: SchemeId = scheme.trim().parse::<SchemeId>().map_err(|e| e.to_string())?;
    let r = integrate_adaptive(&p, scheme, &ControllerConfig::with_tol(tol), &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    let t = r
        .step_sizes
        .iter()
        .scan(p.t0, |t, h| {
            let start = *t;
            *t += h;
            Some(start)
        })
        .collect();
    Ok(DemoTrace {
        scheme: scheme.to_string(),
        tol,
        accepted: r.n_accepted,
        rejected: r.n_rejected,
        t,
        h: r.step_sizes,
        err_estimate: r.error_estimates,
    })
}

fn to_json<T: Serialize>(v: Result<T, String>) -> Result<String, JsValue> {
    v.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// JSON array of convergence rows; see [`convergence_rows`].
#[wasm_bindgen]
pub fn convergence(problem: &str, schemes: &str, n_min: usize, n_max: usize) -> Result<String, JsValue> {
    to_json(convergence_rows(problem, schemes, n_min, n_max))
}

/// JSON object with the step-size history; see [`adaptive_trace`].
#[wasm_bindgen]
pub fn step_trace(problem: &str, scheme: &str, tol: f64) -> Result<String, JsValue> {
    to_json(adaptive_trace(problem, scheme, tol))
}
