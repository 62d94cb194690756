//! Fixed-step and embedded-error adaptive drivers.

use web_time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use crate::integrators::{
    step_exprb, step_exprb_fixed, step_gauss42, tableau_of, IntegratorError, NewtonConfig, ReducedTableau, SchemeId,
    StepOutput, StepStats,
};
use crate::model::{linearize, OdeProblem};
use crate::phi::PhiBackend;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("number of steps must be at least 1")]
    NoSteps,
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} has no embedded error estimate")]
    NoEmbeddedEstimate(SchemeId),
    #[error("step {step} at t = {t} failed: {source}")]
    StepFailed {
        step: usize,
        t: f64,
        #[source]
        source: IntegratorError,
    },
    #[error("step size {h:.3e} fell below h_min = {h_min:.3e} at t = {t}")]
    StepSizeTooSmall { t: f64, h: f64, h_min: f64 },
    #[error("{rejections} consecutive rejections at t = {t} (last h = {h:.3e})")]
    TooManyRejections { t: f64, h: f64, rejections: usize },
    #[error("dimension mismatch: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// How each step evaluates phi functions and solves implicit stages.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverOptions {
    pub backend: PhiBackend,
    pub newton: NewtonConfig,
    pub record_trajectory: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub atol: f64,
    pub rtol: f64,
    pub safety: f64,
    pub facmin: f64,
    pub facmax: f64,
    pub h_init: Option<f64>,
    /// Defaults to `1e-12 (T - t0)` when `None`.
    pub h_min: Option<f64>,
    /// Defaults to `T - t0` when `None`.
    pub h_max: Option<f64>,
    pub embedded_order: u32,
    pub max_consecutive_rejections: usize,
}

impl ControllerConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            atol: tol,
            rtol: tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        let bad = |m: &str| Err(IntegrationError::InvalidConfig(m.to_string()));
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return bad("atol and rtol must be positive");
        }
        if !(0.0 < self.facmin && self.facmin < 1.0 && self.facmax > 1.0) {
            return bad("need 0 < facmin < 1 < facmax");
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad("safety must lie in (0, 1]");
        }
        if let Some(h) = self.h_init {
            if !(h > 0.0 && h.is_finite()) {
                return bad("h_init must be positive");
            }
        }
        Ok(())
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            atol: 1e-6,
            rtol: 1e-6,
            safety: 0.9,
            facmin: 0.2,
            facmax: 5.0,
            h_init: None,
            h_min: None,
            h_max: None,
            embedded_order: 2,
            max_consecutive_rejections: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationResult {
    pub t_final: f64,
    pub u_final: DVector<f64>,
    pub trajectory: Option<Vec<(f64, DVector<f64>)>>,
    pub n_accepted: usize,
    pub n_rejected: usize,
    /// Accepted step sizes in order.
    pub step_sizes: Vec<f64>,
    /// Scaled error estimate of each accepted step (adaptive runs only).
    pub error_estimates: Vec<f64>,
    pub stats: StepStats,
    pub total_matvecs: usize,
    pub wall_time_seconds: f64,
}

/// `max_i |u_i - reference_i|`.
pub fn error_max_norm(u: &DVector<f64>, reference: &DVector<f64>) -> Result<f64, IntegrationError> {
    if u.len() != reference.len() {
        return Err(IntegrationError::DimensionMismatch {
            expected: reference.len(),
            got: u.len(),
        });
    }
    Ok(u.iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `||err_i / (atol + rtol max(|u_i|, |v_i|))||_RMS`.
pub fn weighted_rms(err: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>, atol: f64, rtol: f64) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(u.iter().zip(v.iter()))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

enum Stepper {
    Exponential(ReducedTableau),
    Gauss,
}

impl Stepper {
    fn new(scheme: SchemeId) -> Self {
        match tableau_of(scheme) {
            Ok(t) => Stepper::Exponential(t),
            Err(_) => Stepper::Gauss,
        }
    }

    fn step(
        &self,
        problem: &OdeProblem,
        u: &DVector<f64>,
        h: f64,
        opts: &SolverOptions,
        estimate: bool,
    ) -> Result<StepOutput, IntegratorError> {
        match self {
            Stepper::Exponential(tab) => {
                let lin = linearize(problem, u)?;
                if estimate {
                    step_exprb(tab, &lin, h, &opts.backend)
                } else {
                    step_exprb_fixed(tab, &lin, h, &opts.backend)
                }
            }
            Stepper::Gauss => step_gauss42(problem, u, h, &opts.newton),
        }
    }
}

/// `n_steps` equal steps over the problem's time span.
pub fn integrate_fixed(
    problem: &OdeProblem,
    scheme: SchemeId,
    n_steps: usize,
    opts: &SolverOptions,
) -> Result<IntegrationResult, IntegrationError> {
    if n_steps == 0 {
        return Err(IntegrationError::NoSteps);
    }
    let start = Instant::now();
    let stepper = Stepper::new(scheme);
    let h = (problem.t_end - problem.t0) / n_steps as f64;
    let mut u = problem.initial.clone();
    let mut stats = StepStats::default();
    let mut trajectory = opts.record_trajectory.then(|| vec![(problem.t0, u.clone())]);
    for step in 0..n_steps {
        let t = problem.t0 + step as f64 * h;
        let out = stepper
            .step(problem, &u, h, opts, false)
            .map_err(|source| IntegrationError::StepFailed { step, t, source })?;
        stats.absorb(&out.stats);
        u = out.u_next;
        if let Some(tr) = trajectory.as_mut() {
            tr.push((problem.t0 + (step + 1) as f64 * h, u.clone()));
        }
    }
    Ok(IntegrationResult {
        t_final: problem.t_end,
        u_final: u,
        trajectory,
        n_accepted: n_steps,
        n_rejected: 0,
        step_sizes: vec![h; n_steps],
        error_estimates: Vec::new(),
        total_matvecs: stats.matvecs(),
        stats,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Automatic first step from two field evaluations, for a method of order `order`.
pub fn initial_step(problem: &OdeProblem, cfg: &ControllerConfig, order: usize, h_max: f64) -> f64 {
    let u0 = &problem.initial;
    let sc = u0.map(|x| cfg.atol + cfg.rtol * x.abs());
    let rms = |v: &DVector<f64>| (v.component_div(&sc).norm_squared() / v.len().max(1) as f64).sqrt();
    let Ok(f0) = problem.rhs(u0) else {
        return 1e-6f64.min(h_max);
    };
    let d0 = rms(u0);
    let d1 = rms(&f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(h_max);
    let u1 = u0 + &f0 * h0;
    let d2 = match problem.rhs(&u1) {
        Ok(f1) => rms(&(f1 - &f0)) / h0,
        Err(_) => f64::INFINITY,
    };
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(1.0 / (order as f64 + 1.0))
    };
    (100.0 * h0).min(h1).min(h_max)
}

/// Embedded-error adaptive integration over the problem's time span.
pub fn integrate_adaptive(
    problem: &OdeProblem,
    scheme: SchemeId,
    cfg: &ControllerConfig,
    opts: &SolverOptions,
) -> Result<IntegrationResult, IntegrationError> {
    cfg.validate()?;
    let tab = tableau_of(scheme).map_err(|_| IntegrationError::NoEmbeddedEstimate(scheme))?;
    if tab.b_hat.is_none() {
        return Err(IntegrationError::NoEmbeddedEstimate(scheme));
    }
    let start = Instant::now();
    let (t0, t_end) = (problem.t0, problem.t_end);
    let span = t_end - t0;
    let h_max = cfg.h_max.unwrap_or(span);
    let h_min = cfg.h_min.unwrap_or(1e-12 * span);
    let exponent = 1.0 / (cfg.embedded_order as f64 + 1.0);
    let stepper = Stepper::Exponential(tab);

    let mut h = cfg
        .h_init
        .unwrap_or_else(|| initial_step(problem, cfg, scheme.order(), h_max))
        .clamp(h_min, h_max);
    let mut t = t0;
    let mut u = problem.initial.clone();
    let mut stats = StepStats::default();
    let mut trajectory = opts.record_trajectory.then(|| vec![(t0, u.clone())]);
    let mut step_sizes = Vec::new();
    let mut error_estimates = Vec::new();
    let mut n_rejected = 0;
    let mut consecutive = 0;
    let end_slack = 1e-14 * span.abs().max(t_end.abs());

    while t_end - t > end_slack {
        let last = t + h >= t_end - end_slack;
        if last {
            h = t_end - t;
        }
        let err = match stepper.step(problem, &u, h, opts, true) {
            Ok(out) => {
                stats.absorb(&out.stats);
                let e = out.err_vec.as_ref().expect("embedded estimate");
                let err = weighted_rms(e, &u, &out.u_next, cfg.atol, cfg.rtol);
                if err <= 1.0 {
                    t = if last { t_end } else { t + h };
                    u = out.u_next;
                    step_sizes.push(h);
                    error_estimates.push(err);
                    consecutive = 0;
                    if let Some(tr) = trajectory.as_mut() {
                        tr.push((t, u.clone()));
                    }
                } else {
                    n_rejected += 1;
                    consecutive += 1;
                }
                err
            }
            Err(_) => {
                n_rejected += 1;
                consecutive += 1;
                f64::INFINITY
            }
        };
        if consecutive > cfg.max_consecutive_rejections {
            return Err(IntegrationError::TooManyRejections {
                t,
                h,
                rejections: consecutive,
            });
        }
        if t_end - t <= end_slack {
            break;
        }
        let fac = if err == 0.0 {
            cfg.facmax
        } else if err.is_finite() {
            (cfg.safety * err.powf(-exponent)).clamp(cfg.facmin, cfg.facmax)
        } else {
            cfg.facmin
        };
        h = (h * fac).min(h_max);
        if h < h_min {
            return Err(IntegrationError::StepSizeTooSmall { t, h, h_min });
        }
    }
    Ok(IntegrationResult {
        t_final: t_end,
        u_final: u,
        trajectory,
        n_accepted: step_sizes.len(),
        n_rejected,
        step_sizes,
        error_estimates,
        total_matvecs: stats.matvecs(),
        stats,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::expm;
    use crate::problems::{linear, riccati, two_body};
    use nalgebra::DMatrix;

    #[test]
    fn max_norm_examples() {
        let r = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(error_max_norm(&r, &r).unwrap(), 0.0);
        let u = DVector::from_vec(vec![1.0, -1.0, 4.0]);
        assert_eq!(error_max_norm(&u, &r).unwrap(), 3.0);
        assert!(error_max_norm(&DVector::zeros(2), &r).is_err());
    }

    #[test]
    fn single_fixed_step_on_linear_problem_is_exact() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]);
        let u0 = DVector::from_vec(vec![1.0, 0.5]);
        let p = linear(m.clone(), u0.clone(), 1.5);
        let exact = expm(&(&m * 1.5)) * &u0;
        let res = integrate_fixed(&p, SchemeId::Exprb42, 1, &SolverOptions::default()).unwrap();
        assert!(error_max_norm(&res.u_final, &exact).unwrap() < 1e-13);
        assert_eq!(res.step_sizes, vec![1.5]);
        assert!(integrate_fixed(&p, SchemeId::Exprb42, 0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn fixed_step_runs_are_deterministic() {
        let p = two_body();
        let opts = SolverOptions {
            record_trajectory: true,
            ..Default::default()
        };
        let a = integrate_fixed(&p, SchemeId::Exprb42N, 40, &opts).unwrap();
        let b = integrate_fixed(&p, SchemeId::Exprb42N, 40, &opts).unwrap();
        assert_eq!(a.u_final, b.u_final);
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.trajectory.unwrap().len(), 41);
    }

    #[test]
    fn zero_field_grows_steps_by_facmax() {
        let p = linear(DMatrix::zeros(2, 2), DVector::from_vec(vec![1.0, 2.0]), 1.0);
        let cfg = ControllerConfig {
            h_init: Some(1e-4),
            ..ControllerConfig::with_tol(1e-6)
        };
        let res = integrate_adaptive(&p, SchemeId::Exprb42, &cfg, &SolverOptions::default()).unwrap();
        assert_eq!(res.n_rejected, 0);
        for w in res.step_sizes.windows(2).take(res.step_sizes.len().saturating_sub(2)) {
            assert!((w[1] / w[0] - 5.0).abs() < 1e-12);
        }
        assert_eq!(res.t_final, 1.0);
        assert!(res.error_estimates.iter().all(|&e| e == 0.0));
        let total: f64 = res.step_sizes.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_accepts_only_controlled_steps() {
        let p = riccati();
        let cfg = ControllerConfig::with_tol(1e-8);
        let res = integrate_adaptive(&p, SchemeId::Exprb42, &cfg, &SolverOptions::default()).unwrap();
        assert!(res.error_estimates.iter().all(|&e| e <= 1.0));
        assert_eq!(res.n_accepted, res.step_sizes.len());
        let err = (res.u_final[0] - 2.0).abs();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn adaptive_rejects_schemes_without_estimate() {
        let p = riccati();
        let cfg = ControllerConfig::default();
        for s in [SchemeId::Gauss42, SchemeId::ExprbEuler] {
            assert_eq!(
                integrate_adaptive(&p, s, &cfg, &SolverOptions::default()).unwrap_err(),
                IntegrationError::NoEmbeddedEstimate(s)
            );
        }
        let bad = ControllerConfig {
            facmin: 2.0,
            ..ControllerConfig::default()
        };
        assert!(matches!(
            integrate_adaptive(&p, SchemeId::Exprb42, &bad, &SolverOptions::default()),
            Err(IntegrationError::InvalidConfig(_))
        ));
    }

    #[test]
    fn persistent_failure_is_reported() {
        let p = riccati();
        let cfg = ControllerConfig {
            h_min: Some(0.4),
            h_init: Some(0.5),
            ..ControllerConfig::with_tol(1e-12)
        };
        let err = integrate_adaptive(&p, SchemeId::Exprb42, &cfg, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, IntegrationError::StepSizeTooSmall { .. }), "{err:?}");
    }
}
