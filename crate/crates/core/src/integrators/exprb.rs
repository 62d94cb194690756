use nalgebra::DVector;

use super::{IntegratorError, PhiPoly, ReducedTableau, StepOutput, StepStats};
use crate::model::Linearization;
use crate::phi::{PhiBackend, PhiCombination, PhiStats};

/// One step of an exponential Rosenbrock scheme from `lin.base_state`,
/// together with the embedded solution when the tableau has one.
///
/// `phi_1(c_i h J) F` for every node and `phi_1(h J) F` come out of a single
/// multi-time evaluation; each further stage and each set of final weights
/// cost one more evaluation.
pub fn step_exprb(
    tab: &ReducedTableau,
    lin: &Linearization,
    h: f64,
    backend: &PhiBackend,
) -> Result<StepOutput, IntegratorError> {
    step_impl(tab, lin, h, backend, true)
}

/// Same step without the embedded solution. The last evaluation folds
/// `phi_1(h J) F` into the weighted stage differences, so the first one only
/// has to reach the largest node.
pub fn step_exprb_fixed(
    tab: &ReducedTableau,
    lin: &Linearization,
    h: f64,
    backend: &PhiBackend,
) -> Result<StepOutput, IntegratorError> {
    step_impl(tab, lin, h, backend, false)
}

fn step_impl(
    tab: &ReducedTableau,
    lin: &Linearization,
    h: f64,
    backend: &PhiBackend,
    embedded: bool,
) -> Result<StepOutput, IntegratorError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(IntegratorError::BadStepSize(h));
    }
    tab.validate()?;
    let n = lin.dim();
    let u = &lin.base_state;
    let f = &lin.base_rhs;
    let mut stats = StepStats {
        rhs_evals: 1,
        ..Default::default()
    };
    let mut phi_stats = PhiStats::default();
    let embedded = embedded && tab.b_hat.is_some();

    let mut taus: Vec<f64> = tab.nodes.clone();
    if embedded {
        taus.push(1.0);
    }
    let mut free = if taus.is_empty() {
        Vec::new()
    } else {
        let base = PhiCombination::new(&lin.jacobian, h, vec![DVector::zeros(n), f.clone()])?;
        let (out, st) = backend.evaluate_at(&base, &taus)?;
        phi_stats.absorb(&st);
        out
    };
    let euler_part = if embedded { free.pop() } else { None };

    let mut diffs: Vec<DVector<f64>> = Vec::with_capacity(tab.nodes.len());
    for (i, &c) in tab.nodes.iter().enumerate() {
        let mut stage = u + &free[i] * h;
        if let Some(w) = combine(&tab.a[i], &diffs, n) {
            let req = PhiCombination::new(&lin.jacobian, c * h, w)?;
            let (out, st) = backend.evaluate_at(&req, &[1.0])?;
            phi_stats.absorb(&st);
            stage += &out[0] * h;
        }
        if stage.iter().any(|x| !x.is_finite()) {
            return Err(IntegratorError::NonFiniteStage(i + 2));
        }
        diffs.push(lin.g_difference(&stage)?);
        stats.rhs_evals += 1;
        stats.jacobian_matvecs += 1;
    }

    let mut eval = |w: Vec<DVector<f64>>| -> Result<DVector<f64>, IntegratorError> {
        let req = PhiCombination::new(&lin.jacobian, h, w)?;
        let (mut v, st) = backend.evaluate_at(&req, &[1.0])?;
        phi_stats.absorb(&st);
        Ok(v.pop().expect("tau = 1 output"))
    };
    let (u_next, u_hat) = match euler_part {
        Some(euler_part) => {
            let base = u + &euler_part * h;
            let mut weighted = |weights: &[PhiPoly]| -> Result<DVector<f64>, IntegratorError> {
                Ok(match combine(weights, &diffs, n) {
                    Some(w) => &base + eval(w)? * h,
                    None => base.clone(),
                })
            };
            let u_next = weighted(&tab.b)?;
            let u_hat = weighted(tab.b_hat.as_deref().expect("embedded weights"))?;
            (u_next, Some(u_hat))
        }
        None => {
            let mut w = combine(&tab.b, &diffs, n).unwrap_or_else(|| vec![DVector::zeros(n); 2]);
            if w.len() < 2 {
                w.push(DVector::zeros(n));
            }
            w[1] += f;
            (u + eval(w)? * h, None)
        }
    };
    if u_next.iter().any(|x| !x.is_finite()) {
        return Err(IntegratorError::NonFiniteStage(tab.stages() + 1));
    }
    stats.phi = phi_stats;
    let err_vec = u_hat.as_ref().map(|uh| &u_next - uh);
    Ok(StepOutput {
        u_next,
        u_hat,
        err_vec,
        stats,
    })
}

/// `w_k = sum_j coeff_jk D_j`, or `None` when every coefficient vanishes.
fn combine(polys: &[PhiPoly], diffs: &[DVector<f64>], n: usize) -> Option<Vec<DVector<f64>>> {
    let p = polys.iter().filter(|q| !q.is_zero()).map(|q| q.max_index()).max()?;
    let mut w = vec![DVector::zeros(n); p + 1];
    for (poly, d) in polys.iter().zip(diffs) {
        for (k, &c) in poly.0.iter().enumerate() {
            if c != 0.0 {
                w[k].axpy(c, d, 1.0);
            }
        }
    }
    Some(w)
}
