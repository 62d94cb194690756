//! Matrix-free evaluation of `sum_k tau^k phi_k(tau h J) w_k`.
//!
//! The combination is the first block of `exp(tau A~) [w_0; e_1/eta]` where
//!
//! ```text
//!        [ h J   eta w_1  eta w_2 ... eta w_p ]
//!   A~ = [  0       K                         ]
//! ```
//!
//! and `K` is the `p x p` lower shift. The interval `tau in [0, 1]` is covered
//! by substeps; each substep projects `exp(dt A~)` onto a Krylov space built
//! by Arnoldi from the current augmented state. The basis grows (at fixed
//! checkpoints) until the a posteriori estimate
//! `beta * dt * h_{m+1,m} |e_m^T phi_1(dt H_m) e_1|` meets `tol * dt * beta`;
//! once `max_basis` is reached the substep is shrunk instead, reusing the
//! basis. The polynomial tail of the augmented state is reset to its exact
//! value after every substep.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};

use super::expm::expm;
use super::{coupling_scale, polynomial_tail, validate_taus, PhiCombination, PhiError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    pub max_basis: usize,
    /// Relative tolerance per unit of `tau`.
    pub tol: f64,
    pub min_substeps: usize,
    /// Second Gram-Schmidt pass whenever the first loses more than 30% of
    /// the vector's norm.
    pub reorthogonalize: bool,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            max_basis: 30,
            tol: 1e-12,
            min_substeps: 1,
            reorthogonalize: true,
        }
    }
}

impl KrylovConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KrylovStats {
    pub matvecs: usize,
    pub substeps: usize,
    pub rejected_substeps: usize,
    pub max_basis_used: usize,
}

const DT_FLOOR: f64 = 1e-13;

/// Basis sizes at which the error estimate is evaluated: every size up to
/// 4, then roughly geometric growth, and always `max_basis`.
fn is_checkpoint(m: usize, max_basis: usize) -> bool {
    const SIZES: [usize; 15] = [6, 8, 10, 12, 15, 18, 22, 27, 33, 40, 48, 58, 70, 85, 100];
    m == max_basis || m <= 4 || SIZES.contains(&m) || (m > 100 && m.is_multiple_of(20))
}

/// The augmented operator `A~` on `R^{n+p}`.
struct Augmented<'r, 'a> {
    req: &'r PhiCombination<'a>,
    w: &'r [DVector<f64>],
    eta: f64,
    n: usize,
    p: usize,
}

impl Augmented<'_, '_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        self.req.operator.apply_into(&x[..n], &mut y[..n]);
        let h = self.req.scale;
        for v in &mut y[..n] {
            *v *= h;
        }
        for j in 0..self.p {
            let c = self.eta * x[n + j];
            if c != 0.0 {
                for (yi, wi) in y[..n].iter_mut().zip(self.w[j + 1].iter()) {
                    *yi += c * wi;
                }
            }
        }
        if self.p > 0 {
            y[n] = 0.0;
            for j in 1..self.p {
                y[n + j] = x[n + j - 1];
            }
        }
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Classical Gram-Schmidt against the first `k` columns of `basis`, adding
/// the coefficients to column `k - 1` of `hess`. Returns the norm of the
/// remainder.
fn orthogonalize(basis: &DMatrix<f64>, k: usize, v: &mut [f64], hess: &mut DMatrix<f64>) -> f64 {
    let dim = v.len();
    let cols = &basis.as_slice()[..k * dim];
    let mut coeffs = [0.0; 128];
    let coeffs: &mut [f64] = if k <= coeffs.len() {
        &mut coeffs[..k]
    } else {
        &mut vec![0.0; k][..]
    };
    for (c, col) in coeffs.iter_mut().zip(cols.chunks_exact(dim)) {
        *c = dot(col, v);
    }
    for (&c, col) in coeffs.iter().zip(cols.chunks_exact(dim)) {
        axpy(-c, col, v);
    }
    for (j, c) in coeffs.iter().enumerate() {
        hess[(j, k - 1)] += c;
    }
    dot(v, v).sqrt()
}

thread_local! {
    static BASIS: RefCell<DMatrix<f64>> = RefCell::new(DMatrix::zeros(0, 0));
}

/// Per-thread basis storage, reused across calls of the same shape.
fn take_basis(rows: usize, cols: usize) -> DMatrix<f64> {
    let cached = BASIS.with(|b| std::mem::replace(&mut *b.borrow_mut(), DMatrix::zeros(0, 0)));
    if cached.shape() == (rows, cols) {
        cached
    } else {
        DMatrix::zeros(rows, cols)
    }
}

fn return_basis(basis: DMatrix<f64>) {
    BASIS.with(|b| *b.borrow_mut() = basis);
}

/// Returns `(exp(dt H_m) e_1, estimate / beta)`.
fn project(hess: &DMatrix<f64>, m: usize, dt: f64, breakdown: bool) -> (DVector<f64>, f64) {
    let mut big = DMatrix::<f64>::zeros(m + 1, m + 1);
    big.view_mut((0, 0), (m, m))
        .copy_from(&(hess.view((0, 0), (m, m)) * dt));
    if !breakdown {
        big[(m, m - 1)] = dt * hess[(m, m - 1)];
    }
    let e = expm(&big);
    let y = e.view((0, 0), (m, 1)).column(0).into_owned();
    (y, e[(m, 0)].abs())
}

/// `sum_k phi_k(h J) w_k` by the adaptive Krylov method.
pub fn phi_combination_krylov(
    req: &PhiCombination<'_>,
    cfg: &KrylovConfig,
) -> Result<(DVector<f64>, KrylovStats), PhiError> {
    let (mut out, stats) = phi_combination_krylov_at(req, &[1.0], cfg)?;
    Ok((out.remove(0), stats))
}

/// `sum_k tau^k phi_k(tau h J) w_k` for every requested `tau` in (0, 1],
/// computed in a single sweep over `tau`.
pub fn phi_combination_krylov_at(
    req: &PhiCombination<'_>,
    taus: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<DVector<f64>>, KrylovStats), PhiError> {
    validate_taus(taus)?;
    if req.scale.is_nan() || req.scale <= 0.0 {
        return Err(PhiError::BadScale(req.scale));
    }
    let n = req.dim();
    let mut stats = KrylovStats::default();
    let w = req.trimmed();
    if w.is_empty() {
        return Ok((vec![DVector::zeros(n); taus.len()], stats));
    }
    let p = w.len() - 1;
    let eta = coupling_scale(w);
    let aug = Augmented { req, w, eta, n, p };
    let dim = n + p;
    let max_basis = cfg.max_basis.clamp(2, dim.max(2));

    let mut targets: Vec<f64> = taus.to_vec();
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    targets.dedup();
    let mut results: Vec<DVector<f64>> = Vec::with_capacity(targets.len());

    let mut state = vec![0.0; dim];
    state[..n].copy_from_slice(w[0].as_slice());
    if p > 0 {
        state[n] = 1.0 / eta;
    }

    let mut basis = take_basis(dim, max_basis + 1);
    let mut v = vec![0.0; dim];
    let mut hess = DMatrix::<f64>::zeros(max_basis + 1, max_basis);
    let mut tau = 0.0;
    let mut dt = 1.0 / cfg.min_substeps.max(1) as f64;
    let mut next = 0;
    let mut first_check = 1;

    while next < targets.len() {
        let target = targets[next];
        dt = dt.min(target - tau);
        let beta = dot(&state, &state).sqrt();
        if beta == 0.0 {
            // Zero state stays zero: remaining outputs vanish.
            while next < targets.len() {
                results.push(DVector::zeros(n));
                next += 1;
            }
            break;
        }

        for (b, x) in basis.as_mut_slice()[..dim].iter_mut().zip(&state) {
            *b = x / beta;
        }
        hess.fill(0.0);
        let mut m = 0;
        let mut shrunk = false;
        let (coeffs, used_dt, exact, est) = loop {
            aug.apply(basis.column(m).as_slice(), &mut v);
            stats.matvecs += 1;
            let vnorm0 = dot(&v, &v).sqrt();
            let mut hnext = orthogonalize(&basis, m + 1, &mut v, &mut hess);
            // Second pass only when the first one cancelled most of the vector.
            if cfg.reorthogonalize && hnext < 0.7 * vnorm0 {
                hnext = orthogonalize(&basis, m + 1, &mut v, &mut hess);
            }
            m += 1;
            stats.max_basis_used = stats.max_basis_used.max(m);
            let breakdown = hnext <= 1e-13 * vnorm0.max(f64::MIN_POSITIVE) || m == dim;
            hess[(m, m - 1)] = hnext;
            if breakdown {
                // Invariant subspace: the projection is exact for any dt.
                let (y, _) = project(&hess, m, target - tau, true);
                break (y, target - tau, true, 0.0);
            }
            let inv = 1.0 / hnext;
            for (b, x) in basis.as_mut_slice()[m * dim..(m + 1) * dim].iter_mut().zip(&v) {
                *b = x * inv;
            }

            if m < first_check || !is_checkpoint(m, max_basis) {
                continue;
            }
            let mut accepted = None;
            loop {
                let (y, est) = project(&hess, m, dt, false);
                if est.is_finite() && est <= cfg.tol * dt {
                    accepted = Some((y, est));
                    break;
                }
                if m < max_basis {
                    break;
                }
                stats.rejected_substeps += 1;
                shrunk = true;
                let ratio = if est.is_finite() && est > 0.0 {
                    (0.9 * cfg.tol * dt / est).powf(1.0 / m as f64)
                } else {
                    0.1
                };
                dt *= ratio.clamp(0.1, 0.5);
                if dt < DT_FLOOR {
                    return Err(PhiError::KrylovNoConvergence { dt, stats });
                }
            }
            if let Some((y, est)) = accepted {
                break (y, dt, false, est);
            }
        };

        // state <- beta * V_m y
        state.iter_mut().for_each(|x| *x = 0.0);
        for (j, c) in coeffs.iter().enumerate() {
            axpy(beta * c, &basis.as_slice()[j * dim..(j + 1) * dim], &mut state);
        }
        tau += used_dt;
        stats.substeps += 1;
        if exact || target - tau <= 1e-14 {
            tau = target;
        }
        state[n..].copy_from_slice(&polynomial_tail(p, tau, eta));
        if tau == target {
            results.push(DVector::from_column_slice(&state[..n]));
            next += 1;
        }
        if !exact {
            let m = coeffs.len();
            dt = if shrunk {
                used_dt
            } else if m == max_basis {
                // Largest substep the full basis is predicted to resolve.
                let ratio = if est > 0.0 {
                    0.9 * (cfg.tol * used_dt / est).powf(1.0 / m as f64)
                } else {
                    2.0
                };
                used_dt * ratio.clamp(1.0, 2.0)
            } else {
                2.0 * used_dt
            };
            // The next substep starts checking just below the size that sufficed here.
            first_check = if shrunk || m == max_basis {
                max_basis
            } else {
                (m * 3 / 4).max(1)
            };
        } else {
            dt = 1.0 - tau;
        }
        dt = dt.max(DT_FLOOR);
    }

    return_basis(basis);

    // Map back to the caller's ordering.
    let out = taus
        .iter()
        .map(|t| {
            let idx = targets.iter().position(|x| x == t).unwrap();
            results[idx].clone()
        })
        .collect();
    Ok((out, stats))
}
