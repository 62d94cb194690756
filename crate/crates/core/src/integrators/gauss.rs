use nalgebra::{DMatrix, DVector};

use super::{IntegratorError, StepOutput, StepStats};
use crate::linalg::{gmres, GmresConfig};
use crate::model::{OdeProblem, DENSE_THRESHOLD};
use crate::operator::Operator;

/// Simplified Newton settings for the implicit baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Increment tolerance in the norm `max_i |dZ_i| / (1 + |u_i|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Inner tolerance for the matrix-free linear solves.
    pub gmres: GmresConfig,
}

impl NewtonConfig {
    pub const KAPPA: f64 = 0.03;

    pub fn for_step_tol(step_tol: f64) -> Self {
        Self {
            tol: Self::KAPPA * step_tol,
            ..Default::default()
        }
    }
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: Self::KAPPA * 1e-10,
            max_iter: 10,
            gmres: GmresConfig::default(),
        }
    }
}

/// Two-stage collocation tableau `(c, A, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussTableau {
    pub c: [f64; 2],
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl GaussTableau {
    pub fn standard() -> Self {
        let r = 3f64.sqrt() / 6.0;
        Self {
            c: [0.5 - r, 0.5 + r],
            a: [[0.25, 0.25 - r], [0.25 + r, 0.25]],
            b: [0.5, 0.5],
        }
    }

    /// Same method with the stages listed in the opposite order.
    pub fn swapped(&self) -> Self {
        Self {
            c: [self.c[1], self.c[0]],
            a: [[self.a[1][1], self.a[1][0]], [self.a[0][1], self.a[0][0]]],
            b: [self.b[1], self.b[0]],
        }
    }

    /// `d = b^T A^{-1}`, so that `u_{n+1} = u_n + d_1 Z_1 + d_2 Z_2`.
    pub fn output_weights(&self) -> [f64; 2] {
        let [[a11, a12], [a21, a22]] = self.a;
        let det = a11 * a22 - a12 * a21;
        let [b1, b2] = self.b;
        [(b1 * a22 - b2 * a21) / det, (-b1 * a12 + b2 * a11) / det]
    }
}

/// One step of the two-stage Gauss–Legendre method.
pub fn step_gauss42(
    problem: &OdeProblem,
    u_n: &DVector<f64>,
    h: f64,
    cfg: &NewtonConfig,
) -> Result<StepOutput, IntegratorError> {
    step_gauss_tableau(&GaussTableau::standard(), problem, u_n, h, cfg)
}

/// Simplified Newton on the stage increments `Z_i = U_i - u_n` with the
/// Jacobian frozen at `u_n`. Small systems factor the `2n x 2n` iteration
/// matrix once per step; large ones use GMRES on it matrix-free.
pub fn step_gauss_tableau(
    tab: &GaussTableau,
    problem: &OdeProblem,
    u_n: &DVector<f64>,
    h: f64,
    cfg: &NewtonConfig,
) -> Result<StepOutput, IntegratorError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(IntegratorError::BadStepSize(h));
    }
    let n = u_n.len();
    let jac = problem.jacobian(u_n)?;
    let mut stats = StepStats::default();
    let solver = if n <= DENSE_THRESHOLD || jac.as_dense().is_some() {
        let j = jac.to_dense();
        if jac.as_dense().is_none() {
            stats.jacobian_matvecs += n;
        }
        let mut m = DMatrix::<f64>::identity(2 * n, 2 * n);
        for bi in 0..2 {
            for bj in 0..2 {
                let coeff = -h * tab.a[bi][bj];
                let mut block = m.view_mut((bi * n, bj * n), (n, n));
                block += &j * coeff;
            }
        }
        Solver::Dense(m.lu())
    } else {
        Solver::Iterative(jac)
    };

    let weights = u_n.map(|x| 1.0 + x.abs());
    let mut z = DVector::<f64>::zeros(2 * n);
    let mut prev_norm = f64::INFINITY;
    for iter in 1..=cfg.max_iter {
        let mut fs = Vec::with_capacity(2);
        for i in 0..2 {
            let stage = u_n + z.rows(i * n, n);
            let f = problem.rhs(&stage)?;
            stats.rhs_evals += 1;
            fs.push(f);
        }
        let mut rhs = -z.clone();
        for i in 0..2 {
            let mut block = rhs.rows_mut(i * n, n);
            for (j, f) in fs.iter().enumerate() {
                block.axpy(h * tab.a[i][j], f, 1.0);
            }
        }
        let dz = match &solver {
            Solver::Dense(lu) => lu.solve(&rhs).ok_or(IntegratorError::SingularIterationMatrix)?,
            Solver::Iterative(jac) => {
                let mut x = vec![0.0; 2 * n];
                let mut tmp = vec![0.0; n];
                let out = gmres(
                    |v, y| {
                        y.copy_from_slice(v);
                        for bj in 0..2 {
                            jac.apply_into(&v[bj * n..(bj + 1) * n], &mut tmp);
                            for bi in 0..2 {
                                let c = h * tab.a[bi][bj];
                                for (yk, tk) in y[bi * n..(bi + 1) * n].iter_mut().zip(&tmp) {
                                    *yk -= c * tk;
                                }
                            }
                        }
                    },
                    rhs.as_slice(),
                    &mut x,
                    &cfg.gmres,
                );
                stats.jacobian_matvecs += 2 * out.matvecs;
                if !out.converged && out.relative_residual > 1e-6 {
                    return Err(IntegratorError::LinearSolver {
                        residual: out.relative_residual,
                    });
                }
                DVector::from_vec(x)
            }
        };
        z += &dz;
        stats.newton_iterations = iter;
        if z.iter().any(|x| !x.is_finite()) {
            return Err(IntegratorError::NewtonFailure { iterations: iter });
        }
        let norm = (0..2 * n).map(|k| dz[k].abs() / weights[k % n]).fold(0.0, f64::max);
        let theta = norm / prev_norm;
        let converged =
            norm <= cfg.tol || (iter >= 2 && theta < 1.0 && theta / (1.0 - theta) * norm <= cfg.tol) || norm <= 1e-14;
        if converged {
            let d = tab.output_weights();
            let u_next = u_n + z.rows(0, n) * d[0] + z.rows(n, n) * d[1];
            return Ok(StepOutput {
                u_next,
                u_hat: None,
                err_vec: None,
                stats,
            });
        }
        if iter >= 2 && theta >= 1.0 {
            return Err(IntegratorError::NewtonFailure { iterations: iter });
        }
        prev_norm = norm;
    }
    Err(IntegratorError::NewtonFailure {
        iterations: cfg.max_iter,
    })
}

enum Solver {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Iterative(Operator),
}
