//! ODE problems `u' = F(u)` and their per-step continuous linearization
//! `F(u) = J_n u + g_n(u)` with `J_n = F'(u_n)`.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::operator::Operator;

/// Jacobians of systems up to this size may be materialized.
pub const DENSE_THRESHOLD: usize = 1000;

pub type Rhs = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixAt = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
/// `(u, v, y)`: `y <- J(u) v`.
pub type MatVecAt = Arc<dyn Fn(&DVector<f64>, &[f64], &mut [f64]) + Send + Sync>;
pub type ExactSolution = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state has dimension {got}, problem has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("right-hand side is not finite at the given state")]
    NonFiniteRhs,
    #[error("state is not finite")]
    NonFiniteState,
}

#[derive(Clone)]
pub enum JacobianProvider {
    Matrix(MatrixAt),
    MatVec(MatVecAt),
    FiniteDifference,
}

/// `F(u) = A u + g(u)` with a constant linear part.
#[derive(Clone)]
pub struct Split {
    pub linear: Operator,
    pub nonlinear: Rhs,
    pub nonlinear_jacobian: MatVecAt,
}

#[derive(Clone)]
pub struct OdeProblem {
    pub name: String,
    pub t0: f64,
    pub t_end: f64,
    pub initial: DVector<f64>,
    /// Components compared against references; excludes auxiliary channels
    /// such as an appended time variable.
    pub solution_components: Range<usize>,
    rhs: Rhs,
    jacobian: JacobianProvider,
    split: Option<Split>,
    exact: Option<ExactSolution>,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("t_span", &(self.t0, self.t_end))
            .field("split", &self.split.is_some())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl OdeProblem {
    pub fn new<F>(name: impl Into<String>, initial: DVector<f64>, t_span: (f64, f64), rhs: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        let n = initial.len();
        Self {
            name: name.into(),
            t0: t_span.0,
            t_end: t_span.1,
            initial,
            solution_components: 0..n,
            rhs: Arc::new(rhs),
            jacobian: JacobianProvider::FiniteDifference,
            split: None,
            exact: None,
        }
    }

    pub fn with_jacobian_matrix<J>(mut self, jac: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = JacobianProvider::Matrix(Arc::new(jac));
        self
    }

    pub fn with_jacobian_matvec<J>(mut self, jac: J) -> Self
    where
        J: Fn(&DVector<f64>, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.jacobian = JacobianProvider::MatVec(Arc::new(jac));
        self
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = Some(split);
        self
    }

    pub fn with_exact<E>(mut self, exact: E) -> Self
    where
        E: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn with_solution_components(mut self, range: Range<usize>) -> Self {
        self.solution_components = range;
        self
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn split(&self) -> Option<&Split> {
        self.split.as_ref()
    }

    pub fn jacobian_provider(&self) -> &JacobianProvider {
        &self.jacobian
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact(&self, t: f64) -> Option<DVector<f64>> {
        self.exact.as_ref().map(|e| e(t))
    }

    fn check_state(&self, u: &DVector<f64>) -> Result<(), ModelError> {
        if u.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteState);
        }
        Ok(())
    }

    /// `F(u)`, rejecting non-finite values.
    pub fn rhs(&self, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_state(u)?;
        let f = (self.rhs)(u);
        if f.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteRhs);
        }
        Ok(f)
    }

    /// Raw right-hand side closure (no checks).
    pub fn rhs_fn(&self) -> Rhs {
        self.rhs.clone()
    }

    /// `F'(u)` from the configured provider.
    pub fn jacobian(&self, u: &DVector<f64>) -> Result<Operator, ModelError> {
        self.check_state(u)?;
        let n = self.dim();
        Ok(match &self.jacobian {
            JacobianProvider::Matrix(f) => Operator::Dense(f(u)),
            JacobianProvider::MatVec(f) => {
                let f = f.clone();
                let base = u.clone();
                Operator::matrix_free(n, move |x, y| f(&base, x, y))
            }
            JacobianProvider::FiniteDifference => fd_jacobian(self, u)?,
        })
    }
}

fn fd_increment(ui: f64) -> f64 {
    f64::EPSILON.sqrt() * ui.abs().max(1.0)
}

/// Forward-difference Jacobian, one column per component.
pub fn fd_jacobian_matrix(problem: &OdeProblem, u: &DVector<f64>) -> Result<DMatrix<f64>, ModelError> {
    let f0 = problem.rhs(u)?;
    let n = problem.dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = u.clone();
    for j in 0..n {
        let eps = fd_increment(u[j]);
        probe[j] = u[j] + eps;
        let f1 = problem.rhs(&probe)?;
        probe[j] = u[j];
        jac.column_mut(j).copy_from(&((f1 - &f0) / eps));
    }
    Ok(jac)
}

/// Directional forward difference `J v ~ (F(u + e v) - F(u)) / e`.
/// Non-finite probes surface as NaN entries in the product.
pub fn fd_jacobian_matvec(problem: &OdeProblem, u: &DVector<f64>) -> Result<Operator, ModelError> {
    let f0 = problem.rhs(u)?;
    let rhs = problem.rhs_fn();
    let base = u.clone();
    let unorm = u.norm();
    Ok(Operator::matrix_free(problem.dim(), move |x, y| {
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            y.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let eps = f64::EPSILON.sqrt() * unorm.max(1.0) / xnorm;
        let probe = DVector::from_fn(base.len(), |i, _| base[i] + eps * x[i]);
        let f1 = rhs(&probe);
        for i in 0..y.len() {
            y[i] = (f1[i] - f0[i]) / eps;
        }
    }))
}

/// Finite-difference Jacobian: a full matrix up to [`DENSE_THRESHOLD`],
/// a directional matvec beyond.
pub fn fd_jacobian(problem: &OdeProblem, u: &DVector<f64>) -> Result<Operator, ModelError> {
    if problem.dim() <= DENSE_THRESHOLD {
        fd_jacobian_matrix(problem, u).map(Operator::Dense)
    } else {
        fd_jacobian_matvec(problem, u)
    }
}

/// `J_n`, `u_n`, `F(u_n)` and the nonlinearity `g_n(u) = F(u) - J_n u`.
#[derive(Clone)]
pub struct Linearization {
    pub jacobian: Operator,
    pub base_state: DVector<f64>,
    pub base_rhs: DVector<f64>,
    rhs: Rhs,
}

impl fmt::Debug for Linearization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Linearization")
            .field("jacobian", &self.jacobian)
            .field("dim", &self.base_state.len())
            .finish()
    }
}

impl Linearization {
    pub fn dim(&self) -> usize {
        self.base_state.len()
    }

    /// `g_n(u) = F(u) - J_n u`.
    pub fn g(&self, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let f = self.checked_rhs(u)?;
        Ok(f - self.jacobian.apply(u))
    }

    /// `g_n(u) - g_n(u_n)`, evaluated as `F(u) - F(u_n) - J_n (u - u_n)` to
    /// avoid cancellation between two large `J_n u` terms.
    pub fn g_difference(&self, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let f = self.checked_rhs(u)?;
        let du = u - &self.base_state;
        Ok(f - &self.base_rhs - self.jacobian.apply(&du))
    }

    fn checked_rhs(&self, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        if u.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteState);
        }
        let f = (self.rhs)(u);
        if f.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteRhs);
        }
        Ok(f)
    }
}

/// Continuous linearization of the vector field at `u_n`.
pub fn linearize(problem: &OdeProblem, u_n: &DVector<f64>) -> Result<Linearization, ModelError> {
    let base_rhs = problem.rhs(u_n)?;
    let jacobian = problem.jacobian(u_n)?;
    Ok(Linearization {
        jacobian,
        base_state: u_n.clone(),
        base_rhs,
        rhs: problem.rhs_fn(),
    })
}
