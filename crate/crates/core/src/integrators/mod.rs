//! One-step maps: exponential Rosenbrock schemes and the two-stage Gauss
//! collocation baseline.

mod conditions;
mod exprb;
mod gauss;
mod tableau;

pub use conditions::{
    check_classical_conditions, check_stiff_conditions, random_stable_matrix, stiff_residuals_at,
    stiff_taylor_mismatch, ClassicalReport, ConditionCheck, StiffReport, StiffTrial, CONDITION_TOL, STIFF_TOL,
};
pub use exprb::{step_exprb, step_exprb_fixed};
pub use gauss::{step_gauss42, step_gauss_tableau, GaussTableau, NewtonConfig};
pub use tableau::{tableau_of, PhiPoly, ReducedTableau, SchemeId};

use nalgebra::DVector;
use thiserror::Error;

use crate::model::ModelError;
use crate::phi::{PhiError, PhiStats};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError {
    #[error("{0} has no reduced exponential tableau")]
    NotTableau(SchemeId),
    #[error("invalid tableau: {0}")]
    InvalidTableau(String),
    #[error("step size must be positive and finite, got {0}")]
    BadStepSize(f64),
    #[error("non-finite value in stage {0}")]
    NonFiniteStage(usize),
    #[error("simplified Newton iteration failed after {iterations} iterations")]
    NewtonFailure { iterations: usize },
    #[error("singular iteration matrix")]
    SingularIterationMatrix,
    #[error("linear solver did not converge (residual {residual:.3e})")]
    LinearSolver { residual: f64 },
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Work done by one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub phi: PhiStats,
    pub rhs_evals: usize,
    pub jacobian_matvecs: usize,
    pub newton_iterations: usize,
}

impl StepStats {
    /// Operator applications: Krylov matvecs plus explicit Jacobian products.
    pub fn matvecs(&self) -> usize {
        self.phi.matvecs + self.jacobian_matvecs
    }

    pub fn absorb(&mut self, other: &StepStats) {
        self.phi.absorb(&other.phi);
        self.rhs_evals += other.rhs_evals;
        self.jacobian_matvecs += other.jacobian_matvecs;
        self.newton_iterations += other.newton_iterations;
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub u_next: DVector<f64>,
    /// Embedded solution, when the scheme has one.
    pub u_hat: Option<DVector<f64>>,
    /// `u_next - u_hat`.
    pub err_vec: Option<DVector<f64>>,
    pub stats: StepStats,
}
