//! Exponential Rosenbrock integrators with Krylov phi-function evaluation.
//!
//! The main entry points are [`stepcontrol::integrate_fixed`] and
//! [`stepcontrol::integrate_adaptive`], driven by a [`model::OdeProblem`] and
//! an [`integrators::SchemeId`].

pub mod integrators;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod oracle;
pub mod phi;
pub mod problems;
pub mod stepcontrol;

pub use integrators::{SchemeId, StepOutput};
pub use model::OdeProblem;
pub use operator::Operator;
pub use phi::PhiBackend;
pub use problems::ProblemId;
pub use stepcontrol::{
    error_max_norm, integrate_adaptive, integrate_fixed, ControllerConfig, IntegrationResult, SolverOptions,
};
