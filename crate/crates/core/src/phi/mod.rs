//! Phi-functions of scalars and matrices, and actions of phi-function linear
//! combinations `sum_k phi_k(h J) w_k` on vectors.
//!
//! Three evaluation paths are provided:
//!
//! * [`phi_scalar`]: Taylor series for small arguments, upward recurrence
//!   from `exp(z)` otherwise.
//! * [`dense`]: exponentials of augmented block matrices, exact up to the
//!   Padé approximant; intended for small systems and as a reference.
//! * [`krylov`]: Arnoldi projection of the augmented operator with adaptive
//!   substepping in the time-like variable; matrix-free.

pub mod dense;
pub mod expm;
pub mod krylov;
pub mod scalar;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::operator::Operator;

pub use dense::{phi_combination_dense, phi_combination_dense_at, phi_dense, PhiValueTable};
pub use expm::expm;
pub use krylov::{phi_combination_krylov, phi_combination_krylov_at, KrylovConfig, KrylovStats};
pub use scalar::{phi_scalar, phi_scalar_complex, phi_taylor_coefficient};

/// Largest phi index a [`PhiCombination`] may carry by default.
pub const MAX_PHI_INDEX: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhiError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entries in phi-function input")]
    NonFinite,
    #[error("phi index {index} exceeds the configured maximum {max}")]
    TooManyTerms { index: usize, max: usize },
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("evaluation point {0} outside (0, 1]")]
    BadTau(f64),
    #[error("dense backend needs an explicit matrix")]
    NotDense,
    #[error("Krylov approximation did not converge (substep {dt:e} below floor; {stats:?})")]
    KrylovNoConvergence { dt: f64, stats: KrylovStats },
}

/// Request for `sum_{k=0}^{p} phi_k(scale * J) w_k`.
#[derive(Debug, Clone)]
pub struct PhiCombination<'a> {
    pub operator: &'a Operator,
    pub scale: f64,
    pub vectors: Vec<DVector<f64>>,
}

impl<'a> PhiCombination<'a> {
    pub fn new(operator: &'a Operator, scale: f64, vectors: Vec<DVector<f64>>) -> Result<Self, PhiError> {
        Self::with_max_index(operator, scale, vectors, MAX_PHI_INDEX)
    }

    pub fn with_max_index(
        operator: &'a Operator,
        scale: f64,
        vectors: Vec<DVector<f64>>,
        max_index: usize,
    ) -> Result<Self, PhiError> {
        if let Operator::Dense(m) = operator {
            if !m.is_square() {
                return Err(PhiError::NotSquare {
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
        }
        if !scale.is_finite() {
            return Err(PhiError::BadScale(scale));
        }
        if vectors.len() > max_index + 1 {
            return Err(PhiError::TooManyTerms {
                index: vectors.len() - 1,
                max: max_index,
            });
        }
        let n = operator.dim();
        for v in &vectors {
            if v.len() != n {
                return Err(PhiError::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(PhiError::NonFinite);
            }
        }
        Ok(Self {
            operator,
            scale,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    /// Vectors with trailing all-zero entries removed.
    pub(crate) fn trimmed(&self) -> &[DVector<f64>] {
        let mut len = self.vectors.len();
        while len > 0 && self.vectors[len - 1].iter().all(|&x| x == 0.0) {
            len -= 1;
        }
        &self.vectors[..len]
    }
}

/// Work counters accumulated over phi evaluations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhiStats {
    pub calls: usize,
    pub matvecs: usize,
    pub substeps: usize,
    pub max_basis: usize,
}

impl PhiStats {
    pub fn absorb(&mut self, other: &PhiStats) {
        self.calls += other.calls;
        self.matvecs += other.matvecs;
        self.substeps += other.substeps;
        self.max_basis = self.max_basis.max(other.max_basis);
    }
}

/// Strategy for evaluating phi combinations inside the integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiBackend {
    Dense,
    Krylov(KrylovConfig),
    /// Dense when the operator is an explicit matrix of dimension at most
    /// `dense_max_dim`, Krylov otherwise.
    Auto {
        dense_max_dim: usize,
        krylov: KrylovConfig,
    },
}

impl Default for PhiBackend {
    fn default() -> Self {
        PhiBackend::Auto {
            dense_max_dim: 24,
            krylov: KrylovConfig::default(),
        }
    }
}

impl PhiBackend {
    /// Evaluates `sum_k tau^k phi_k(tau * scale * J) w_k` at every `tau`.
    pub fn evaluate_at(
        &self,
        req: &PhiCombination<'_>,
        taus: &[f64],
    ) -> Result<(Vec<DVector<f64>>, PhiStats), PhiError> {
        let use_dense = match self {
            PhiBackend::Dense => true,
            PhiBackend::Krylov(_) => false,
            PhiBackend::Auto { dense_max_dim, .. } => req.operator.as_dense().is_some() && req.dim() <= *dense_max_dim,
        };
        if use_dense {
            let out = phi_combination_dense_at(req, taus)?;
            Ok((
                out,
                PhiStats {
                    calls: 1,
                    ..Default::default()
                },
            ))
        } else {
            let cfg = match self {
                PhiBackend::Krylov(c) | PhiBackend::Auto { krylov: c, .. } => *c,
                PhiBackend::Dense => unreachable!(),
            };
            let (out, st) = phi_combination_krylov_at(req, taus, &cfg)?;
            Ok((
                out,
                PhiStats {
                    calls: 1,
                    matvecs: st.matvecs,
                    substeps: st.substeps,
                    max_basis: st.max_basis_used,
                },
            ))
        }
    }
}

/// Balancing factor for the coupling block of the augmented operator: a
/// power of two bringing the largest `w_k` (k >= 1) to norm in (1/2, 1].
pub(crate) fn coupling_scale(vectors: &[DVector<f64>]) -> f64 {
    let wmax = vectors.iter().skip(1).map(|v| v.norm()).fold(0.0, f64::max);
    if wmax > 0.0 && wmax.is_finite() {
        2f64.powi(-(wmax.log2().ceil() as i32))
    } else {
        1.0
    }
}

/// Exact trailing components `y_j(tau) = tau^j / j!` (j = 0..p-1), divided by `eta`.
pub(crate) fn polynomial_tail(p: usize, tau: f64, eta: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(p);
    let mut term = 1.0;
    for j in 0..p {
        if j > 0 {
            term *= tau / j as f64;
        }
        out.push(term / eta);
    }
    out
}

pub(crate) fn validate_taus(taus: &[f64]) -> Result<(), PhiError> {
    for &t in taus {
        if !(t > 0.0 && t <= 1.0) {
            return Err(PhiError::BadTau(t));
        }
    }
    Ok(())
}

pub(crate) fn ensure_square(z: &DMatrix<f64>) -> Result<(), PhiError> {
    if !z.is_square() {
        return Err(PhiError::NotSquare {
            rows: z.nrows(),
            cols: z.ncols(),
        });
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(PhiError::NonFinite);
    }
    Ok(())
}
