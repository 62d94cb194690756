use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{IntegratorError, ReducedTableau};
use crate::phi::{phi_dense, phi_taylor_coefficient};

pub const CONDITION_TOL: f64 = 1e-12;
pub const STIFF_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub passed: bool,
}

impl ConditionCheck {
    fn new(name: &'static str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let residual = (lhs - rhs).abs();
        Self {
            name,
            lhs,
            rhs,
            residual,
            passed: residual <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalReport {
    pub c2: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub checks: Vec<ConditionCheck>,
}

impl ClassicalReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn two_stage(tab: &ReducedTableau) -> Result<(f64, &super::PhiPoly), IntegratorError> {
    tab.validate()?;
    if tab.stages() != 2 {
        return Err(IntegratorError::InvalidTableau(format!(
            "order conditions need a two-stage tableau, got {} stages",
            tab.stages()
        )));
    }
    Ok((tab.nodes[0], &tab.b[0]))
}

/// Fourth-order conditions on the Taylor coefficients
/// `b_2(z) = beta_0 + beta_1 z + O(z^2)`.
pub fn check_classical_conditions(tab: &ReducedTableau) -> Result<ClassicalReport, IntegratorError> {
    let (c, b2) = two_stage(tab)?;
    let beta0 = b2.taylor(0);
    let beta1 = b2.taylor(1);
    let checks = vec![
        ConditionCheck::new("beta0 c^2/2 = 1/6", beta0 * c * c / 2.0, 1.0 / 6.0, CONDITION_TOL),
        ConditionCheck::new("beta0 c^3/6 = 1/24", beta0 * c.powi(3) / 6.0, 1.0 / 24.0, CONDITION_TOL),
        ConditionCheck::new("beta1 c^2/2 = 1/24", beta1 * c * c / 2.0, 1.0 / 24.0, CONDITION_TOL),
    ];
    Ok(ClassicalReport {
        c2: c,
        beta0,
        beta1,
        checks,
    })
}

/// `(||b_2(Z) c^2 - 2 phi_3(Z)||_F, max(1, ||2 phi_3(Z)||_F))`.
pub fn stiff_residuals_at(tab: &ReducedTableau, z: &DMatrix<f64>) -> Result<(f64, f64), IntegratorError> {
    let (c, b2) = two_stage(tab)?;
    let table = phi_dense(b2.max_index().max(3), z)?;
    let lhs = b2.eval_matrix(&table) * (c * c);
    let rhs = table.get(3) * 2.0;
    Ok(((lhs - &rhs).norm(), rhs.norm().max(1.0)))
}

/// `2 [z^j] phi_3 - c^2 [z^j] b_2`: Taylor mismatch in the first stiff condition.
pub fn stiff_taylor_mismatch(tab: &ReducedTableau, j: usize) -> Result<f64, IntegratorError> {
    let (c, b2) = two_stage(tab)?;
    Ok(2.0 * phi_taylor_coefficient(3, j) - c * c * b2.taylor(j))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffTrial {
    pub size: usize,
    pub residual: f64,
    pub scale: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffReport {
    pub trials: Vec<StiffTrial>,
    /// `|b_2(0) c^3 - 6 phi_4(0)|`.
    pub residual_origin: f64,
    pub passed_origin: bool,
}

impl StiffReport {
    pub fn passed_matrix(&self) -> bool {
        self.trials.iter().all(|t| t.passed)
    }

    pub fn passed(&self) -> bool {
        self.passed_matrix() && self.passed_origin
    }

    pub fn max_scaled_residual(&self) -> f64 {
        self.trials.iter().map(|t| t.residual / t.scale).fold(0.0, f64::max)
    }
}

/// Random argument: `-sigma (S + delta I) + sigma eps E` with `S` symmetric
/// positive semidefinite and `E` a small nonnormal perturbation whose
/// spectral norm stays below `delta`, so all eigenvalues have negative real part.
pub fn random_stable_matrix(rng: &mut impl Rng, size: usize) -> DMatrix<f64> {
    let n = size as f64;
    let b = DMatrix::from_fn(size, size, |_, _| rng.gen_range(-1.0..1.0));
    let s = &b * b.transpose() / n;
    let e = DMatrix::from_fn(size, size, |_, _| rng.gen_range(-1.0..1.0) / n.sqrt());
    let sigma = 10f64.powf(rng.gen_range(-1.0..2.0));
    let delta = rng.gen_range(0.2..1.0);
    let eps = 0.05;
    (s + DMatrix::identity(size, size) * delta) * (-sigma) + e * (sigma * eps)
}

/// Stiff conditions on `trials` seeded random matrices of size 5..=30 and
/// the scalar condition at the origin.
pub fn check_stiff_conditions(tab: &ReducedTableau, trials: usize, seed: u64) -> Result<StiffReport, IntegratorError> {
    let (c, b2) = two_stage(tab)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let size = rng.gen_range(5..=30);
        let z = random_stable_matrix(&mut rng, size);
        let (residual, scale) = stiff_residuals_at(tab, &z)?;
        out.push(StiffTrial {
            size,
            residual,
            scale,
            passed: residual <= STIFF_TOL * scale,
        });
    }
    let residual_origin = (b2.taylor(0) * c.powi(3) - 6.0 * phi_taylor_coefficient(4, 0)).abs();
    Ok(StiffReport {
        trials: out,
        residual_origin,
        passed_origin: residual_origin <= STIFF_TOL,
    })
}
