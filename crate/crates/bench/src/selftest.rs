//! Order-condition, phi-function and linear-exactness checks with a
//! machine-readable report.

use exprb::integrators::{
    check_classical_conditions, check_stiff_conditions, random_stable_matrix, step_exprb, stiff_taylor_mismatch,
    tableau_of, SchemeId,
};
use exprb::model::linearize;
use exprb::oracle::phi_quadrature_oracle;
use exprb::phi::{
    expm, phi_combination_dense, phi_combination_krylov, phi_dense, phi_scalar, KrylovConfig, PhiCombination,
};
use exprb::problems::{linear, riccati};
use exprb::{Operator, PhiBackend};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const STIFF_TRIALS: usize = 50;

pub const PHI_ORACLE_TOL: f64 = 1e-12;
pub const PHI_RECURRENCE_TOL: f64 = 1e-12;
pub const KRYLOV_DENSE_TOL: f64 = 1e-10;
pub const LINEAR_EXACTNESS_TOL: f64 = 1e-11;
pub const BETA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfCheck {
    pub name: String,
    pub expected: Expectation,
    /// Whether the underlying condition held.
    pub held: bool,
    /// `held` matches `expected`.
    pub ok: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SelfCheck {
    fn new(
        name: impl Into<String>,
        expected: Expectation,
        held: bool,
        value: f64,
        tolerance: f64,
        detail: String,
    ) -> Self {
        let ok = held == (expected == Expectation::Pass);
        Self {
            name: name.into(),
            expected,
            held,
            ok,
            value,
            tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestReport {
    pub seed: u64,
    pub checks: Vec<SelfCheck>,
}

impl SelfTestReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn get(&self, name: &str) -> Option<&SelfCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `phi_k(z)` against adaptive quadrature of the integral representation,
/// `k = 1..=4` at `samples` points spread over `[-50, 5]`.
pub fn phi_oracle_error(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..samples {
        // Stratified so both ends of the interval are always covered.
        let lo = -50.0 + 55.0 * i as f64 / samples as f64;
        let z = lo + rng.gen_range(0.0..55.0 / samples as f64);
        for k in 1..=4 {
            let want = phi_quadrature_oracle(k, z);
            let got = phi_scalar(k, z);
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    worst
}

/// `max |phi_k(z) - (z phi_{k+1}(z) + 1/k!)|` over a fixed grid, `k = 0..=3`.
pub fn phi_recurrence_error() -> f64 {
    let mut worst = 0.0f64;
    let mut fact = 1.0;
    for k in 0..=3 {
        if k > 0 {
            fact *= k as f64;
        }
        for i in 0..=120 {
            let z = -60.0 + i as f64 * 0.55;
            let lhs = phi_scalar(k, z);
            let rhs = z * phi_scalar(k + 1, z) + 1.0 / fact;
            worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
        }
    }
    worst
}

/// Relative error of the Krylov evaluation of `sum_k phi_k(hA) w_k` against
/// the dense one on a random stable matrix.
pub fn krylov_vs_dense_error(size: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_stable_matrix(&mut rng, size);
    let op = Operator::Dense(a);
    let vectors: Vec<DVector<f64>> = (0..4)
        .map(|_| DVector::from_fn(size, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    let req = PhiCombination::new(&op, 0.7, vectors).expect("valid request");
    let dense = phi_combination_dense(&req).expect("dense");
    let (kry, _) = phi_combination_krylov(&req, &KrylovConfig::default()).expect("krylov");
    (&kry - &dense).amax() / dense.amax()
}

/// One step of `scheme` on `u' = M u` with a random stable `size x size`
/// matrix, relative to `exp(hM) u0`.
pub fn linear_exactness_error(scheme: SchemeId, size: usize, h: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_stable_matrix(&mut rng, size);
    let u0 = DVector::from_fn(size, |_, _| rng.gen_range(-1.0..1.0));
    let exact = expm(&(&m * h)) * &u0;
    let p = linear(m, u0, h);
    let tab = tableau_of(scheme).expect("exponential scheme");
    let lin = linearize(&p, &p.initial).expect("linearization");
    let out = step_exprb(&tab, &lin, h, &PhiBackend::default()).expect("step");
    (&out.u_next - &exact).norm() / exact.norm()
}

/// Local order from one step of size `h` and `h/2` on the Riccati problem.
pub fn riccati_local_order(scheme: SchemeId, h: f64) -> f64 {
    let p = riccati();
    let tab = tableau_of(scheme).expect("exponential scheme");
    let lin = linearize(&p, &p.initial).expect("linearization");
    let err = |h: f64| {
        let out = step_exprb(&tab, &lin, h, &PhiBackend::Dense).expect("step");
        (out.u_next - p.exact(h).expect("exact")).amax()
    };
    (err(h) / err(h / 2.0)).log2()
}

pub fn order_checks(trials: usize, seed: u64) -> Vec<SelfCheck> {
    let mut out = Vec::new();
    for scheme in [SchemeId::Exprb42, SchemeId::Exprb42N] {
        let tab = tableau_of(scheme).expect("tableau");
        let classical = check_classical_conditions(&tab).expect("two-stage");
        for c in &classical.checks {
            out.push(SelfCheck::new(
                format!("{scheme}: classical {}", c.name),
                Expectation::Pass,
                c.passed,
                c.residual,
                exprb::integrators::CONDITION_TOL,
                format!("lhs {:.17e}, rhs {:.17e}", c.lhs, c.rhs),
            ));
        }
        let beta_res = (classical.beta0 - 16.0 / 27.0)
            .abs()
            .max((classical.beta1 - 4.0 / 27.0).abs());
        out.push(SelfCheck::new(
            format!("{scheme}: beta0 = 16/27, beta1 = 4/27"),
            Expectation::Pass,
            beta_res <= BETA_TOL,
            beta_res,
            BETA_TOL,
            format!("beta0 {:.17e}, beta1 {:.17e}", classical.beta0, classical.beta1),
        ));

        let stiff = check_stiff_conditions(&tab, trials, seed).expect("two-stage");
        let expected = if scheme == SchemeId::Exprb42 {
            Expectation::Pass
        } else {
            Expectation::Fail
        };
        out.push(SelfCheck::new(
            format!("{scheme}: stiff conditions on {trials} random matrices"),
            expected,
            stiff.passed_matrix(),
            stiff.max_scaled_residual(),
            exprb::integrators::STIFF_TOL,
            format!(
                "{} of {} trials within tolerance",
                stiff.trials.iter().filter(|t| t.passed).count(),
                stiff.trials.len()
            ),
        ));
        out.push(SelfCheck::new(
            format!("{scheme}: stiff condition at the origin"),
            Expectation::Pass,
            stiff.passed_origin,
            stiff.residual_origin,
            exprb::integrators::STIFF_TOL,
            String::new(),
        ));
    }
    let tab = tableau_of(SchemeId::Exprb42N).expect("tableau");
    let m2 = stiff_taylor_mismatch(&tab, 2).expect("two-stage");
    let target = 1.0 / 360.0;
    out.push(SelfCheck::new(
        "exprb42n: z^2 mismatch 2[z^2]phi3 - c^2[z^2]b2 = 1/360",
        Expectation::Pass,
        (m2 - target).abs() <= BETA_TOL,
        m2,
        BETA_TOL,
        format!("1/60 - 1/72 = {target:.17e}"),
    ));
    out
}

pub fn phi_checks(seed: u64) -> Vec<SelfCheck> {
    let oracle = phi_oracle_error(200, seed);
    let rec = phi_recurrence_error();
    let kry = krylov_vs_dense_error(40, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let z = random_stable_matrix(&mut rng, 12);
    let table_rec = phi_dense(4, &z)
        .map(|t| t.recurrence_residual())
        .unwrap_or(f64::INFINITY);
    vec![
        SelfCheck::new(
            "phi_k vs quadrature, k = 1..4, 200 points in [-50, 5]",
            Expectation::Pass,
            oracle <= PHI_ORACLE_TOL,
            oracle,
            PHI_ORACLE_TOL,
            "max relative error".into(),
        ),
        SelfCheck::new(
            "scalar recurrence phi_k = z phi_(k+1) + 1/k!",
            Expectation::Pass,
            rec <= PHI_RECURRENCE_TOL,
            rec,
            PHI_RECURRENCE_TOL,
            String::new(),
        ),
        SelfCheck::new(
            "matrix recurrence on a random 12x12 argument",
            Expectation::Pass,
            table_rec <= PHI_RECURRENCE_TOL,
            table_rec,
            PHI_RECURRENCE_TOL,
            String::new(),
        ),
        SelfCheck::new(
            "Krylov vs dense phi combination, n = 40",
            Expectation::Pass,
            kry <= KRYLOV_DENSE_TOL,
            kry,
            KRYLOV_DENSE_TOL,
            String::new(),
        ),
    ]
}

pub fn exactness_checks(seed: u64) -> Vec<SelfCheck> {
    [
        SchemeId::ExprbEuler,
        SchemeId::Exprb32,
        SchemeId::Exprb42N,
        SchemeId::Exprb42,
    ]
    .into_iter()
    .map(|s| {
        let e = linear_exactness_error(s, 50, 0.5, seed);
        SelfCheck::new(
            format!("{s}: one step on u' = Mu equals exp(hM) u0"),
            Expectation::Pass,
            e <= LINEAR_EXACTNESS_TOL,
            e,
            LINEAR_EXACTNESS_TOL,
            "50x50 random stable M, h = 0.5".into(),
        )
    })
    .collect()
}

/// Every check above in one report.
pub fn run_selftests(seed: u64) -> SelfTestReport {
    let mut checks = phi_checks(seed);
    checks.extend(order_checks(STIFF_TRIALS, seed));
    checks.extend(exactness_checks(seed));
    SelfTestReport { seed, checks }
}
