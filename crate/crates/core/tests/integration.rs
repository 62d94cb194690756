use exprb::integrators::random_stable_matrix;
use exprb::model::linearize;
use exprb::problems::{linear, ProblemId};
use exprb::{integrate_adaptive, integrate_fixed, ControllerConfig, SchemeId, SolverOptions};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXPONENTIAL: [SchemeId; 4] = [
    SchemeId::ExprbEuler,
    SchemeId::Exprb32,
    SchemeId::Exprb42N,
    SchemeId::Exprb42,
];

fn random_state(rng: &mut ChaCha8Rng, u: &DVector<f64>) -> DVector<f64> {
    u.map(|x| x * (1.0 + 0.1 * rng.gen_range(-1.0..1.0)) + 0.01 * rng.gen_range(-1.0..1.0))
}

#[test]
fn split_problems_reproduce_the_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for id in ProblemId::ALL {
        let p = id.build();
        let Some(split) = p.split() else { continue };
        for _ in 0..5 {
            let u = random_state(&mut rng, &p.initial);
            let f = p.rhs(&u).unwrap();
            let sum = split.linear.apply(&u) + (split.nonlinear)(&u);
            assert!((&f - &sum).amax() <= 1e-10 * f.amax().max(1.0), "{id}");
        }
    }
}

#[test]
fn linearization_remainder_has_zero_derivative_at_the_base_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for id in ProblemId::ALL {
        let p = id.build();
        let base = random_state(&mut rng, &p.initial);
        let lin = linearize(&p, &base).unwrap();
        let dir = DVector::from_fn(p.dim(), |_, _| rng.gen_range(-1.0..1.0));
        // g(u + e d) - g(u) = O(e^2) because J is the exact Jacobian at u.
        let d = |e: f64| lin.g_difference(&(&base + &dir * e)).unwrap().amax();
        let ratio = d(1e-3) / d(5e-4);
        assert!((3.0..=5.0).contains(&ratio), "{id}: ratio {ratio}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_systems_are_integrated_exactly(seed in any::<u64>(), size in 2usize..40, steps in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_stable_matrix(&mut rng, size);
        let u0 = DVector::from_fn(size, |_, _| rng.gen_range(-1.0..1.0));
        let p = linear(m, u0, 0.8);
        let exact = p.exact(0.8).unwrap();
        for s in EXPONENTIAL {
            let r = integrate_fixed(&p, s, steps, &SolverOptions::default()).unwrap();
            let err = (&r.u_final - &exact).amax() / exact.amax().max(p.initial.amax());
            prop_assert!(err <= 1e-10, "{s}: {err:e}");
        }
    }
}

#[test]
fn adaptive_step_count_scales_like_tol_to_minus_one_third() {
    let p = ProblemId::TwoBody.build();
    let tols = [1e-6, 1e-9];
    let counts: Vec<f64> = tols
        .iter()
        .map(|&tol| {
            integrate_adaptive(
                &p,
                SchemeId::Exprb42,
                &ControllerConfig::with_tol(tol),
                &SolverOptions::default(),
            )
            .unwrap()
            .n_accepted as f64
        })
        .collect();
    let slope = (counts[1] / counts[0]).ln() / (tols[0] / tols[1]).ln();
    assert!((0.25..=0.42).contains(&slope), "counts {counts:?}, slope {slope}");
}

#[test]
fn adaptive_runs_meet_their_tolerance_roughly() {
    let p = ProblemId::TwoBody.build();
    let exact = p.exact(p.t_end).unwrap();
    let mut prev = f64::INFINITY;
    for tol in [1e-5, 1e-7, 1e-9] {
        let r = integrate_adaptive(
            &p,
            SchemeId::Exprb42,
            &ControllerConfig::with_tol(tol),
            &SolverOptions::default(),
        )
        .unwrap();
        let err = (&r.u_final - &exact).amax();
        assert!(err < prev, "tol {tol}: {err:e}");
        assert!(err < 1e3 * tol, "tol {tol}: {err:e}");
        prev = err;
    }
}

#[test]
fn gauss_baseline_is_fourth_order_on_the_stiff_problem() {
    let p = ProblemId::Parabolic1d.build();
    let exact = p.exact(p.t_end).unwrap();
    let err = |n: usize| {
        let r = integrate_fixed(&p, SchemeId::Gauss42, n, &SolverOptions::default()).unwrap();
        let c = p.solution_components.clone();
        (r.u_final.rows(c.start, c.len()) - exact.rows(c.start, c.len())).amax()
    };
    let order = (err(16) / err(32)).log2();
    assert!((3.8..=4.2).contains(&order), "{order}");
}
