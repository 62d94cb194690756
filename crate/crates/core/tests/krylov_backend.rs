use exprb::integrators::random_stable_matrix;
use exprb::model::linearize;
use exprb::phi::{
    phi_combination_dense, phi_combination_dense_at, phi_combination_krylov, phi_combination_krylov_at, KrylovConfig,
    PhiCombination,
};
use exprb::problems::semilinear_parabolic_1d;
use exprb::Operator;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

/// Error scaled by the larger of the result and the inputs; strongly damped
/// results can be far smaller than the vectors they came from.
fn scaled(a: &DVector<f64>, b: &DVector<f64>, inputs: &[DVector<f64>]) -> f64 {
    let w = inputs.iter().map(|v| v.amax()).fold(0.0, f64::max);
    (a - b).amax() / b.amax().max(w)
}

fn random_request(seed: u64, size: usize, terms: usize) -> (Operator, Vec<DVector<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_stable_matrix(&mut rng, size);
    let vectors = (0..terms)
        .map(|_| DVector::from_fn(size, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    (Operator::Dense(a), vectors)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn krylov_matches_dense(seed in any::<u64>(), size in 5usize..120, terms in 1usize..5, scale in 0.05f64..3.0) {
        let (op, vectors) = random_request(seed, size, terms);
        let req = PhiCombination::new(&op, scale, vectors.clone()).unwrap();
        let dense = phi_combination_dense(&req).unwrap();
        let (kry, stats) = phi_combination_krylov(&req, &KrylovConfig::default()).unwrap();
        let err = scaled(&kry, &dense, &vectors);
        prop_assert!(err <= 1e-10, "error {:e}", err);
        prop_assert!(stats.matvecs > 0);
    }

    #[test]
    fn intermediate_times_match_dense(seed in any::<u64>(), size in 5usize..60) {
        let (op, vectors) = random_request(seed, size, 2);
        let req = PhiCombination::new(&op, 1.5, vectors.clone()).unwrap();
        let taus = [0.25, 0.75, 1.0];
        let dense = phi_combination_dense_at(&req, &taus).unwrap();
        let (kry, _) = phi_combination_krylov_at(&req, &taus, &KrylovConfig::default()).unwrap();
        for (k, d) in kry.iter().zip(&dense) {
            prop_assert!(scaled(k, d, &vectors) <= 1e-10);
        }
    }
}

#[test]
fn krylov_matches_dense_at_200() {
    let (op, vectors) = random_request(7, 200, 4);
    let req = PhiCombination::new(&op, 1.0, vectors).unwrap();
    let dense = phi_combination_dense(&req).unwrap();
    let (kry, _) = phi_combination_krylov(&req, &KrylovConfig::default()).unwrap();
    assert!(rel(&kry, &dense) <= 1e-10);
}

#[test]
fn krylov_matches_dense_on_the_stiff_parabolic_jacobian() {
    let p = semilinear_parabolic_1d();
    let lin = linearize(&p, &p.initial).unwrap();
    let dense_op = Operator::Dense(lin.jacobian.to_dense());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vectors: Vec<DVector<f64>> = (0..4)
        .map(|_| DVector::from_fn(p.dim(), |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    for h in [1.0 / 16.0, 1.0 / 256.0] {
        let dense = phi_combination_dense(&PhiCombination::new(&dense_op, h, vectors.clone()).unwrap()).unwrap();
        let req = PhiCombination::new(&lin.jacobian, h, vectors.clone()).unwrap();
        let (kry, _) = phi_combination_krylov(&req, &KrylovConfig::default()).unwrap();
        assert!(rel(&kry, &dense) <= 1e-8, "h {h}: {:e}", rel(&kry, &dense));
    }
}

#[test]
fn invariant_subspace_is_exact() {
    // A vector in a two-dimensional invariant subspace ends the Arnoldi process early.
    let n = 30;
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| if i == j { -(i as f64 + 1.0) } else { 0.0 });
    let mut v = DVector::zeros(n);
    v[3] = 1.0;
    v[17] = -2.0;
    let op = Operator::Dense(a);
    let req = PhiCombination::new(&op, 0.4, vec![DVector::zeros(n), v]).unwrap();
    let dense = phi_combination_dense(&req).unwrap();
    let (kry, stats) = phi_combination_krylov(&req, &KrylovConfig::default()).unwrap();
    assert!(rel(&kry, &dense) <= 1e-13);
    assert!(stats.max_basis_used <= 4);
}
