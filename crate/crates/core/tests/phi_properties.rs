use exprb::oracle::phi_quadrature_oracle;
use exprb::phi::{phi_dense, phi_scalar};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

proptest! {
    #[test]
    fn scalar_recurrence_holds(k in 0usize..4, z in -80.0f64..10.0) {
        let lhs = phi_scalar(k, z);
        let rhs = z * phi_scalar(k + 1, z) + 1.0 / factorial(k);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "k {k} z {z}: {lhs} vs {rhs}");
    }

    #[test]
    fn scalar_values_match_quadrature(k in 1usize..5, z in -50.0f64..5.0) {
        let want = phi_quadrature_oracle(k, z);
        let got = phi_scalar(k, z);
        prop_assert!(((got - want) / want).abs() <= 1e-12, "k {k} z {z}: {got} vs {want}");
    }

    #[test]
    fn normalized_phi_lies_in_unit_interval_and_grows_with_k(z in -40.0f64..0.0) {
        // k! phi_k(z) is a weighted mean of exp((1 - theta) z) whose weight moves towards theta = 1.
        for k in 1..4 {
            let a = phi_scalar(k, z) * factorial(k);
            let b = phi_scalar(k + 1, z) * factorial(k + 1);
            prop_assert!(a > 0.0 && b <= 1.0 + 1e-15);
            prop_assert!(a <= b * (1.0 + 1e-12));
        }
    }

    #[test]
    fn diagonal_matrix_phi_is_elementwise(d in prop::collection::vec(-30.0f64..2.0, 1..8)) {
        let z = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
        let table = phi_dense(4, &z).unwrap();
        for k in 0..=4 {
            for (i, &di) in d.iter().enumerate() {
                let want = phi_scalar(k, di);
                let got = table.get(k)[(i, i)];
                prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-3), "k {k} z {di}");
            }
        }
        prop_assert!(table.recurrence_residual() <= 1e-12);
    }
}

#[test]
fn phi_at_zero_is_reciprocal_factorial() {
    for k in 0..6 {
        assert_eq!(phi_scalar(k, 0.0), 1.0 / factorial(k));
    }
}
