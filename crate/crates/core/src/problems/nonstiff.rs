use nalgebra::{DMatrix, DVector};

use crate::model::OdeProblem;

/// Planar two-body orbit written as a first-order system
/// `y1' = y3, y2' = y4, y3' = -y1/r^3, y4' = -y2/r^3`, on `t in [0, 10]`,
/// with circular exact solution `(cos t, sin t, -sin t, cos t)`.
pub fn two_body() -> OdeProblem {
    let exact = |t: f64| DVector::from_vec(vec![t.cos(), t.sin(), -t.sin(), t.cos()]);
    OdeProblem::new("two-body", exact(0.0), (0.0, 10.0), |y| {
        // r = 0 produces non-finite values, which the problem's rhs rejects.
        let r2 = y[0] * y[0] + y[1] * y[1];
        let r3 = r2 * r2.sqrt();
        DVector::from_vec(vec![y[2], y[3], -y[0] / r3, -y[1] / r3])
    })
    .with_jacobian_matrix(|y| {
        let (a, b) = (y[0], y[1]);
        let r2 = a * a + b * b;
        let r = r2.sqrt();
        let r3 = r2 * r;
        let r5 = r3 * r2;
        let mut j = DMatrix::zeros(4, 4);
        j[(0, 2)] = 1.0;
        j[(1, 3)] = 1.0;
        j[(2, 0)] = -1.0 / r3 + 3.0 * a * a / r5;
        j[(2, 1)] = 3.0 * a * b / r5;
        j[(3, 0)] = 3.0 * a * b / r5;
        j[(3, 1)] = -1.0 / r3 + 3.0 * b * b / r5;
        j
    })
    .with_exact(exact)
}

/// Van der Pol oscillator `y1' = y2, y2' = (1 - y1^2) y2 - y1`, `y(0) = (2, 0)`,
/// on `t in [0, 2]`. No closed-form solution.
pub fn van_der_pol() -> OdeProblem {
    OdeProblem::new("van-der-pol", DVector::from_vec(vec![2.0, 0.0]), (0.0, 2.0), |y| {
        DVector::from_vec(vec![y[1], (1.0 - y[0] * y[0]) * y[1] - y[0]])
    })
    .with_jacobian_matrix(|y| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0 * y[0] * y[1] - 1.0, 1.0 - y[0] * y[0]]))
}

/// Scalar Riccati equation `u' = u^2`, `u(0) = 1`, exact `1/(1 - t)`, on `[0, 1/2]`.
pub fn riccati() -> OdeProblem {
    OdeProblem::new("riccati", DVector::from_element(1, 1.0), (0.0, 0.5), |u| {
        u.map(|x| x * x)
    })
    .with_jacobian_matrix(|u| DMatrix::from_element(1, 1, 2.0 * u[0]))
    .with_exact(|t| DVector::from_element(1, 1.0 / (1.0 - t)))
}

/// Constant-coefficient linear system `u' = M u` on `[0, t_end]`.
pub fn linear(m: DMatrix<f64>, initial: DVector<f64>, t_end: f64) -> OdeProblem {
    assert!(m.is_square() && m.nrows() == initial.len());
    let mj = m.clone();
    let me = m.clone();
    let u0 = initial.clone();
    OdeProblem::new("linear", initial, (0.0, t_end), move |u| &m * u)
        .with_jacobian_matrix(move |_| mj.clone())
        .with_exact(move |t| crate::phi::expm(&(&me * t)) * &u0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fd_jacobian_matrix, ModelError};
    use approx::assert_relative_eq;

    #[test]
    fn two_body_exact_solution_satisfies_ode() {
        let p = two_body();
        assert_eq!(p.exact(0.0).unwrap(), DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]));
        assert_eq!(p.initial, p.exact(0.0).unwrap());
        for t in [0.3, 1.7, 4.0, 9.2] {
            let y = p.exact(t).unwrap();
            let dydt = DVector::from_vec(vec![-t.sin(), t.cos(), -t.cos(), -t.sin()]);
            assert_relative_eq!(p.rhs(&y).unwrap(), dydt, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_body_singularity_is_rejected() {
        let p = two_body();
        assert_eq!(
            p.rhs(&DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0])).unwrap_err(),
            ModelError::NonFiniteRhs
        );
    }

    #[test]
    fn van_der_pol_values() {
        let p = van_der_pol();
        let y = DVector::from_vec(vec![2.0, 0.0]);
        assert_eq!(p.rhs(&y).unwrap(), DVector::from_vec(vec![0.0, -2.0]));
        let j = p.jacobian(&y).unwrap();
        assert_eq!(
            j.as_dense().unwrap(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -3.0])
        );
        let fd = fd_jacobian_matrix(&p, &y).unwrap();
        assert_relative_eq!(&fd, j.as_dense().unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        for p in [two_body(), van_der_pol(), riccati()] {
            for shift in [0.0, 0.05, -0.1] {
                let u = p.initial.map(|x| x + shift);
                let j = p.jacobian(&u).unwrap().to_dense();
                let fd = fd_jacobian_matrix(&p, &u).unwrap();
                assert_relative_eq!(j, fd, epsilon = 1e-5);
            }
        }
    }
}
