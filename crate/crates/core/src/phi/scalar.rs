//! Scalar phi-functions.

use num_complex::{Complex64, ComplexFloat};

/// Below this modulus the Taylor series is used; above it the recurrence
/// is run upward from `exp(z)`, which is stable once `|z| >= 1`.
pub const TAYLOR_SWITCH: f64 = 1.0;

const TAYLOR_TERMS: usize = 30;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Taylor coefficient of `z^j` in `phi_k(z)`, i.e. `1/(j+k)!`.
pub fn phi_taylor_coefficient(k: usize, j: usize) -> f64 {
    1.0 / factorial(j + k)
}

fn phi_generic<T>(k: usize, z: T) -> T
where
    T: ComplexFloat<Real = f64> + From<f64>,
{
    if z.is_nan() {
        return z;
    }
    if z.abs() < TAYLOR_SWITCH {
        // Horner on sum_j z^j / (j+k)!
        let mut acc: T = <T as From<f64>>::from(0.0);
        for j in (0..TAYLOR_TERMS).rev() {
            acc = acc * z + <T as From<f64>>::from(phi_taylor_coefficient(k, j));
        }
        acc
    } else {
        let mut phi = z.exp();
        let mut inv_fact = 1.0;
        for j in 1..=k {
            phi = (phi - <T as From<f64>>::from(inv_fact)) / z;
            inv_fact /= j as f64;
        }
        phi
    }
}

/// `phi_k(z)` for real `z`.
pub fn phi_scalar(k: usize, z: f64) -> f64 {
    phi_generic(k, z)
}

/// `phi_k(z)` for complex `z`.
pub fn phi_scalar_complex(k: usize, z: Complex64) -> Complex64 {
    phi_generic(k, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn values_at_zero_are_inverse_factorials() {
        assert_eq!(phi_scalar(0, 0.0), 1.0);
        for (k, v) in [(1, 1.0), (2, 0.5), (3, 1.0 / 6.0), (4, 1.0 / 24.0)] {
            assert_relative_eq!(phi_scalar(k, 0.0), v, max_relative = 1e-15);
        }
    }

    #[test]
    fn phi1_closed_form() {
        assert_relative_eq!(phi_scalar(1, 1.0), std::f64::consts::E - 1.0, max_relative = 1e-15);
        for z in [-3.0, -0.7, 0.3, 2.5] {
            let expect = (f64::exp(z) - 1.0) / z;
            assert_relative_eq!(phi_scalar(1, z), expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn continuous_across_switch() {
        for k in 0..5 {
            let below = phi_scalar(k, TAYLOR_SWITCH - 1e-12);
            let above = phi_scalar(k, TAYLOR_SWITCH + 1e-12);
            assert_relative_eq!(below, above, max_relative = 1e-11);
            let below = phi_scalar(k, -TAYLOR_SWITCH + 1e-12);
            let above = phi_scalar(k, -TAYLOR_SWITCH - 1e-12);
            assert_relative_eq!(below, above, max_relative = 1e-11);
        }
    }

    #[test]
    fn nan_propagates() {
        assert!(phi_scalar(2, f64::NAN).is_nan());
    }

    #[test]
    fn complex_matches_real_on_real_axis() {
        for z in [-4.0, -0.5, 0.1, 3.0] {
            let c = phi_scalar_complex(3, Complex64::new(z, 0.0));
            assert_relative_eq!(c.re, phi_scalar(3, z), max_relative = 1e-14);
            assert_eq!(c.im, 0.0);
        }
    }

    #[test]
    fn complex_phi1_closed_form() {
        let z = Complex64::new(-2.0, 3.0);
        let expect = (z.exp() - 1.0) / z;
        let got = phi_scalar_complex(1, z);
        assert!((got - expect).norm() <= 1e-14 * expect.norm());
    }
}
