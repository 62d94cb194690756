//! Slow reference evaluations used by the test suites and the self-test
//! command. Nothing in the integrators depends on this module.

#![allow(clippy::excessive_precision)]

use num_complex::Complex64;

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = r * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    (kron * r, ((kron - gauss) * r).norm())
}

fn adaptive<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    whole: (Complex64, f64),
    rel_tol: f64,
    depth: usize,
) -> Complex64 {
    let (val, err) = whole;
    if depth == 0 || err <= rel_tol * val.norm() || err < 1e-300 {
        return val;
    }
    let mid = 0.5 * (a + b);
    let left = gk15(f, a, mid);
    let right = gk15(f, mid, b);
    adaptive(f, a, mid, left, rel_tol, depth - 1) + adaptive(f, mid, b, right, rel_tol, depth - 1)
}

/// Adaptive Gauss-Kronrod integral of a complex-valued integrand.
pub fn integrate(f: impl Fn(f64) -> Complex64, a: f64, b: f64, rel_tol: f64) -> Complex64 {
    let whole = gk15(&f, a, b);
    adaptive(&f, a, b, whole, rel_tol, 40)
}

fn inv_factorial(k: usize) -> f64 {
    1.0 / (1..=k).map(|i| i as f64).product::<f64>()
}

/// `phi_k(z) = int_0^1 e^{(1-t) z} t^{k-1}/(k-1)! dt` by quadrature, `k >= 1`.
pub fn phi_quadrature_complex(k: usize, z: Complex64) -> Complex64 {
    assert!(k >= 1, "the integral representation needs k >= 1");
    let c = inv_factorial(k - 1);
    integrate(|t| ((1.0 - t) * z).exp() * (t.powi(k as i32 - 1) * c), 0.0, 1.0, 1e-15)
}

/// Real-argument version of [`phi_quadrature_complex`].
pub fn phi_quadrature_oracle(k: usize, z: f64) -> f64 {
    phi_quadrature_complex(k, Complex64::new(z, 0.0)).re
}
