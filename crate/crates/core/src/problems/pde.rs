//! Method-of-lines discretizations of the two parabolic test problems.

use std::sync::Arc;

use nalgebra::DVector;

use crate::model::{OdeProblem, Split};
use crate::operator::CsrMatrix;

/// Uniform interior grid on `[0, 1]` with homogeneous Dirichlet ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub interior: usize,
}

impl Grid1D {
    pub fn new(interior: usize) -> Self {
        Self { interior }
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.interior + 1) as f64
    }

    /// `x_i = i dx` for `i = 1..=M`.
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.interior).map(|i| self.node(i)).collect()
    }

    /// Three-point Laplacian `(u_{i-1} - 2u_i + u_{i+1}) / dx^2`.
    pub fn dirichlet_laplacian(&self) -> CsrMatrix {
        let m = self.interior;
        let s = 1.0 / (self.dx() * self.dx());
        let rows = (0..m)
            .map(|i| {
                let mut row = vec![(i, -2.0 * s)];
                if i > 0 {
                    row.push((i - 1, s));
                }
                if i + 1 < m {
                    row.push((i + 1, s));
                }
                row
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }
}

/// Square grid on `[0, 1]^2` with `points` nodes per direction, boundary
/// included; lexicographic index `(i, j) -> i * points + j`, `i` along x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub points: usize,
}

impl Grid2D {
    pub fn new(points: usize) -> Self {
        assert!(points >= 3);
        Self { points }
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.points - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.points * self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.points + j
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k / self.points, k % self.points);
        (i as f64 * self.dx(), j as f64 * self.dx())
    }

    /// `diffusion * Laplacian + advection * (d/dx + d/dy)`, central
    /// differences, homogeneous Neumann ends by mirrored ghost values.
    pub fn neumann_operator(&self, diffusion: f64, advection: f64) -> CsrMatrix {
        let p = self.points;
        let h = self.dx();
        let lap = diffusion / (h * h);
        let adv = advection / (2.0 * h);
        let mirror_lo = |i: usize| if i == 0 { 1 } else { i - 1 };
        let mirror_hi = |i: usize| if i == p - 1 { p - 2 } else { i + 1 };
        let rows = (0..p * p)
            .map(|k| {
                let (i, j) = (k / p, k % p);
                let (xm, xp) = (self.index(mirror_lo(i), j), self.index(mirror_hi(i), j));
                let (ym, yp) = (self.index(i, mirror_lo(j)), self.index(i, mirror_hi(j)));
                vec![
                    (k, -4.0 * lap),
                    (xm, lap - adv),
                    (xp, lap + adv),
                    (ym, lap - adv),
                    (yp, lap + adv),
                ]
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }
}

/// Number of interior nodes of the 1D parabolic problem.
pub const PARABOLIC_INTERIOR: usize = 199;
/// Nodes per direction of the 2D advection-diffusion-reaction problem.
pub const ADR_POINTS: usize = 101;

fn parabolic_profile(x: f64) -> f64 {
    x * (1.0 - x)
}

/// Source making `x(1 - x) e^t` an exact solution of
/// `u_t - u_xx = 1/(1 + u^2) + source(x, t)`.
pub fn parabolic_source(x: f64, t: f64) -> f64 {
    let q = parabolic_profile(x);
    let et = t.exp();
    let u = q * et;
    u + 2.0 * et - 1.0 / (1.0 + u * u)
}

fn parabolic_source_dt(x: f64, t: f64) -> f64 {
    let q = parabolic_profile(x);
    let et = t.exp();
    let u = q * et;
    let s = 1.0 + u * u;
    u + 2.0 * et + 2.0 * u * u / (s * s)
}

/// Linear part of the 1D semilinear parabolic problem (with the appended
/// time channel, which has a zero row and column).
pub fn parabolic_linear_part() -> CsrMatrix {
    let grid = Grid1D::new(PARABOLIC_INTERIOR);
    let lap = grid.dirichlet_laplacian();
    let m = grid.interior;
    let mut rows: Vec<Vec<(usize, f64)>> = (0..m).map(|i| lap.row(i).collect()).collect();
    rows.push(Vec::new());
    CsrMatrix::from_rows(rows)
}

/// 1D semilinear parabolic problem `u_t = u_xx + 1/(1 + u^2) + source(x, t)`
/// on `(0, 1) x (0, 1]`, Dirichlet ends, 199 interior nodes. The source
/// depends on time, so the state carries `t` as its last component
/// (`t' = 1`); dimension 200.
pub fn semilinear_parabolic_1d() -> OdeProblem {
    let grid = Grid1D::new(PARABOLIC_INTERIOR);
    let m = grid.interior;
    let nodes = Arc::new(grid.nodes());
    let a = Arc::new(parabolic_linear_part());

    let g = {
        let nodes = nodes.clone();
        move |u: &DVector<f64>| {
            let t = u[m];
            DVector::from_fn(m + 1, |i, _| {
                if i == m {
                    1.0
                } else {
                    1.0 / (1.0 + u[i] * u[i]) + parabolic_source(nodes[i], t)
                }
            })
        }
    };
    let g = Arc::new(g);
    let g_jac = {
        let nodes = nodes.clone();
        move |u: &DVector<f64>, v: &[f64], y: &mut [f64]| {
            let t = u[m];
            for i in 0..m {
                let s = 1.0 + u[i] * u[i];
                y[i] = -2.0 * u[i] / (s * s) * v[i] + parabolic_source_dt(nodes[i], t) * v[m];
            }
            y[m] = 0.0;
        }
    };
    let g_jac = Arc::new(g_jac);

    let exact = {
        let nodes = nodes.clone();
        move |t: f64| {
            DVector::from_fn(m + 1, |i, _| {
                if i == m {
                    t
                } else {
                    parabolic_profile(nodes[i]) * t.exp()
                }
            })
        }
    };
    let initial = exact(0.0);

    let rhs = {
        let a = a.clone();
        let g = g.clone();
        move |u: &DVector<f64>| {
            let mut out = g(u);
            let mut au = vec![0.0; m + 1];
            a.apply_into(u.as_slice(), &mut au);
            for (o, x) in out.iter_mut().zip(au) {
                *o += x;
            }
            out
        }
    };
    let jac = {
        let a = a.clone();
        let g_jac = g_jac.clone();
        move |u: &DVector<f64>, v: &[f64], y: &mut [f64]| {
            a.apply_into(v, y);
            let mut gy = vec![0.0; v.len()];
            g_jac(u, v, &mut gy);
            for (yi, gi) in y.iter_mut().zip(gy) {
                *yi += gi;
            }
        }
    };

    OdeProblem::new("parabolic-1d", initial, (0.0, 1.0), rhs)
        .with_jacobian_matvec(jac)
        .with_split(Split {
            linear: a.to_operator(),
            nonlinear: g,
            nonlinear_jacobian: g_jac,
        })
        .with_exact(exact)
        .with_solution_components(0..m)
}

/// Linear part of the 2D advection-diffusion-reaction problem:
/// `0.01 Laplacian + 10 (d/dx + d/dy)` with Neumann ends.
pub fn adr_linear_part() -> CsrMatrix {
    Grid2D::new(ADR_POINTS).neumann_operator(0.01, 10.0)
}

/// Initial profile `0.3 + 256 (x(1-x) y(1-y))^2`.
pub fn adr_initial_value(x: f64, y: f64) -> f64 {
    let b = x * (1.0 - x) * y * (1.0 - y);
    0.3 + 256.0 * b * b
}

/// 2D advection-diffusion-reaction problem
/// `u_t = 0.01 Laplacian u + 10 (u_x + u_y) + 100 u (u - 1/2)(1 - u)` on the
/// unit square, Neumann boundary, 101 x 101 nodes, `t in [0, 0.08]`.
/// The Jacobian is matrix-free.
pub fn adr_2d() -> OdeProblem {
    let grid = Grid2D::new(ADR_POINTS);
    let n = grid.len();
    let a = Arc::new(adr_linear_part());
    let initial = DVector::from_fn(n, |k, _| {
        let (x, y) = grid.coords(k);
        adr_initial_value(x, y)
    });

    let reaction = |u: f64| 100.0 * u * (u - 0.5) * (1.0 - u);
    let reaction_du = |u: f64| 100.0 * (-3.0 * u * u + 3.0 * u - 0.5);

    let g = Arc::new(move |u: &DVector<f64>| u.map(reaction));
    let g_jac = Arc::new(move |u: &DVector<f64>, v: &[f64], y: &mut [f64]| {
        for i in 0..v.len() {
            y[i] = reaction_du(u[i]) * v[i];
        }
    });

    let rhs = {
        let a = a.clone();
        move |u: &DVector<f64>| {
            let mut out = DVector::zeros(n);
            a.apply_into(u.as_slice(), out.as_mut_slice());
            for (o, ui) in out.iter_mut().zip(u.iter()) {
                *o += reaction(*ui);
            }
            out
        }
    };
    let jac = {
        let a = a.clone();
        move |u: &DVector<f64>, v: &[f64], y: &mut [f64]| {
            a.apply_into(v, y);
            for i in 0..v.len() {
                y[i] += reaction_du(u[i]) * v[i];
            }
        }
    };

    OdeProblem::new("adr-2d", initial, (0.0, 0.08), rhs)
        .with_jacobian_matvec(jac)
        .with_split(Split {
            linear: a.to_operator(),
            nonlinear: g,
            nonlinear_jacobian: g_jac,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fd_jacobian_matrix;
    use approx::assert_relative_eq;

    #[test]
    fn grid_spacing() {
        let g = Grid1D::new(199);
        assert_eq!(g.dx(), 1.0 / 200.0);
        assert!((g.dx() * 200.0 - 1.0).abs() < 1e-15);
        let g2 = Grid2D::new(101);
        assert_eq!(g2.len(), 10201);
        assert_eq!(g2.coords(g2.index(3, 7)), (0.03, 0.07));
    }

    #[test]
    fn operator_norms() {
        let a3 = parabolic_linear_part();
        assert_relative_eq!(a3.norm_inf(), 160000.0, max_relative = 1e-12);
        let a4 = adr_linear_part();
        assert_relative_eq!(a4.norm_inf(), 2400.0, max_relative = 1e-12);
    }

    #[test]
    fn neumann_laplacian_conserves_constants() {
        let lap = Grid2D::new(11).neumann_operator(1.0, 0.0);
        assert!(lap.row_sums().iter().all(|s| s.abs() < 1e-9));
        let full = Grid2D::new(11).neumann_operator(0.01, 10.0);
        let mut y = vec![0.0; 121];
        full.apply_into(&vec![0.7; 121], &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn adr_initial_value_at_center() {
        // x(1-x) y(1-y) = 1/16 at the center, so 0.3 + 256/256.
        assert_relative_eq!(adr_initial_value(0.5, 0.5), 1.3, epsilon = 1e-15);
        assert_eq!(adr_initial_value(0.0, 0.4), 0.3);
        let p = adr_2d();
        let g = Grid2D::new(ADR_POINTS);
        assert_relative_eq!(p.initial[g.index(50, 50)], 1.3, epsilon = 1e-15);
    }

    #[test]
    fn parabolic_exact_solution_solves_semidiscrete_system() {
        let p = semilinear_parabolic_1d();
        assert_eq!(p.dim(), 200);
        for t in [0.0, 0.3, 0.77, 1.0] {
            let u = p.exact(t).unwrap();
            let f = p.rhs(&u).unwrap();
            let dudt = DVector::from_fn(200, |i, _| if i == 199 { 1.0 } else { u[i] });
            let err = (f - dudt).amax();
            assert!(err <= 1e-10 * 160000.0_f64.sqrt(), "t={t} err={err}");
        }
        let u1 = p.exact(1.0).unwrap();
        let x = Grid1D::new(199).node(37);
        assert_relative_eq!(u1[36], x * (1.0 - x) * std::f64::consts::E, max_relative = 1e-15);
    }

    #[test]
    fn parabolic_jacobian_matches_finite_differences() {
        let p = semilinear_parabolic_1d();
        let u = p.initial.map(|x| x + 0.01);
        let j = p.jacobian(&u).unwrap().to_dense();
        let fd = fd_jacobian_matrix(&p, &u).unwrap();
        for c in 0..200 {
            let diff = (j.column(c) - fd.column(c)).amax();
            assert!(diff <= 1e-6 * (1.0 + j.column(c).amax()), "column {c}: {diff}");
        }
    }

    #[test]
    fn split_reproduces_rhs() {
        for p in [semilinear_parabolic_1d(), adr_2d()] {
            let split = p.split().unwrap();
            let u = p.initial.map(|x| 0.9 * x + 0.05);
            let f = p.rhs(&u).unwrap();
            let au = split.linear.apply(&u);
            let gu = (split.nonlinear)(&u);
            let r = (&f - au - gu).norm();
            assert!(r <= 1e-12 * (1.0 + f.norm()), "{}: {r}", p.name);
        }
    }
}
