//! Restarted GMRES for matrix-free linear solves.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_iter: usize,
    /// Stop when `||b - A x|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 60,
            max_iter: 3000,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub matvecs: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from the contents of `x`.
pub fn gmres<F>(mut apply: F, b: &[f64], x: &mut [f64], cfg: &GmresConfig) -> GmresOutcome
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    assert_eq!(x.len(), n);
    let m = cfg.restart.max(1);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return GmresOutcome {
            iterations: 0,
            matvecs: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let target = cfg.rel_tol * bnorm;
    let mut matvecs = 0;
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];

    loop {
        apply(x, &mut r);
        matvecs += 1;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        if beta <= target || iterations >= cfg.max_iter {
            return GmresOutcome {
                iterations,
                matvecs,
                relative_residual: beta / bnorm,
                converged: beta <= target,
            };
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            apply(&basis[k], &mut w);
            matvecs += 1;
            iterations += 1;
            for (j, v) in basis.iter().enumerate() {
                let hjk = dot(&w, v);
                hess[j][k] = hjk;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hjk * vi);
            }
            let hnext = norm(&w);
            hess[k + 1][k] = hnext;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= target || hnext == 0.0 || iterations >= cfg.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hess[i][j] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&basis[j]).for_each(|(xi, vi)| *xi += yj * vi);
        }
        if k_used == 0 {
            apply(x, &mut r);
            matvecs += 1;
            let res = r.iter().zip(b).map(|(a, c)| (c - a).powi(2)).sum::<f64>().sqrt();
            return GmresOutcome {
                iterations,
                matvecs,
                relative_residual: res / bnorm,
                converged: res <= target,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 80;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0 + i as f64 * 0.05
            } else if j == i + 1 {
                -1.3
            } else if i == j + 1 {
                -0.4
            } else {
                0.0
            }
        });
        let x_true = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
        let b = &a * &x_true;
        let mut x = vec![0.0; n];
        let cfg = GmresConfig {
            restart: 10,
            ..Default::default()
        };
        let out = gmres(
            |v, y| y.copy_from_slice((&a * DVector::from_column_slice(v)).as_slice()),
            b.as_slice(),
            &mut x,
            &cfg,
        );
        assert!(out.converged);
        assert!(out.relative_residual <= 1e-10);
        let err = (DVector::from_vec(x) - x_true).amax();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let mut x = vec![1.0, 2.0];
        let out = gmres(
            |v, y| y.copy_from_slice(v),
            &[0.0, 0.0],
            &mut x,
            &GmresConfig::default(),
        );
        assert!(out.converged);
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let mut x = vec![0.0; 3];
        let out = gmres(
            |v, y| y.copy_from_slice(v),
            &[1.0, -2.0, 3.0],
            &mut x,
            &GmresConfig::default(),
        );
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!((x[2] - 3.0).abs() < 1e-15);
    }
}
