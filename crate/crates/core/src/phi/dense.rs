use nalgebra::{DMatrix, DVector};

use super::expm::expm;
use super::{coupling_scale, ensure_square, validate_taus, PhiCombination, PhiError};

/// `[phi_0(Z), ..., phi_kmax(Z)]` for a common square argument.
#[derive(Debug, Clone)]
pub struct PhiValueTable {
    argument: DMatrix<f64>,
    values: Vec<DMatrix<f64>>,
}

impl PhiValueTable {
    pub fn max_index(&self) -> usize {
        self.values.len() - 1
    }

    pub fn argument(&self) -> &DMatrix<f64> {
        &self.argument
    }

    pub fn get(&self, k: usize) -> &DMatrix<f64> {
        &self.values[k]
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    /// `max_k ||phi_k - I/k! - Z phi_{k+1}||_F / max(1, ||phi_k||_F)`.
    pub fn recurrence_residual(&self) -> f64 {
        let n = self.argument.nrows();
        let ident = DMatrix::<f64>::identity(n, n);
        let mut inv_fact = 1.0;
        let mut worst = 0.0f64;
        for k in 0..self.max_index() {
            let r = &self.values[k] - &ident * inv_fact - &self.argument * &self.values[k + 1];
            worst = worst.max(r.norm() / self.values[k].norm().max(1.0));
            inv_fact /= (k + 1) as f64;
        }
        worst
    }
}

/// All `phi_k(Z)`, `k <= k_max`, from one exponential of the block matrix
/// `[[Z, I, 0, ..], [0, 0, I, ..], .., [0, .., 0]]` whose first block row is
/// `[e^Z, phi_1(Z), .., phi_kmax(Z)]`.
pub fn phi_dense(k_max: usize, z: &DMatrix<f64>) -> Result<PhiValueTable, PhiError> {
    ensure_square(z)?;
    let n = z.nrows();
    let size = n * (k_max + 1);
    let mut big = DMatrix::<f64>::zeros(size, size);
    big.view_mut((0, 0), (n, n)).copy_from(z);
    for b in 0..k_max {
        for i in 0..n {
            big[(b * n + i, (b + 1) * n + i)] = 1.0;
        }
    }
    let e = expm(&big);
    let values = (0..=k_max).map(|b| e.view((0, b * n), (n, n)).into_owned()).collect();
    Ok(PhiValueTable {
        argument: z.clone(),
        values,
    })
}

/// `sum_k phi_k(h J) w_k` through one exponential of the `(n+p)`-dimensional
/// augmented matrix.
pub fn phi_combination_dense(req: &PhiCombination<'_>) -> Result<DVector<f64>, PhiError> {
    Ok(phi_combination_dense_at(req, &[1.0])?.remove(0))
}

/// `sum_k tau^k phi_k(tau h J) w_k` for each requested `tau` in (0, 1].
pub fn phi_combination_dense_at(req: &PhiCombination<'_>, taus: &[f64]) -> Result<Vec<DVector<f64>>, PhiError> {
    validate_taus(taus)?;
    let jac = req.operator.as_dense().ok_or(PhiError::NotDense)?;
    if jac.iter().any(|x| !x.is_finite()) {
        return Err(PhiError::NonFinite);
    }
    let n = jac.nrows();
    let w = req.trimmed();
    if w.is_empty() {
        return Ok(vec![DVector::zeros(n); taus.len()]);
    }
    let p = w.len() - 1;
    let eta = coupling_scale(w);

    let mut aug = DMatrix::<f64>::zeros(n + p, n + p);
    aug.view_mut((0, 0), (n, n)).copy_from(&(jac * req.scale));
    for j in 0..p {
        aug.view_mut((0, n + j), (n, 1)).copy_from(&(&w[j + 1] * eta));
        if j > 0 {
            aug[(n + j, n + j - 1)] = 1.0;
        }
    }
    let mut start = DVector::<f64>::zeros(n + p);
    start.rows_mut(0, n).copy_from(&w[0]);
    if p > 0 {
        start[n] = 1.0 / eta;
    }

    Ok(taus
        .iter()
        .map(|&tau| {
            let e = expm(&(&aug * tau));
            (e * &start).rows(0, n).into_owned()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Operator;
    use crate::phi::phi_scalar;
    use approx::assert_relative_eq;

    #[test]
    fn zero_argument_gives_inverse_factorials() {
        let t = phi_dense(2, &DMatrix::zeros(3, 3)).unwrap();
        let i = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(t.get(0), &i, epsilon = 1e-15);
        assert_relative_eq!(t.get(1), &i, epsilon = 1e-15);
        assert_relative_eq!(t.get(2), &(&i * 0.5), epsilon = 1e-15);
    }

    #[test]
    fn diagonal_argument_is_elementwise() {
        let z = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let t = phi_dense(1, &z).unwrap();
        let e = std::f64::consts::E;
        assert_relative_eq!(t.get(1)[(0, 0)], e - 1.0, max_relative = 1e-14);
        assert_relative_eq!(t.get(1)[(1, 1)], (e * e - 1.0) / 2.0, max_relative = 1e-14);
        assert_eq!(t.get(1)[(0, 1)], 0.0);
    }

    #[test]
    fn phi0_is_expm() {
        let z = DMatrix::from_row_slice(3, 3, &[-1., 2., 0.5, 0., -3., 1., 0.2, 0., -0.5]);
        let t = phi_dense(0, &z).unwrap();
        assert_relative_eq!(t.get(0), &expm(&z), max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            phi_dense(2, &DMatrix::zeros(2, 3)),
            Err(PhiError::NotSquare { .. })
        ));
        let mut z = DMatrix::zeros(2, 2);
        z[(0, 1)] = f64::INFINITY;
        assert_eq!(phi_dense(1, &z).unwrap_err(), PhiError::NonFinite);
    }

    #[test]
    fn combination_with_zero_operator() {
        let op = Operator::Dense(DMatrix::zeros(3, 3));
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let v = DVector::from_vec(vec![-1.0, 0.5, 4.0]);
        let req = PhiCombination::new(&op, 1.0, vec![u.clone(), v.clone()]).unwrap();
        assert_relative_eq!(phi_combination_dense(&req).unwrap(), &u + &v, epsilon = 1e-14);

        let req = PhiCombination::new(&op, 1.0, vec![DVector::zeros(3), DVector::zeros(3), v.clone()]).unwrap();
        assert_relative_eq!(phi_combination_dense(&req).unwrap(), &v * 0.5, epsilon = 1e-14);
    }

    #[test]
    fn combination_at_tau_on_diagonal() {
        let d = [-3.0, 0.5, -40.0];
        let op = Operator::Dense(DMatrix::from_diagonal(&DVector::from_row_slice(&d)));
        let w: Vec<DVector<f64>> = (0..4)
            .map(|k| DVector::from_fn(3, |i, _| 1.0 + (i + k) as f64))
            .collect();
        let h = 0.7;
        let req = PhiCombination::new(&op, h, w.clone()).unwrap();
        let taus = [0.25, 0.75, 1.0];
        let out = phi_combination_dense_at(&req, &taus).unwrap();
        for (ti, &tau) in taus.iter().enumerate() {
            for i in 0..3 {
                let expect: f64 = (0..4)
                    .map(|k| tau.powi(k as i32) * phi_scalar(k, tau * h * d[i]) * w[k][i])
                    .sum();
                assert_relative_eq!(out[ti][i], expect, max_relative = 1e-13);
            }
        }
    }
}
