//! Linear operators: explicit matrices or matrix-free matvec closures.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

/// `y <- A x`. Implementations must fully overwrite `y`.
pub type MatVec = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A square linear operator on `R^n`.
#[derive(Clone)]
pub enum Operator {
    Dense(DMatrix<f64>),
    MatrixFree { dim: usize, apply: MatVec },
}

impl Operator {
    pub fn matrix_free<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Operator::MatrixFree {
            dim,
            apply: Arc::new(f),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Operator::Dense(m) => m.nrows(),
            Operator::MatrixFree { dim, .. } => *dim,
        }
    }

    pub fn is_square(&self) -> bool {
        match self {
            Operator::Dense(m) => m.is_square(),
            Operator::MatrixFree { .. } => true,
        }
    }

    pub fn as_dense(&self) -> Option<&DMatrix<f64>> {
        match self {
            Operator::Dense(m) => Some(m),
            Operator::MatrixFree { .. } => None,
        }
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Operator::Dense(m) => {
                let n = m.nrows();
                for (i, yi) in y.iter_mut().enumerate().take(n) {
                    let mut acc = 0.0;
                    for (j, xj) in x.iter().enumerate() {
                        acc += m[(i, j)] * xj;
                    }
                    *yi = acc;
                }
            }
            Operator::MatrixFree { apply, .. } => apply(x, y),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Operator::Dense(m) => m * x,
            Operator::MatrixFree { dim, apply } => {
                let mut y = DVector::zeros(*dim);
                apply(x.as_slice(), y.as_mut_slice());
                y
            }
        }
    }

    /// Materializes the operator column by column (n matvecs for matrix-free).
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::MatrixFree { dim, apply } => {
                let n = *dim;
                let mut out = DMatrix::zeros(n, n);
                let mut e = vec![0.0; n];
                let mut col = vec![0.0; n];
                for j in 0..n {
                    e[j] = 1.0;
                    apply(&e, &mut col);
                    out.column_mut(j).copy_from_slice(&col);
                    e[j] = 0.0;
                }
                out
            }
        }
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operator::Dense(m) => write!(f, "Operator::Dense({}x{})", m.nrows(), m.ncols()),
            Operator::MatrixFree { dim, .. } => write!(f, "Operator::MatrixFree({dim})"),
        }
    }
}

impl From<DMatrix<f64>> for Operator {
    fn from(m: DMatrix<f64>) -> Self {
        Operator::Dense(m)
    }
}

/// Infinity norm (max absolute row sum) of a dense matrix.
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm (max absolute column sum) of a dense matrix.
pub fn norm_one(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Compressed sparse row matrix for finite-difference stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a square matrix from per-row `(column, value)` lists; repeated
    /// columns within a row are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let start = cols.len();
            for (c, v) in row {
                assert!(c < dim, "column {c} out of range");
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn to_operator(&self) -> Operator {
        let a = Arc::new(self.clone());
        Operator::matrix_free(self.dim, move |x, y| a.apply_into(x, y))
    }
}
