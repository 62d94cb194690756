use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::IntegratorError;
use crate::phi::{phi_scalar, phi_taylor_coefficient, PhiValueTable, MAX_PHI_INDEX};

/// `sum_k coeffs[k] * phi_k(z)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhiPoly(pub Vec<f64>);

impl PhiPoly {
    pub fn zero() -> Self {
        PhiPoly(Vec::new())
    }

    /// Single term `coeff * phi_k`.
    pub fn term(k: usize, coeff: f64) -> Self {
        let mut v = vec![0.0; k + 1];
        v[k] = coeff;
        PhiPoly(v)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn max_index(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.0.iter().enumerate().map(|(k, c)| c * phi_scalar(k, z)).sum()
    }

    /// Matrix value from a table holding at least `phi_0..phi_maxindex`.
    pub fn eval_matrix(&self, table: &PhiValueTable) -> DMatrix<f64> {
        let n = table.argument().nrows();
        let mut out = DMatrix::zeros(n, n);
        for (k, &c) in self.0.iter().enumerate() {
            if c != 0.0 {
                out += table.get(k) * c;
            }
        }
        out
    }

    /// Coefficient of `z^j` in the Taylor expansion at 0.
    pub fn taylor(&self, j: usize) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(k, c)| c * phi_taylor_coefficient(k, j))
            .sum()
    }
}

/// Reduced Butcher tableau of an explicit exponential Rosenbrock scheme.
///
/// Stage `i` (2..=s) has node `nodes[i-2]`; `a[i-2][j-2]` couples stage `i`
/// to `D_j` through `phi_k(c_i h J)`; `b[i-2]` and `b_hat[i-2]` weight `D_i`
/// through `phi_k(h J)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTableau {
    pub name: String,
    pub nodes: Vec<f64>,
    pub a: Vec<Vec<PhiPoly>>,
    pub b: Vec<PhiPoly>,
    pub b_hat: Option<Vec<PhiPoly>>,
}

impl ReducedTableau {
    pub fn stages(&self) -> usize {
        self.nodes.len() + 1
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |m: String| Err(IntegratorError::InvalidTableau(m));
        if self.nodes.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
            return bad(format!("nodes must lie in (0, 1]: {:?}", self.nodes));
        }
        let s1 = self.nodes.len();
        if self.b.len() != s1 {
            return bad(format!("{} weights for {} stages", self.b.len(), s1 + 1));
        }
        if self.a.len() != s1 || self.a.iter().enumerate().any(|(i, row)| row.len() != i) {
            return bad("coupling rows must be strictly lower triangular".into());
        }
        if let Some(bh) = &self.b_hat {
            if bh.len() != s1 {
                return bad("embedded weights have the wrong length".into());
            }
        }
        let polys = self
            .a
            .iter()
            .flatten()
            .chain(self.b.iter())
            .chain(self.b_hat.iter().flatten());
        for p in polys {
            if p.0.iter().any(|c| !c.is_finite()) {
                return bad("non-finite coefficient".into());
            }
            if p.max_index() > MAX_PHI_INDEX {
                return bad(format!("phi index {} above {}", p.max_index(), MAX_PHI_INDEX));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    ExprbEuler,
    Exprb32,
    Exprb42N,
    Exprb42,
    Gauss42,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::ExprbEuler,
        SchemeId::Exprb32,
        SchemeId::Exprb42N,
        SchemeId::Exprb42,
        SchemeId::Gauss42,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeId::ExprbEuler => "exprb-euler",
            SchemeId::Exprb32 => "exprb32",
            SchemeId::Exprb42N => "exprb42n",
            SchemeId::Exprb42 => "exprb42",
            SchemeId::Gauss42 => "gauss42",
        }
    }

    pub fn is_exponential(&self) -> bool {
        !matches!(self, SchemeId::Gauss42)
    }

    /// Classical order of the main solution.
    pub fn order(&self) -> usize {
        match self {
            SchemeId::ExprbEuler => 2,
            SchemeId::Exprb32 => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exprb-euler" | "exprbeuler" | "euler" => Ok(SchemeId::ExprbEuler),
            "exprb32" => Ok(SchemeId::Exprb32),
            "exprb42n" => Ok(SchemeId::Exprb42N),
            "exprb42" => Ok(SchemeId::Exprb42),
            "gauss42" | "gauss" => Ok(SchemeId::Gauss42),
            other => Err(format!("unknown scheme '{other}'")),
        }
    }
}

/// Reduced tableau of an exponential scheme.
///
/// `exprb32` (`c_2 = 1`, `b_2 = 2 phi_3`) is reconstructed from the
/// third-order condition `b_2(Z) c_2^2 = 2 phi_3(Z)`.
pub fn tableau_of(scheme: SchemeId) -> Result<ReducedTableau, IntegratorError> {
    let two_stage = |name: &str, c2: f64, b2: PhiPoly, b_hat: Option<Vec<PhiPoly>>| ReducedTableau {
        name: name.to_string(),
        nodes: vec![c2],
        a: vec![Vec::new()],
        b: vec![b2],
        b_hat,
    };
    Ok(match scheme {
        SchemeId::ExprbEuler => ReducedTableau {
            name: scheme.as_str().into(),
            nodes: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
            b_hat: None,
        },
        SchemeId::Exprb32 => two_stage(scheme.as_str(), 1.0, PhiPoly::term(3, 2.0), Some(vec![PhiPoly::zero()])),
        SchemeId::Exprb42N => two_stage(
            scheme.as_str(),
            0.75,
            PhiPoly(vec![0.0, -8.0 / 27.0, 48.0 / 27.0]),
            Some(vec![PhiPoly::zero()]),
        ),
        SchemeId::Exprb42 => two_stage(
            scheme.as_str(),
            0.75,
            PhiPoly::term(3, 32.0 / 9.0),
            Some(vec![PhiPoly::zero()]),
        ),
        SchemeId::Gauss42 => return Err(IntegratorError::NotTableau(scheme)),
    })
}
