//! Test problems: two nonstiff ODEs and two method-of-lines PDEs.

mod nonstiff;
mod pde;

use std::fmt;
use std::str::FromStr;

pub use nonstiff::{linear, riccati, two_body, van_der_pol};
pub use pde::{
    adr_2d, adr_initial_value, adr_linear_part, parabolic_linear_part, parabolic_source, semilinear_parabolic_1d,
    Grid1D, Grid2D, ADR_POINTS, PARABOLIC_INTERIOR,
};

use crate::model::OdeProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemId {
    TwoBody,
    VanDerPol,
    Parabolic1d,
    Adr2d,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [
        ProblemId::TwoBody,
        ProblemId::VanDerPol,
        ProblemId::Parabolic1d,
        ProblemId::Adr2d,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::TwoBody => "two-body",
            ProblemId::VanDerPol => "van-der-pol",
            ProblemId::Parabolic1d => "parabolic-1d",
            ProblemId::Adr2d => "adr-2d",
        }
    }

    pub fn build(&self) -> OdeProblem {
        match self {
            ProblemId::TwoBody => two_body(),
            ProblemId::VanDerPol => van_der_pol(),
            ProblemId::Parabolic1d => semilinear_parabolic_1d(),
            ProblemId::Adr2d => adr_2d(),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "two-body" | "twobody" | "ex1" | "1" => Ok(ProblemId::TwoBody),
            "van-der-pol" | "vdp" | "ex2" | "2" => Ok(ProblemId::VanDerPol),
            "parabolic-1d" | "parabolic" | "ex3" | "3" => Ok(ProblemId::Parabolic1d),
            "adr-2d" | "adr" | "ex4" | "4" => Ok(ProblemId::Adr2d),
            other => Err(format!(
                "unknown problem '{other}' (expected two-body, van-der-pol, parabolic-1d or adr-2d)"
            )),
        }
    }
}
