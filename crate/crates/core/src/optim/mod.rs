//! Linear and binary integer programming.

pub mod bip;
pub mod simplex;

pub use bip::{solve_bip, solve_bip_exhaustive, Bip, BipSolution, BipStatus, MAX_EXHAUSTIVE_VARS, TIE_TOL};
pub use simplex::{solve_lp, LpProblem, LpScalar, LpSolution, LpStatus, Relation};

/// Node budget used when callers do not specify one.
pub const DEFAULT_NODE_BUDGET: u64 = 200_000;
