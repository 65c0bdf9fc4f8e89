//! Binary integer programs: `minimize c.x` s.t. `A x <= b`, `x in {0,1}^n`.

use std::fmt::Write as _;

use crate::error::SolverError;
use crate::optim::simplex::{solve_lp, LpProblem, LpStatus, Relation};

/// Values closer than this are treated as tied.
pub const TIE_TOL: f64 = 1e-9;
/// Largest instance `solve_bip_exhaustive` accepts.
pub const MAX_EXHAUSTIVE_VARS: usize = 20;

/// Integer constraint rows over binary variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Bip {
    pub cost: Vec<f64>,
    pub rows: Vec<Vec<i64>>,
    pub rhs: Vec<i64>,
    /// Variables per block (one block per planned slot). Only used for naming.
    pub block_len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BipStatus {
    Optimal,
    Infeasible,
    /// The node budget ran out. The incumbent (if any) is not proven optimal.
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BipSolution {
    pub x: Vec<bool>,
    pub value: f64,
    pub status: BipStatus,
    pub nodes: u64,
}

impl Bip {
    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn check_shape(&self) -> Result<(), SolverError> {
        if self.rhs.len() != self.rows.len() {
            return Err(SolverError::Shape { row: self.rows.len(), expected: self.rows.len(), found: self.rhs.len() });
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.n_vars() {
                return Err(SolverError::Shape { row: i, expected: self.n_vars(), found: row.len() });
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[bool]) -> f64 {
        self.cost.iter().zip(x).filter(|(_, &b)| b).map(|(c, _)| *c).sum()
    }

    pub fn is_feasible(&self, x: &[bool]) -> bool {
        self.rows.iter().zip(&self.rhs).all(|(row, &b)| {
            let lhs: i64 = row.iter().zip(x).filter(|(_, &on)| on).map(|(a, _)| *a).sum();
            lhs <= b
        })
    }

    fn var_name(&self, k: usize) -> String {
        let len = self.block_len.max(1);
        format!("u_{}_{}", k / len, k % len + 1)
    }

    /// Human-readable LP-format dump, useful for debugging with external solvers.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::from("minimize\n obj:");
        for (k, c) in self.cost.iter().enumerate() {
            let _ = write!(out, " {:+} {}", c, self.var_name(k));
        }
        out.push_str("\nsubject to\n");
        for (i, (row, b)) in self.rows.iter().zip(&self.rhs).enumerate() {
            let _ = write!(out, " c{}:", i);
            let mut any = false;
            for (k, a) in row.iter().enumerate() {
                if *a != 0 {
                    let _ = write!(out, " {:+} {}", a, self.var_name(k));
                    any = true;
                }
            }
            if !any {
                out.push_str(" 0");
            }
            let _ = writeln!(out, " <= {}", b);
        }
        out.push_str("binary\n");
        for k in 0..self.n_vars() {
            let _ = writeln!(out, " {}", self.var_name(k));
        }
        out.push_str("end\n");
        out
    }
}

/// Enumerates all `2^n` points in lexicographic order (variable 0 most
/// significant, 0 before 1). Among solutions within `TIE_TOL` the first wins.
pub fn solve_bip_exhaustive(bip: &Bip) -> Result<BipSolution, SolverError> {
    bip.check_shape()?;
    let n = bip.n_vars();
    if n > MAX_EXHAUSTIVE_VARS {
        return Err(SolverError::TooLarge { n, limit: MAX_EXHAUSTIVE_VARS });
    }
    let mut best: Option<(Vec<bool>, f64)> = None;
    let mut x = vec![false; n];
    for code in 0u64..(1u64 << n) {
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = (code >> (n - 1 - k)) & 1 == 1;
        }
        if !bip.is_feasible(&x) {
            continue;
        }
        let value = bip.objective(&x);
        if best.as_ref().is_none_or(|(_, b)| value < b - TIE_TOL) {
            best = Some((x.clone(), value));
        }
    }
    Ok(finish(best, n, 1u64 << n, false))
}

fn finish(best: Option<(Vec<bool>, f64)>, n: usize, nodes: u64, exhausted: bool) -> BipSolution {
    match best {
        Some((x, value)) => {
            BipSolution { x, value, status: if exhausted { BipStatus::BudgetExhausted } else { BipStatus::Optimal }, nodes }
        }
        None => BipSolution {
            x: vec![false; n],
            value: f64::INFINITY,
            status: if exhausted { BipStatus::BudgetExhausted } else { BipStatus::Infeasible },
            nodes,
        },
    }
}

struct Search<'a> {
    bip: &'a Bip,
    budget: u64,
    nodes: u64,
    exhausted: bool,
    best: Option<(Vec<bool>, f64)>,
    x: Vec<bool>,
}

impl Search<'_> {
    fn incumbent(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |(_, v)| *v)
    }

    /// LP relaxation over variables `depth..n` with the prefix fixed.
    /// Returns the full-length relaxed point and its bound, or None if infeasible.
    fn relax(&self, depth: usize) -> Result<Option<(Vec<f64>, f64)>, SolverError> {
        let bip = self.bip;
        let n = bip.n_vars();
        let fixed_cost: f64 = bip.objective(&self.x[..depth]);
        let free = n - depth;
        let mut lp = LpProblem::<f64>::new(free);
        lp.cost = bip.cost[depth..].to_vec();
        for (row, &b) in bip.rows.iter().zip(&bip.rhs) {
            let used: i64 = row[..depth].iter().zip(&self.x[..depth]).filter(|(_, &on)| on).map(|(a, _)| *a).sum();
            let rest = b - used;
            let tail = &row[depth..];
            let min_lhs: i64 = tail.iter().filter(|a| **a < 0).sum();
            if min_lhs > rest {
                return Ok(None);
            }
            let max_lhs: i64 = tail.iter().filter(|a| **a > 0).sum();
            if max_lhs <= rest {
                continue;
            }
            lp.push(tail.iter().map(|&a| a as f64).collect(), Relation::Le, rest as f64);
        }
        for k in 0..free {
            let mut e = vec![0.0; free];
            e[k] = 1.0;
            lp.push(e, Relation::Le, 1.0);
        }
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => unreachable!("box-constrained relaxation is bounded"),
            LpStatus::Optimal => {
                let mut point: Vec<f64> = self.x[..depth].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
                point.extend(sol.x);
                Ok(Some((point, fixed_cost + sol.value)))
            }
        }
    }

    fn visit(&mut self, depth: usize, parent: Option<(Vec<f64>, f64)>) -> Result<(), SolverError> {
        if self.nodes >= self.budget {
            self.exhausted = true;
            return Ok(());
        }
        self.nodes += 1;
        let n = self.bip.n_vars();
        if depth == n {
            if self.bip.is_feasible(&self.x) {
                let value = self.bip.objective(&self.x);
                if value < self.incumbent() - TIE_TOL {
                    self.best = Some((self.x.clone(), value));
                }
            }
            return Ok(());
        }
        // The parent's relaxed optimum stays optimal when it already agrees
        // with the value just fixed at `depth - 1`.
        let reuse = match (&parent, depth) {
            (Some((point, _)), d) if d > 0 => {
                let fixed = if self.x[d - 1] { 1.0 } else { 0.0 };
                (point[d - 1] - fixed).abs() < 1e-9
            }
            _ => false,
        };
        let relaxed = if reuse { parent } else { self.relax(depth)? };
        let Some((point, bound)) = relaxed else { return Ok(()) };
        if bound >= self.incumbent() - TIE_TOL {
            return Ok(());
        }
        for value in [false, true] {
            self.x[depth] = value;
            self.visit(depth + 1, Some((point.clone(), bound)))?;
            if self.exhausted {
                break;
            }
        }
        self.x[depth] = false;
        Ok(())
    }
}

/// Depth-first branch-and-bound in natural variable order, 0-branch first,
/// with LP-relaxation bounds. Returns the lexicographically first optimum
/// under the same tie rule as `solve_bip_exhaustive`.
pub fn solve_bip(bip: &Bip, node_budget: u64) -> Result<BipSolution, SolverError> {
    bip.check_shape()?;
    let n = bip.n_vars();
    let mut search = Search { bip, budget: node_budget, nodes: 0, exhausted: false, best: None, x: vec![false; n] };
    search.visit(0, None)?;
    Ok(finish(search.best, n, search.nodes, search.exhausted))
}
