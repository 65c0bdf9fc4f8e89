//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Generic over the scalar so the same code runs in `f64` (branch-and-bound
//! relaxations) and in exact rationals (stability-region membership).

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::{BigRational, Signed, ToPrimitive, Zero};

use crate::error::SolverError;

/// Scalar field the simplex runs over.
pub trait LpScalar:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Strictly positive beyond the scalar's tolerance.
    fn is_pos(&self) -> bool;
    /// Strictly negative beyond the scalar's tolerance.
    fn is_neg(&self) -> bool;
    fn approx_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
    fn to_f64(&self) -> f64;
}

const F64_TOL: f64 = 1e-10;

impl LpScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_pos(&self) -> bool {
        *self > F64_TOL
    }
    fn is_neg(&self) -> bool {
        *self < -F64_TOL
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl LpScalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        num::One::one()
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `minimize cost . x` subject to `rows` and `x >= 0`.
#[derive(Clone, Debug)]
pub struct LpProblem<T> {
    pub cost: Vec<T>,
    pub rows: Vec<(Vec<T>, Relation, T)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub value: T,
    pub pivots: usize,
}

impl<T: LpScalar> LpProblem<T> {
    pub fn new(n_vars: usize) -> Self {
        LpProblem { cost: vec![T::zero(); n_vars], rows: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn push(&mut self, coeffs: Vec<T>, rel: Relation, rhs: T) {
        self.rows.push((coeffs, rel, rhs));
    }
}

struct Tableau<T> {
    /// `m` constraint rows followed by the objective row; last column is the rhs.
    cells: Vec<Vec<T>>,
    basis: Vec<usize>,
    n_cols: usize,
    pivots: usize,
    max_pivots: usize,
}

impl<T: LpScalar> Tableau<T> {
    fn rhs_col(&self) -> usize {
        self.n_cols
    }

    fn obj_row(&self) -> usize {
        self.cells.len() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.cells[row][col].clone();
        for v in self.cells[row].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.cells[row].clone();
        for (r, cells) in self.cells.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = cells[col].clone();
            if factor == T::zero() {
                continue;
            }
            for (c, pv) in cells.iter_mut().zip(&pivot_row) {
                *c = c.clone() - factor.clone() * pv.clone();
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs Bland's rule over columns `allowed`. Returns false if unbounded.
    fn optimize(&mut self, allowed: &[bool]) -> Result<bool, SolverError> {
        loop {
            if self.pivots > self.max_pivots {
                let largest = self.cells.iter().flat_map(|r| r.iter()).map(|v| v.to_f64().abs()).fold(0.0, f64::max);
                return Err(SolverError::Stall { pivots: self.pivots, pivot: largest });
            }
            let obj = self.obj_row();
            let entering = (0..self.n_cols).find(|&c| allowed[c] && self.cells[obj][c].is_neg());
            let Some(col) = entering else { return Ok(true) };
            let rhs = self.rhs_col();
            let mut best: Option<(usize, T)> = None;
            for r in 0..obj {
                let a = &self.cells[r][col];
                if a.is_pos() {
                    let ratio = self.cells[r][rhs].clone() / a.clone();
                    let better = match &best {
                        None => true,
                        Some((br, bv)) => {
                            let diff = ratio.clone() - bv.clone();
                            diff.is_neg() || (diff.approx_zero() && self.basis[r] < self.basis[*br])
                        }
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
            }
            match best {
                None => return Ok(false),
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }
}

/// Solves `problem` to optimality, or reports infeasibility/unboundedness.
pub fn solve_lp<T: LpScalar>(problem: &LpProblem<T>) -> Result<LpSolution<T>, SolverError> {
    let n = problem.n_vars();
    for (i, (coeffs, _, _)) in problem.rows.iter().enumerate() {
        if coeffs.len() != n {
            return Err(SolverError::Shape { row: i, expected: n, found: coeffs.len() });
        }
    }
    // Normalize every row to a nonnegative rhs.
    let rows: Vec<(Vec<T>, Relation, T)> = problem
        .rows
        .iter()
        .map(|(a, rel, b)| {
            if b.is_neg() {
                let flipped = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (a.iter().map(|v| -v.clone()).collect(), flipped, -b.clone())
            } else {
                (a.clone(), *rel, b.clone())
            }
        })
        .collect();
    let m = rows.len();
    let n_slack = rows.iter().filter(|(_, r, _)| *r != Relation::Eq).count();
    let n_art = rows.iter().filter(|(_, r, _)| *r != Relation::Le).count();
    let n_cols = n + n_slack + n_art;
    let art_start = n + n_slack;

    let mut cells = vec![vec![T::zero(); n_cols + 1]; m + 1];
    let mut basis = vec![0; m];
    let (mut slack, mut art) = (n, art_start);
    for (i, (a, rel, b)) in rows.iter().enumerate() {
        cells[i][..n].clone_from_slice(a);
        cells[i][n_cols] = b.clone();
        match rel {
            Relation::Le => {
                cells[i][slack] = T::one();
                basis[i] = slack;
                slack += 1;
            }
            Relation::Ge => {
                cells[i][slack] = -T::one();
                slack += 1;
                cells[i][art] = T::one();
                basis[i] = art;
                art += 1;
            }
            Relation::Eq => {
                cells[i][art] = T::one();
                basis[i] = art;
                art += 1;
            }
        }
    }
    let mut tab = Tableau { cells, basis, n_cols, pivots: 0, max_pivots: 50 * (m + n_cols + 10) };

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        let obj = tab.obj_row();
        for c in art_start..n_cols {
            tab.cells[obj][c] = T::one();
        }
        for r in 0..m {
            if tab.basis[r] >= art_start {
                let row = tab.cells[r].clone();
                for (o, v) in tab.cells[obj].iter_mut().zip(row) {
                    *o = o.clone() - v;
                }
            }
        }
        let all = vec![true; n_cols];
        tab.optimize(&all)?;
        let residual = -tab.cells[obj][n_cols].clone();
        if residual.is_pos() {
            return Ok(LpSolution { status: LpStatus::Infeasible, x: vec![T::zero(); n], value: T::zero(), pivots: tab.pivots });
        }
        // Drive remaining artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| !tab.cells[r][c].approx_zero()) {
                    tab.pivot(r, c);
                }
            }
        }
        for v in tab.cells[obj].iter_mut() {
            *v = T::zero();
        }
    }

    // Phase 2 objective row: reduced costs of the original cost.
    let obj = tab.obj_row();
    for (c, v) in problem.cost.iter().enumerate() {
        tab.cells[obj][c] = v.clone();
    }
    for r in 0..m {
        let b = tab.basis[r];
        let cb = tab.cells[obj][b].clone();
        if cb != T::zero() {
            let row = tab.cells[r].clone();
            for (o, v) in tab.cells[obj].iter_mut().zip(row) {
                *o = o.clone() - cb.clone() * v;
            }
        }
    }
    let allowed: Vec<bool> = (0..n_cols).map(|c| c < art_start).collect();
    let bounded = tab.optimize(&allowed)?;
    let mut x = vec![T::zero(); n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.cells[r][n_cols].clone();
        }
    }
    if !bounded {
        return Ok(LpSolution { status: LpStatus::Unbounded, x, value: T::zero(), pivots: tab.pivots });
    }
    let value = problem.cost.iter().zip(&x).fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone());
    Ok(LpSolution { status: LpStatus::Optimal, x, value, pivots: tab.pivots })
}

#[cfg(test)]
mod tests {
    use num::BigInt;

    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn maximize_single_variable() {
        let mut lp = LpProblem::<f64>::new(1);
        lp.cost = vec![-1.0];
        lp.push(vec![1.0], Relation::Le, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
        let mut lp = LpProblem::<f64>::new(2);
        lp.cost = vec![-3.0, -5.0];
        lp.push(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.push(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.push(vec![3.0, 2.0], Relation::Le, 18.0);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.value + 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y, x + y = 2, x >= 0.5, y >= 0.25
        let mut lp = LpProblem::<f64>::new(2);
        lp.cost = vec![1.0, 2.0];
        lp.push(vec![1.0, 1.0], Relation::Eq, 2.0);
        lp.push(vec![1.0, 0.0], Relation::Ge, 0.5);
        lp.push(vec![0.0, 1.0], Relation::Ge, 0.25);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.x[0] - 1.75).abs() < 1e-9, "{:?}", sol);
        assert!((sol.value - 2.25).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LpProblem::<f64>::new(1);
        lp.push(vec![1.0], Relation::Le, -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LpProblem::<f64>::new(2);
        lp.cost = vec![-1.0, 0.0];
        lp.push(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn exact_rational_solution() {
        // max x + y, 3x + y <= 1, x + 3y <= 1 -> x = y = 1/4.
        let mut lp = LpProblem::<BigRational>::new(2);
        lp.cost = vec![q(-1, 1), q(-1, 1)];
        lp.push(vec![q(3, 1), q(1, 1)], Relation::Le, q(1, 1));
        lp.push(vec![q(1, 1), q(3, 1)], Relation::Le, q(1, 1));
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.x, vec![q(1, 4), q(1, 4)]);
        assert_eq!(sol.value, q(-1, 2));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example under the largest-coefficient rule (Beale).
        let mut lp = LpProblem::<BigRational>::new(4);
        lp.cost = vec![q(-3, 4), q(150, 1), q(-1, 50), q(6, 1)];
        lp.push(vec![q(1, 4), q(-60, 1), q(-1, 25), q(9, 1)], Relation::Le, q(0, 1));
        lp.push(vec![q(1, 2), q(-90, 1), q(-1, 50), q(3, 1)], Relation::Le, q(0, 1));
        lp.push(vec![q(0, 1), q(0, 1), q(1, 1), q(0, 1)], Relation::Le, q(1, 1));
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.value, q(-1, 20));
    }
}
