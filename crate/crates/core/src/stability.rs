//! Maximum stability regions and empirical stability classification.
//!
//! Membership of an arrival rate `a` is decided by the exact LP
//! `max eps` s.t. `a + sum_s pi_s sum_v lambda_{s,v} k R W^s v = -eps 1`,
//! `lambda >= 0`, `sum_v lambda_{s,v} <= 1` per state, where `k` is the
//! option scale (rates are expressed in units of `1/k` packets per slot).

use std::io::{self, Write};

use num::{BigInt, BigRational, ToPrimitive, Zero};

use crate::dynamics::Trace;
use crate::error::ModelError;
use crate::model::{enumerate_control_set, ControlVector, Network};
use crate::optim::{solve_lp, LpProblem, LpStatus, Relation};
use crate::Rational;

/// Interior/boundary threshold on the optimal `eps`.
pub const EPS_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct RegionQuery<'a> {
    pub network: &'a Network,
    /// Stationary weight of each chain state.
    pub pi: Vec<f64>,
    /// Arrival rate in option units.
    pub abar: Vec<Rational>,
    /// Controls whose expected effect forms the options. `None` means the full control set.
    pub controls: Option<Vec<ControlVector>>,
    /// Factor applied to every option `R W^s v`.
    pub option_scale: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Membership {
    Inside { eps: f64 },
    Boundary,
    Outside { eps: Option<f64> },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside { .. })
    }
}

fn big(r: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite weight")
}

/// Controls that never activate a link without a draining entry, i.e. the
/// options a max-weight scheduler can ever pick in a lexicographic tie-break.
pub fn without_copy_links(net: &Network) -> Result<Vec<ControlVector>, ModelError> {
    Ok(enumerate_control_set(net)?.into_iter().filter(|v| v.active_links().all(|j| !net.is_copy_link(j))).collect())
}

impl RegionQuery<'_> {
    fn options(&self) -> Result<Vec<Vec<Vec<BigRational>>>, ModelError> {
        let controls = match &self.controls {
            Some(c) => c.clone(),
            None => enumerate_control_set(self.network)?,
        };
        let r = self.network.routing();
        let scale = BigRational::from_integer(self.option_scale.into());
        Ok((0..self.network.n_states())
            .map(|s| {
                let w: Vec<BigRational> = self.network.weights(s).iter().map(|&x| exact(x)).collect();
                controls
                    .iter()
                    .filter(|v| !v.is_idle())
                    .map(|v| {
                        (0..self.network.n_queues())
                            .map(|i| {
                                v.active_links()
                                    .map(|j| BigRational::from_integer(r[i][j].into()) * &w[j])
                                    .fold(BigRational::zero(), |a, b| a + b)
                                    * &scale
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect())
    }

    /// Optimal `eps`, or `None` if the equality system has no solution at all.
    pub fn max_epsilon(&self) -> Result<Option<BigRational>, ModelError> {
        self.max_epsilon_at(&self.abar.iter().map(big).collect::<Vec<_>>())
    }

    fn max_epsilon_at(&self, abar: &[BigRational]) -> Result<Option<BigRational>, ModelError> {
        let options = self.options()?;
        let n_q = self.network.n_queues();
        let n_lambda: usize = options.iter().map(Vec::len).sum();
        let n = n_lambda + 2;
        let zero = BigRational::zero();
        let one = BigRational::from_integer(1.into());
        let mut lp = LpProblem::<BigRational>::new(n);
        lp.cost[n_lambda] = -one.clone();
        lp.cost[n_lambda + 1] = one.clone();
        for i in 0..n_q {
            let mut row = vec![zero.clone(); n];
            let mut k = 0;
            for (s, opts) in options.iter().enumerate() {
                let pi = exact(self.pi[s]);
                for u in opts {
                    row[k] = &pi * &u[i];
                    k += 1;
                }
            }
            row[n_lambda] = one.clone();
            row[n_lambda + 1] = -one.clone();
            lp.push(row, Relation::Eq, -abar[i].clone());
        }
        let mut k = 0;
        for opts in &options {
            let mut row = vec![zero.clone(); n];
            for _ in opts {
                row[k] = one.clone();
                k += 1;
            }
            lp.push(row, Relation::Le, one.clone());
        }
        let sol = solve_lp(&lp).expect("exact simplex cannot stall");
        Ok(match sol.status {
            LpStatus::Optimal => Some(-sol.value),
            LpStatus::Infeasible => None,
            LpStatus::Unbounded => unreachable!("eps is pinned by the equality rows"),
        })
    }
}

/// Classifies `query.abar` against the region.
pub fn region_membership(query: &RegionQuery<'_>) -> Result<Membership, ModelError> {
    Ok(classify(query.max_epsilon()?))
}

fn classify(eps: Option<BigRational>) -> Membership {
    match eps {
        None => Membership::Outside { eps: None },
        Some(e) => {
            let v = e.to_f64().unwrap_or(f64::NAN);
            if v > EPS_TOL {
                Membership::Inside { eps: v }
            } else if v < -EPS_TOL {
                Membership::Outside { eps: Some(v) }
            } else {
                Membership::Boundary
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub direction: (f64, f64),
    pub boundary: (f64, f64),
    /// `eps` at half the boundary point.
    pub eps_at_half: f64,
}

const MAX_RAY_LENGTH: f64 = 1e6;

/// Boundary along each ray from the origin in the plane of queues `axes`
/// (other queues get zero arrivals), by bisection to `tol` on the ray parameter.
pub fn region_slice(
    query: &RegionQuery<'_>,
    axes: (usize, usize),
    directions: &[(f64, f64)],
    tol: f64,
) -> Result<Vec<BoundaryPoint>, ModelError> {
    let n_q = query.network.n_queues();
    let point = |d: (f64, f64), t: f64| -> Vec<BigRational> {
        let mut a = vec![BigRational::zero(); n_q];
        a[axes.0] = exact(d.0 * t);
        a[axes.1] = exact(d.1 * t);
        a
    };
    let inside =
        |d: (f64, f64), t: f64| -> Result<bool, ModelError> { Ok(classify(query.max_epsilon_at(&point(d, t))?).is_inside()) };
    let mut out = Vec::new();
    for &d in directions {
        let norm = (d.0 * d.0 + d.1 * d.1).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            log::warn!("skipping degenerate direction ({}, {})", d.0, d.1);
            continue;
        }
        let d = (d.0 / norm, d.1 / norm);
        if !inside(d, tol)? {
            out.push(BoundaryPoint { direction: d, boundary: (0.0, 0.0), eps_at_half: 0.0 });
            continue;
        }
        let (mut lo, mut hi) = (tol, 1.0);
        while inside(d, hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > MAX_RAY_LENGTH {
                break;
            }
        }
        if hi > MAX_RAY_LENGTH {
            log::warn!("region is unbounded along ({}, {})", d.0, d.1);
            continue;
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if inside(d, mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let eps_half = query.max_epsilon_at(&point(d, t / 2.0))?.and_then(|e| e.to_f64()).unwrap_or(f64::NAN);
        out.push(BoundaryPoint { direction: d, boundary: (d.0 * t, d.1 * t), eps_at_half: eps_half });
    }
    Ok(out)
}

/// `n` directions evenly spaced over the closed first quadrant.
pub fn quadrant_directions(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let theta = if n <= 1 { 0.0 } else { std::f64::consts::FRAC_PI_2 * k as f64 / (n - 1) as f64 };
            (theta.cos(), theta.sin())
        })
        .collect()
}

pub fn write_region_csv<W: Write>(points: &[BoundaryPoint], out: &mut W) -> io::Result<()> {
    writeln!(out, "direction_x,direction_y,boundary_x,boundary_y,eps_at_half")?;
    for p in points {
        writeln!(out, "{:.6},{:.6},{:.6},{:.6},{:.6}", p.direction.0, p.direction.1, p.boundary.0, p.boundary.1, p.eps_at_half)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Stable,
    Unstable,
    Inconclusive,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityVerdict {
    pub classification: Classification,
    /// Least-squares slope of the total queue over the window, packets per slot.
    pub slope: f64,
    pub window: usize,
    pub max_queue: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityConfig {
    /// Length of the final window; `None` uses a quarter of the trace.
    pub window: Option<usize>,
    pub stable_slope: f64,
    pub unstable_slope: f64,
    /// Stable traces must keep the total queue below
    /// `initial + bound_factor * (total arrival rate) * sqrt(window)`.
    pub bound_factor: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { window: None, stable_slope: 0.01, unstable_slope: 0.05, bound_factor: 100.0 }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("trace of {len} slots is shorter than twice the window of {window}")]
pub struct TraceTooShort {
    pub len: usize,
    pub window: usize,
}

/// Ordinary least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn ls_slope(ys: &[u64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().map(|&y| y as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &y) in ys.iter().enumerate() {
        let dx = k as f64 - x_mean;
        sxy += dx * (y as f64 - y_mean);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Classifies a series of total-queue values.
pub fn assess_totals(
    totals: &[u64],
    initial_total: u64,
    arrival_rate: f64,
    cfg: &StabilityConfig,
) -> Result<StabilityVerdict, TraceTooShort> {
    let window = cfg.window.unwrap_or(totals.len() / 4).max(2);
    if totals.len() < 2 * window {
        return Err(TraceTooShort { len: totals.len(), window });
    }
    let tail = &totals[totals.len() - window..];
    let slope = ls_slope(tail);
    let max_queue = totals.iter().copied().max().unwrap_or(0);
    let limit = initial_total as f64 + cfg.bound_factor * arrival_rate * (window as f64).sqrt();
    let classification = if slope < cfg.stable_slope && (max_queue as f64) <= limit {
        Classification::Stable
    } else if slope > cfg.unstable_slope {
        Classification::Unstable
    } else {
        Classification::Inconclusive
    };
    Ok(StabilityVerdict { classification, slope, window, max_queue })
}

/// Classifies a simulated trace by the growth of its total queue.
pub fn assess_stability(trace: &Trace, arrival_rate: f64, cfg: &StabilityConfig) -> Result<StabilityVerdict, TraceTooShort> {
    let totals: Vec<u64> = trace.records.iter().map(|r| r.q_after.iter().sum()).collect();
    assess_totals(&totals, trace.initial.iter().sum(), arrival_rate, cfg)
}
