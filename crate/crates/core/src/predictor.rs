//! The H-step relaxed prediction problem solved by the receding-horizon
//! controller: expected weights, the linear objective and the stacked
//! constituency/positiveness system.
//!
//! Variables are laid out block by block: `u[t * n_links + j]` activates
//! link `j` in predicted slot `t`.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, ToPrimitive, Zero};

use crate::error::OracleError;
use crate::markov::MarkovChain;
use crate::model::{ArrivalProcess, ControlVector, Network};
use crate::optim::Bip;
use crate::Rational;

/// Oracle limit on `H * n_links`.
pub const ORACLE_MAX_VARS: usize = 16;
const ORACLE_MAX_STATES: usize = 1_000_000;

/// Diagonal of `sum_s (sigma0 P^t)_s W^s`.
pub fn expected_weights(chain: &MarkovChain, weights: &[Vec<f64>], sigma0: &[f64], t: usize) -> Vec<f64> {
    mix(weights, &chain.propagate(sigma0, t))
}

fn mix(weights: &[Vec<f64>], sigma: &[f64]) -> Vec<f64> {
    let n_links = weights.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n_links];
    for (w, &p) in weights.iter().zip(sigma) {
        if p != 0.0 {
            for (o, &wj) in out.iter_mut().zip(w) {
                *o += p * wj;
            }
        }
    }
    out
}

/// `[W_0, ..., W_{H-1}]`, propagating the distribution one step at a time.
pub fn weight_sequence(chain: &MarkovChain, weights: &[Vec<f64>], sigma0: &[f64], horizon: usize) -> Vec<Vec<f64>> {
    let mut sigma = sigma0.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        if t > 0 {
            sigma = chain.propagate(&sigma, 1);
        }
        out.push(mix(weights, &sigma));
    }
    out
}

fn rational_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Linear objective from a precomputed weight sequence.
pub fn objective_from_weights(net: &Network, q0: &[u64], abar: &[Rational], what: &[Vec<f64>]) -> Vec<f64> {
    let h = what.len();
    let n_v = net.n_links();
    let r = net.routing();
    let abar: Vec<f64> = abar.iter().map(rational_f64).collect();
    let mut cost = Vec::with_capacity(h * n_v);
    for (tau, w) in what.iter().enumerate() {
        let k_q = 2.0 * (h - tau) as f64;
        let k_a = ((h + 1 + tau) * (h - tau)) as f64;
        for j in 0..n_v {
            let weight: f64 = (0..net.n_queues()).map(|i| (k_q * q0[i] as f64 + k_a * abar[i]) * r[i][j] as f64).sum();
            cost.push(weight * w[j]);
        }
    }
    cost
}

/// Coefficient of `u[t, j]` is `[2(H-t) q0 + (H+1+t)(H-t) abar]^T R e_j W_t[j]`.
pub fn build_objective(
    net: &Network,
    chain: &MarkovChain,
    q0: &[u64],
    sigma0: &[f64],
    abar: &[Rational],
    horizon: usize,
) -> Vec<f64> {
    let what = weight_sequence(chain, net.all_weights(), sigma0, horizon);
    objective_from_weights(net, q0, abar, &what)
}

/// `floor(q0 + t * abar)`.
fn predicted_level(q0: u64, abar: &Rational, t: usize) -> i64 {
    let level = Rational::from_integer(q0 as i64) + *abar * Rational::from_integer(t as i64);
    level.floor().to_integer()
}

/// Stacked constraint rows (cost left at zero). Per slot `t`:
/// constituency `C u_t <= c`; positiveness `-R^- u_t - sum_{tau<t} R u_tau <= q0 + t abar`;
/// and for a source requirement on a queue the link does not drain,
/// `u_{t,j} - sum_{tau<t} R_i u_tau <= q0_i + t abar_i`.
/// The left-hand sides are integral, so right-hand sides are floored exactly.
pub fn build_constraints(net: &Network, q0: &[u64], abar: &[Rational], horizon: usize) -> Bip {
    let n_v = net.n_links();
    let n = horizon * n_v;
    let r = net.routing();
    let drain = net.drain();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    // Empty rows are dropped unless they make the system infeasible.
    let mut push = |row: Vec<i64>, b: i64| {
        if b < 0 || row.iter().any(|&a| a != 0) {
            rows.push(row);
            rhs.push(b);
        }
    };
    for t in 0..horizon {
        for (c_row, &bound) in net.constituency().iter().zip(net.bound()) {
            let mut row = vec![0i64; n];
            for j in 0..n_v {
                row[t * n_v + j] = c_row[j] as i64;
            }
            push(row, bound as i64);
        }
        for i in 0..net.n_queues() {
            let level = predicted_level(q0[i], &abar[i], t);
            let mut history = vec![0i64; n];
            for tau in 0..t {
                for j in 0..n_v {
                    history[tau * n_v + j] = -r[i][j];
                }
            }
            let mut row = history.clone();
            for j in 0..n_v {
                row[t * n_v + j] = -drain[i][j];
            }
            push(row, level);
            for j in 0..n_v {
                if net.requires_source(i, j) && drain[i][j] == 0 {
                    let mut row = history.clone();
                    row[t * n_v + j] = 1;
                    push(row, level);
                }
            }
        }
    }
    Bip { cost: vec![0.0; n], rows, rhs, block_len: n_v }
}

/// Objective and constraints of the prediction problem in one instance.
pub fn build_bip(net: &Network, chain: &MarkovChain, q0: &[u64], sigma0: &[f64], abar: &[Rational], horizon: usize) -> Bip {
    let mut bip = build_constraints(net, q0, abar, horizon);
    bip.cost = build_objective(net, chain, q0, sigma0, abar, horizon);
    bip
}

/// Splits a flat solution into per-slot control vectors.
pub fn split_blocks(x: &[bool], n_links: usize) -> Vec<ControlVector> {
    x.chunks(n_links.max(1)).map(|c| ControlVector(c.to_vec())).collect()
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite probability")
}

fn exact_ratio(r: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// `E[sum_{t=1..H} |q_t|^2]` under open-loop application of `trajectory`,
/// evaluated exactly over the full outcome tree (link successes, arrivals
/// and chain moves). Queues are not clipped at zero.
pub fn quadratic_objective_oracle(
    net: &Network,
    chain: &MarkovChain,
    arrivals: &ArrivalProcess,
    q0: &[u64],
    sigma0: &[f64],
    trajectory: &[ControlVector],
) -> Result<BigRational, OracleError> {
    let n_v = net.n_links();
    let h = trajectory.len();
    if h * n_v > ORACLE_MAX_VARS {
        return Err(OracleError::TooLarge { n: h * n_v, limit: ORACLE_MAX_VARS });
    }
    let r = net.routing();
    let weights: Vec<Vec<BigRational>> = net.all_weights().iter().map(|w| w.iter().map(|&x| exact(x)).collect()).collect();
    let transition: Vec<Vec<BigRational>> =
        chain.transition().iter().map(|row| row.iter().map(|&x| exact(x)).collect()).collect();
    let one = BigRational::from_integer(1.into());

    let mut dist: BTreeMap<(usize, Vec<i64>), BigRational> = BTreeMap::new();
    let q_start: Vec<i64> = q0.iter().map(|&x| x as i64).collect();
    for (s, &p) in sigma0.iter().enumerate() {
        if p != 0.0 {
            dist.insert((s, q_start.clone()), exact(p));
        }
    }
    let mut total = BigRational::zero();
    for (t, u) in trajectory.iter().enumerate() {
        let active: Vec<usize> = u.active_links().collect();
        let arrival_support = arrivals.support(t as u64);
        let mut next: BTreeMap<(usize, Vec<i64>), BigRational> = BTreeMap::new();
        for ((s, q), p) in &dist {
            for mask in 0u32..(1u32 << active.len()) {
                let mut p_links = p.clone();
                let mut q_links = q.clone();
                for (bit, &j) in active.iter().enumerate() {
                    let w = &weights[*s][j];
                    if mask >> bit & 1 == 1 {
                        p_links *= w;
                        for (qi, row) in q_links.iter_mut().zip(r) {
                            *qi += row[j];
                        }
                    } else {
                        p_links *= &one - w;
                    }
                }
                if p_links.is_zero() {
                    continue;
                }
                for (a, pa) in &arrival_support {
                    let p_arr = &p_links * exact_ratio(pa);
                    let q_next: Vec<i64> = q_links.iter().zip(a).map(|(x, &ai)| x + ai as i64).collect();
                    for (s_next, ps) in transition[*s].iter().enumerate() {
                        if ps.is_zero() {
                            continue;
                        }
                        *next.entry((s_next, q_next.clone())).or_insert_with(BigRational::zero) += &p_arr * ps;
                    }
                }
            }
        }
        if next.len() > ORACLE_MAX_STATES {
            return Err(OracleError::Support { states: next.len(), limit: ORACLE_MAX_STATES });
        }
        for ((_, q), p) in &next {
            let norm: i64 = q.iter().map(|x| x * x).sum();
            total += p * BigRational::from_integer(norm.into());
        }
        dist = next;
    }
    Ok(total)
}

/// Linear coefficient of coordinate `k` recovered from the oracle:
/// `[J(e_k; q0, arrivals) - J(0; q0, arrivals)] - [J(e_k; 0, none) - J(0; 0, none)]`.
/// Requires arrivals with a slot-independent mean.
pub fn oracle_linear_coefficient(
    net: &Network,
    chain: &MarkovChain,
    arrivals: &ArrivalProcess,
    q0: &[u64],
    sigma0: &[f64],
    horizon: usize,
    k: usize,
) -> Result<BigRational, OracleError> {
    let n_v = net.n_links();
    let idle = vec![ControlVector::idle(n_v); horizon];
    let mut unit = idle.clone();
    unit[k / n_v].0[k % n_v] = true;
    let none = ArrivalProcess::Constant { amount: vec![0; net.n_queues()] };
    let zero = vec![0; net.n_queues()];
    let j = |traj: &[ControlVector], q: &[u64], a: &ArrivalProcess| quadratic_objective_oracle(net, chain, a, q, sigma0, traj);
    let full = j(&unit, q0, arrivals)? - j(&idle, q0, arrivals)?;
    let base = j(&unit, &zero, &none)? - j(&idle, &zero, &none)?;
    Ok(full - base)
}
