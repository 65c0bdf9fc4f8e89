//! Discrete-time Markov chain selecting the active weight matrix.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ChainError;

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITER: usize = 1_000_000;
const OSCILLATION_WINDOW: usize = 4;
const CYCLE_GAP: f64 = 1e-6;

/// Chain description as it appears in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawChain {
    #[serde(rename = "P")]
    pub transition: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<usize>,
    #[serde(default, rename = "sigma0", skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    State(usize),
    Distribution(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovChain {
    transition: Vec<Vec<f64>>,
    initial: Initial,
    /// Set when every row is a unit vector: `successor[i]` is the only
    /// reachable state from `i`.
    successor: Option<Vec<usize>>,
}

impl MarkovChain {
    pub fn new(transition: Vec<Vec<f64>>, initial: Initial) -> Result<Self, ChainError> {
        let n = transition.len();
        if n == 0 {
            return Err(ChainError::Shape { row: 0, expected: 0, found: 0 });
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(ChainError::Shape { row: i, expected: n, found: row.len() });
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ChainError::NotStochastic { row: i, sum });
            }
        }
        match &initial {
            Initial::State(s) if *s >= n => return Err(ChainError::InitialState { state: *s, n_states: n }),
            Initial::Distribution(d) => {
                if d.len() != n {
                    return Err(ChainError::InitialDistribution(format!("{} entries for {n} states", d.len())));
                }
                let sum: f64 = d.iter().sum();
                if d.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(ChainError::InitialDistribution(format!(
                        "entries must be nonnegative and sum to 1, sum is {sum}"
                    )));
                }
            }
            _ => {}
        }
        let successor = transition
            .iter()
            .map(|row| {
                let ones: Vec<usize> = row.iter().enumerate().filter(|(_, &p)| p == 1.0).map(|(j, _)| j).collect();
                let zeros = row.iter().filter(|&&p| p == 0.0).count();
                (ones.len() == 1 && zeros == n - 1).then(|| ones[0])
            })
            .collect::<Option<Vec<usize>>>();
        Ok(MarkovChain { transition, initial, successor })
    }

    pub fn from_raw(raw: &RawChain) -> Result<Self, ChainError> {
        let initial = match (&raw.s0, &raw.sigma0) {
            (Some(s), None) => Initial::State(*s),
            (None, Some(d)) => Initial::Distribution(d.clone()),
            (None, None) => Initial::State(0),
            (Some(_), Some(_)) => return Err(ChainError::InitialDistribution("give either s0 or sigma0, not both".into())),
        };
        MarkovChain::new(raw.transition.clone(), initial)
    }

    pub fn to_raw(&self) -> RawChain {
        let (s0, sigma0) = match &self.initial {
            Initial::State(s) => (Some(*s), None),
            Initial::Distribution(d) => (None, Some(d.clone())),
        };
        RawChain { transition: self.transition.clone(), s0, sigma0 }
    }

    /// Single-state chain, for time-invariant networks.
    pub fn constant() -> Self {
        MarkovChain::new(vec![vec![1.0]], Initial::State(0)).expect("trivial chain")
    }

    /// Chain that moves `i -> successor[i]` with probability one.
    pub fn deterministic(successor: &[usize], s0: usize) -> Result<Self, ChainError> {
        let n = successor.len();
        let transition = successor.iter().map(|&next| (0..n).map(|j| if j == next { 1.0 } else { 0.0 }).collect()).collect();
        MarkovChain::new(transition, Initial::State(s0))
    }

    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn initial(&self) -> &Initial {
        &self.initial
    }

    pub fn is_deterministic(&self) -> bool {
        self.successor.is_some()
    }

    /// Starting state of a simulation; a distribution-valued start is sampled.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.initial {
            Initial::State(s) => *s,
            Initial::Distribution(d) => sample_row(d, rng),
        }
    }

    /// `sigma0 P^t`. Deterministic chains are propagated by index arithmetic.
    pub fn propagate(&self, sigma0: &[f64], t: usize) -> Vec<f64> {
        let n = self.n_states();
        let mut sigma = sigma0.to_vec();
        if let Some(succ) = &self.successor {
            for _ in 0..t {
                let mut next = vec![0.0; n];
                for (i, &p) in sigma.iter().enumerate() {
                    next[succ[i]] += p;
                }
                sigma = next;
            }
            return sigma;
        }
        for _ in 0..t {
            sigma = self.step_distribution(&sigma);
        }
        sigma
    }

    fn step_distribution(&self, sigma: &[f64]) -> Vec<f64> {
        let n = self.n_states();
        let mut next = vec![0.0; n];
        for (i, &p) in sigma.iter().enumerate() {
            if p != 0.0 {
                for (j, &pij) in self.transition[i].iter().enumerate() {
                    next[j] += p * pij;
                }
            }
        }
        next
    }

    /// Stationary distribution by power iteration, started from every basis
    /// vector. Fails if the iteration oscillates (periodic chain), does not
    /// settle, or settles to different limits (reducible chain).
    pub fn stationary(&self) -> Result<Vec<f64>, ChainError> {
        let n = self.n_states();
        let mut limit: Option<Vec<f64>> = None;
        for start in 0..n {
            let mut sigma = vec![0.0; n];
            sigma[start] = 1.0;
            let pi = self.power_iterate(sigma)?;
            match &limit {
                None => limit = Some(pi),
                Some(prev) => {
                    if max_abs_diff(prev, &pi) > 1e-9 {
                        return Err(ChainError::NoConvergence(format!(
                            "starting in states 0 and {start} leads to different limits"
                        )));
                    }
                }
            }
        }
        Ok(limit.expect("at least one state"))
    }

    fn power_iterate(&self, mut sigma: Vec<f64>) -> Result<Vec<f64>, ChainError> {
        let mut history: Vec<Vec<f64>> = Vec::with_capacity(OSCILLATION_WINDOW + 1);
        for _ in 0..STATIONARY_MAX_ITER {
            let next = self.step_distribution(&sigma);
            if max_abs_diff(&next, &sigma) < STATIONARY_TOL {
                let sum: f64 = next.iter().sum();
                return Ok(next.iter().map(|p| p / sum).collect());
            }
            let step_gap = max_abs_diff(&next, &sigma);
            for (lag, past) in history.iter().rev().enumerate() {
                // `past` is sigma_{k - lag - 1}; an exact return to it while
                // consecutive iterates stay far apart means a cycle of length
                // lag + 2. Nearly periodic chains shrink both gaps together.
                if lag + 2 <= OSCILLATION_WINDOW && step_gap > CYCLE_GAP && max_abs_diff(&next, past) < STATIONARY_TOL {
                    return Err(ChainError::NoConvergence(format!("distribution cycles with period {}", lag + 2)));
                }
            }
            history.push(sigma);
            if history.len() > OSCILLATION_WINDOW {
                history.remove(0);
            }
            sigma = next;
        }
        Err(ChainError::NoConvergence(format!("no convergence within {STATIONARY_MAX_ITER} iterations")))
    }

    /// Next state drawn from row `s`, using exactly one uniform draw.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_row(&self.transition[s], rng)
    }
}

fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = j;
            if u < acc {
                return j;
            }
        }
    }
    last_positive
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Indicator distribution of state `s`.
pub fn indicator(n_states: usize, s: usize) -> Vec<f64> {
    let mut d = vec![0.0; n_states];
    d[s] = 1.0;
    d
}
