//! One-step stochastic evolution `q' = q + R M v + a` and full simulation runs.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::SimError;
use crate::markov::MarkovChain;
use crate::model::{first_constituency_violation, ArrivalProcess, ControlVector, Network};
use crate::policies::{DecisionView, Policy};
use crate::Rational;

/// Seeds a ChaCha stream from `(seed, name)`.
pub fn named_stream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Derives a child seed, e.g. one per replication.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Independent random streams of one run. Each source of randomness owns a
/// stream, so the arrivals and chain path do not depend on the policy.
#[derive(Clone, Debug)]
pub struct Streams {
    pub link_success: ChaCha8Rng,
    pub arrivals: ChaCha8Rng,
    pub chain: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            link_success: named_stream(seed, "link-success"),
            arrivals: named_stream(seed, "arrivals"),
            chain: named_stream(seed, "chain"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Length {
        expected: usize,
        found: usize,
    },
    /// Row `row` of `C v <= c` is exceeded.
    Constituency {
        row: usize,
    },
    /// `q + R^- v` is negative at `queue`.
    Positiveness {
        queue: usize,
    },
    /// Active `link` needs a packet at the empty `queue`.
    SourceRequirement {
        queue: usize,
        link: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Length { expected, found } => {
                write!(f, "control has {found} entries, expected {expected}")
            }
            Violation::Constituency { row } => write!(f, "constituency row {row} exceeded"),
            Violation::Positiveness { queue } => write!(f, "positiveness violated at queue {queue}"),
            Violation::SourceRequirement { queue, link } => {
                write!(f, "link {link} requires a packet at empty queue {queue}")
            }
        }
    }
}

/// Checks constituency, positiveness and source requirements of `v` at `q`.
pub fn check_feasible(net: &Network, q: &[u64], v: &ControlVector) -> Result<(), Violation> {
    if v.len() != net.n_links() {
        return Err(Violation::Length { expected: net.n_links(), found: v.len() });
    }
    if let Some(row) = first_constituency_violation(net.constituency(), net.bound(), v) {
        return Err(Violation::Constituency { row });
    }
    for (i, row) in net.drain().iter().enumerate() {
        let efflux: u64 = v.active_links().map(|j| (-row[j]) as u64).sum();
        if efflux > q[i] {
            return Err(Violation::Positiveness { queue: i });
        }
    }
    for link in v.active_links() {
        for (queue, &qi) in q.iter().enumerate() {
            if qi == 0 && net.requires_source(queue, link) {
                return Err(Violation::SourceRequirement { queue, link });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimState {
    pub t: u64,
    pub q: Vec<u64>,
    pub s: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub t: u64,
    pub s: usize,
    pub q_before: Vec<u64>,
    pub v: ControlVector,
    /// Transmission outcomes; zero for links that were not activated.
    pub m: Vec<bool>,
    pub a: Vec<u64>,
    pub q_after: Vec<u64>,
    pub delivered: u64,
}

/// Applies `v` at `state` and draws the next state.
///
/// A success draw is taken for every link each slot (and masked by `v`), so the
/// link-success stream stays aligned across policies.
pub fn step(
    net: &Network,
    arrivals: &ArrivalProcess,
    chain: &MarkovChain,
    state: &SimState,
    v: &ControlVector,
    streams: &mut Streams,
) -> Result<(SimState, StepRecord), SimError> {
    check_feasible(net, &state.q, v).map_err(|violation| SimError::InfeasibleControl {
        t: state.t,
        control: v.to_string(),
        violation: violation.to_string(),
    })?;
    let weights = net.weights(state.s);
    let m: Vec<bool> = (0..net.n_links())
        .map(|j| {
            let u: f64 = streams.link_success.gen();
            v.is_active(j) && u < weights[j]
        })
        .collect();
    let a = arrivals.sample(state.t, &mut streams.arrivals);

    let mut q: Vec<i64> = state.q.iter().map(|&x| x as i64).collect();
    let mut delivered = 0;
    for j in (0..net.n_links()).filter(|&j| m[j]) {
        for (i, row) in net.routing().iter().enumerate() {
            q[i] += row[j];
        }
        if net.is_sink_link(j) {
            delivered += 1;
        }
    }
    for (qi, &ai) in q.iter_mut().zip(&a) {
        *qi += ai as i64;
    }
    debug_assert!(q.iter().all(|&x| x >= 0), "positiveness guaranteed by check_feasible");
    let q_after: Vec<u64> = q.iter().map(|&x| x as u64).collect();
    let s_next = chain.sample_next(state.s, &mut streams.chain);

    let record =
        StepRecord { t: state.t, s: state.s, q_before: state.q.clone(), v: v.clone(), m, a, q_after: q_after.clone(), delivered };
    Ok((SimState { t: state.t + 1, q: q_after, s: s_next }, record))
}

/// Element-wise bound on queue change over `slots` slots:
/// `-slots n_v <= q_{t+slots} - q_t <= slots (n_v + a_hat)`.
pub fn window_bound_holds(net: &Network, before: &[u64], after: &[u64], slots: u64) -> bool {
    let n_v = net.n_links() as i64;
    let slots = slots as i64;
    before.iter().zip(after).zip(net.arrival_bound()).all(|((&b, &a), &hat)| {
        let diff = a as i64 - b as i64;
        diff >= -slots * n_v && diff <= slots * n_v + slots * hat as i64
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceSummary {
    /// Mean of the total queue after each slot.
    pub mean_total_queue: f64,
    pub arrivals: u64,
    pub delivered: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub initial: Vec<u64>,
    pub records: Vec<StepRecord>,
    pub solver_calls: u64,
}

impl Trace {
    pub fn summary(&self) -> TraceSummary {
        let n = self.records.len().max(1) as f64;
        let total: u64 = self.records.iter().map(|r| r.q_after.iter().sum::<u64>()).sum();
        TraceSummary {
            mean_total_queue: total as f64 / n,
            arrivals: self.records.iter().map(|r| r.a.iter().sum::<u64>()).sum(),
            delivered: self.records.iter().map(|r| r.delivered).sum(),
        }
    }

    /// Delivered packets per arrived packet (0 without arrivals).
    pub fn delivered_fraction(&self) -> f64 {
        let s = self.summary();
        if s.arrivals == 0 {
            0.0
        } else {
            s.delivered as f64 / s.arrivals as f64
        }
    }

    /// Total queue after each slot.
    pub fn total_queue(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.q_after.iter().sum()).collect()
    }

    pub fn final_queue(&self) -> &[u64] {
        self.records.last().map_or(&self.initial, |r| &r.q_after)
    }

    /// Writes `t,s,q_*,v_*,m_*,a_*,delivered`, one row per slot, `q` taken
    /// at the start of the slot.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let n_q = self.initial.len();
        let n_v = self.records.first().map_or(0, |r| r.v.len());
        let mut header = vec!["t".to_string(), "s".to_string()];
        header.extend((1..=n_q).map(|i| format!("q_{i}")));
        header.extend((1..=n_v).map(|j| format!("v_{j}")));
        header.extend((1..=n_v).map(|j| format!("m_{j}")));
        header.extend((1..=n_q).map(|i| format!("a_{i}")));
        header.push("delivered".into());
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![r.t.to_string(), r.s.to_string()];
            row.extend(r.q_before.iter().map(u64::to_string));
            row.extend(r.v.iter().map(|b| (b as u8).to_string()));
            row.extend(r.m.iter().map(|&b| (b as u8).to_string()));
            row.extend(r.a.iter().map(u64::to_string));
            row.push(r.delivered.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Inputs of one simulation run.
#[derive(Clone, Debug)]
pub struct RunConfig<'a> {
    pub scenario: &'a str,
    pub network: &'a Network,
    pub chain: &'a MarkovChain,
    pub arrivals: &'a ArrivalProcess,
    pub initial_queues: &'a [u64],
    pub slots: u64,
    pub seed: u64,
}

/// Drives the network for `slots` slots, consulting `policy` once per slot
/// with the observed `(q_t, s_t)`.
pub fn run(cfg: &RunConfig<'_>, policy: &mut dyn Policy) -> Result<Trace, SimError> {
    let net = cfg.network;
    let mut streams = Streams::new(cfg.seed);
    let rate: Vec<Rational> = cfg.arrivals.mean();
    let mut state = SimState { t: 0, q: cfg.initial_queues.to_vec(), s: cfg.chain.initial_state(&mut streams.chain) };
    let mut records = Vec::with_capacity(cfg.slots as usize);
    for _ in 0..cfg.slots {
        let view = DecisionView { network: net, chain: cfg.chain, arrival_rate: &rate, t: state.t, q: &state.q, s: state.s };
        let v = policy.decide(&view).map_err(|source| SimError::Policy { t: state.t, source })?;
        let (next, record) = step(net, cfg.arrivals, cfg.chain, &state, &v, &mut streams)?;
        debug_assert!(window_bound_holds(net, &record.q_before, &record.q_after, 1));
        records.push(record);
        state = next;
    }
    Ok(Trace {
        scenario: cfg.scenario.to_string(),
        policy: policy.name(),
        seed: cfg.seed,
        initial: cfg.initial_queues.to_vec(),
        records,
        solver_calls: policy.solver_calls(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fig1_raw, validate_network};
    use crate::policies::Idle;

    fn fig1() -> Network {
        validate_network(&fig1_raw()).unwrap()
    }

    #[test]
    fn feasibility_examples() {
        let net = fig1();
        let link2 = ControlVector::from_bits(&[0, 1]);
        assert_eq!(check_feasible(&net, &[0, 1], &link2), Ok(()));
        assert_eq!(check_feasible(&net, &[1, 0], &link2), Err(Violation::Positiveness { queue: 1 }));
        assert_eq!(check_feasible(&net, &[0, 0], &ControlVector::idle(2)), Ok(()));
        assert!(matches!(check_feasible(&net, &[0, 0], &ControlVector::idle(3)), Err(Violation::Length { .. })));
    }

    #[test]
    fn source_requirement_blocks_copy_from_empty_queue() {
        let raw = crate::model::RawNetwork {
            routing: vec![vec![-1, 0, -1], vec![0, 1, -1]],
            constituency: vec![vec![1, 1, 1]],
            bound: vec![1],
            weights: vec![vec![0.25, 1.0, 1.0]],
            source_requirement: Some(vec![vec![1, 1, 1], vec![0, 0, 1]]),
            arrival_bound: vec![1, 1],
        };
        let net = validate_network(&raw).unwrap();
        let share = ControlVector::from_bits(&[0, 1, 0]);
        assert_eq!(check_feasible(&net, &[0, 0], &share), Err(Violation::SourceRequirement { queue: 0, link: 1 }));
        assert_eq!(check_feasible(&net, &[1, 0], &share), Ok(()));
        assert_eq!(check_feasible(&net, &[1, 1], &ControlVector::from_bits(&[1, 1, 0])), Err(Violation::Constituency { row: 0 }));
    }

    #[test]
    fn fig1_full_step() {
        let net = fig1();
        let chain = MarkovChain::constant();
        let arrivals = ArrivalProcess::Constant { amount: vec![0, 0] };
        let state = SimState { t: 0, q: vec![1, 1], s: 0 };
        let mut streams = Streams::new(3);
        let (next, rec) = step(&net, &arrivals, &chain, &state, &ControlVector::from_bits(&[1, 1]), &mut streams).unwrap();
        assert_eq!(next.q, vec![0, 1]);
        assert_eq!(rec.m, vec![true, true]);
        assert_eq!(rec.delivered, 1);
    }

    #[test]
    fn idle_step_only_adds_arrivals() {
        let mut raw = fig1_raw();
        raw.weights = vec![vec![0.3, 0.9]];
        raw.arrival_bound = vec![2, 1];
        let net = validate_network(&raw).unwrap();
        let chain = MarkovChain::constant();
        let arrivals = ArrivalProcess::Constant { amount: vec![2, 1] };
        let state = SimState { t: 5, q: vec![4, 0], s: 0 };
        let mut streams = Streams::new(11);
        let (next, rec) = step(&net, &arrivals, &chain, &state, &ControlVector::idle(2), &mut streams).unwrap();
        assert_eq!(next.q, vec![6, 1]);
        assert_eq!(next.t, 6);
        assert_eq!(rec.m, vec![false, false]);
    }

    #[test]
    fn infeasible_control_is_an_error() {
        let net = fig1();
        let chain = MarkovChain::constant();
        let arrivals = ArrivalProcess::Constant { amount: vec![0, 0] };
        let state = SimState { t: 0, q: vec![1, 0], s: 0 };
        let err = step(&net, &arrivals, &chain, &state, &ControlVector::from_bits(&[0, 1]), &mut Streams::new(0)).unwrap_err();
        assert!(err.to_string().contains("positiveness"), "{err}");
    }

    #[test]
    fn idle_policy_without_arrivals_keeps_queues() {
        let net = fig1();
        let chain = MarkovChain::constant();
        let arrivals = ArrivalProcess::Constant { amount: vec![0, 0] };
        let cfg = RunConfig {
            scenario: "idle",
            network: &net,
            chain: &chain,
            arrivals: &arrivals,
            initial_queues: &[3, 2],
            slots: 100,
            seed: 1,
        };
        let trace = run(&cfg, &mut Idle).unwrap();
        assert_eq!(trace.records.len(), 100);
        assert!(trace.records.iter().all(|r| r.q_after == vec![3, 2]));
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,s,q_1,q_2,v_1,v_2,m_1,m_2,a_1,a_2,delivered");
        assert_eq!(text.lines().nth(1).unwrap(), "0,0,3,2,0,0,0,0,0,0,0");
        assert_eq!(text.lines().count(), 101);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = Streams::new(5);
        let mut b = Streams::new(5);
        let xa: u64 = a.arrivals.gen();
        let xb: u64 = b.arrivals.gen();
        assert_eq!(xa, xb);
        let xc: u64 = a.chain.gen();
        assert_ne!(xa, xc);
        assert_ne!(derive_seed(1, "rep-0"), derive_seed(1, "rep-1"));
    }
}
