//! Control policies: max-weight, receding-horizon predictive control, the
//! fixed-trajectory variant, and idle/random baselines.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_feasible, named_stream};
use crate::error::PolicyError;
use crate::markov::{indicator, MarkovChain};
use crate::model::{enumerate_control_set, ControlVector, Network};
use crate::optim::{solve_bip, solve_bip_exhaustive, Bip, BipStatus, DEFAULT_NODE_BUDGET, MAX_EXHAUSTIVE_VARS, TIE_TOL};
use crate::predictor::{build_constraints, objective_from_weights, split_blocks, weight_sequence};
use crate::Rational;

/// What a policy observes at the start of a slot.
#[derive(Clone, Copy, Debug)]
pub struct DecisionView<'a> {
    pub network: &'a Network,
    pub chain: &'a MarkovChain,
    pub arrival_rate: &'a [Rational],
    pub t: u64,
    pub q: &'a [u64],
    pub s: usize,
}

pub trait Policy: Send {
    fn name(&self) -> String;
    fn decide(&mut self, view: &DecisionView<'_>) -> Result<ControlVector, PolicyError>;
    /// Number of prediction problems solved so far.
    fn solver_calls(&self) -> u64 {
        0
    }
}

/// Never activates anything.
#[derive(Clone, Copy, Debug, Default)]
pub struct Idle;

impl Policy for Idle {
    fn name(&self) -> String {
        "IDLE".into()
    }

    fn decide(&mut self, view: &DecisionView<'_>) -> Result<ControlVector, PolicyError> {
        Ok(ControlVector::idle(view.network.n_links()))
    }
}

/// Uniform choice among the controls feasible at the current state.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    controls: Option<Vec<ControlVector>>,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy { rng: named_stream(seed, "policy"), controls: None }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "RANDOM".into()
    }

    fn decide(&mut self, view: &DecisionView<'_>) -> Result<ControlVector, PolicyError> {
        if self.controls.is_none() {
            self.controls = Some(enumerate_control_set(view.network)?);
        }
        let feasible: Vec<&ControlVector> =
            self.controls.iter().flatten().filter(|v| check_feasible(view.network, view.q, v).is_ok()).collect();
        Ok(feasible.choose(&mut self.rng).map(|v| (*v).clone()).unwrap_or_else(|| ControlVector::idle(view.network.n_links())))
    }
}

fn solve(bip: &Bip, node_budget: u64) -> Result<Vec<bool>, PolicyError> {
    let mut sol = solve_bip(bip, node_budget)?;
    if sol.status == BipStatus::BudgetExhausted {
        if bip.n_vars() > MAX_EXHAUSTIVE_VARS {
            return Err(PolicyError::BudgetExhausted { budget: node_budget, n: bip.n_vars() });
        }
        log::warn!("node budget {node_budget} exhausted on {} variables, enumerating", bip.n_vars());
        sol = solve_bip_exhaustive(bip)?;
    }
    match sol.status {
        BipStatus::Optimal => Ok(sol.x),
        _ => Err(PolicyError::Infeasible),
    }
}

fn plan_with_weights(
    net: &Network,
    q0: &[u64],
    abar: &[Rational],
    what: &[Vec<f64>],
    node_budget: u64,
) -> Result<Vec<ControlVector>, PolicyError> {
    let mut bip = build_constraints(net, q0, abar, what.len());
    bip.cost = objective_from_weights(net, q0, abar, what);
    Ok(split_blocks(&solve(&bip, node_budget)?, net.n_links()))
}

/// Lexicographically smallest optimal `H`-slot trajectory of the prediction problem.
pub fn pnc_plan(
    net: &Network,
    chain: &MarkovChain,
    abar: &[Rational],
    q0: &[u64],
    s0: usize,
    horizon: usize,
    node_budget: u64,
) -> Result<Vec<ControlVector>, PolicyError> {
    if horizon == 0 {
        return Err(PolicyError::Horizon);
    }
    let what = weight_sequence(chain, net.all_weights(), &indicator(chain.n_states(), s0), horizon);
    plan_with_weights(net, q0, abar, &what, node_budget)
}

/// First block of [`pnc_plan`].
pub fn pnc_decide(
    net: &Network,
    chain: &MarkovChain,
    abar: &[Rational],
    q0: &[u64],
    s0: usize,
    horizon: usize,
    node_budget: u64,
) -> Result<ControlVector, PolicyError> {
    Ok(pnc_plan(net, chain, abar, q0, s0, horizon, node_budget)?.swap_remove(0))
}

/// Max-weight decision: the one-slot prediction problem with the weights of the observed state.
pub fn mw_decide(net: &Network, q0: &[u64], s0: usize, abar: &[Rational]) -> Result<ControlVector, PolicyError> {
    let what = vec![net.weights(s0).to_vec()];
    Ok(plan_with_weights(net, q0, abar, &what, DEFAULT_NODE_BUDGET)?.swap_remove(0))
}

/// Classical back-pressure: `argmax_v (q0 + abar)^T (-R W^{s0}) v` over the
/// feasible enumerated controls, first maximizer in lexicographic order.
pub fn backpressure_oracle(net: &Network, q0: &[u64], s0: usize, abar: &[Rational]) -> Result<ControlVector, PolicyError> {
    let r = net.routing();
    let w = net.weights(s0);
    let backlog: Vec<f64> = q0.iter().zip(abar).map(|(&q, a)| q as f64 + *a.numer() as f64 / *a.denom() as f64).collect();
    let gain: Vec<f64> =
        (0..net.n_links()).map(|j| -(0..net.n_queues()).map(|i| backlog[i] * r[i][j] as f64).sum::<f64>() * w[j]).collect();
    let mut best: Option<(ControlVector, f64)> = None;
    for v in enumerate_control_set(net)? {
        if check_feasible(net, q0, &v).is_err() {
            continue;
        }
        let value: f64 = v.active_links().map(|j| gain[j]).sum();
        if best.as_ref().is_none_or(|(_, b)| value > b + TIE_TOL) {
            best = Some((v, value));
        }
    }
    best.map(|(v, _)| v).ok_or(PolicyError::Infeasible)
}

type MemoKey = (Vec<u64>, usize);

/// Receding-horizon predictive control: re-plans every slot and applies the
/// first control. Decisions are memoized on `(q, s)`, which is exact because
/// the decision is a pure function of the observed state.
#[derive(Debug)]
pub struct Pnc {
    horizon: usize,
    node_budget: u64,
    calls: u64,
    memo: HashMap<MemoKey, ControlVector>,
}

impl Pnc {
    pub fn new(horizon: usize, node_budget: u64) -> Result<Self, PolicyError> {
        if horizon == 0 {
            return Err(PolicyError::Horizon);
        }
        Ok(Pnc { horizon, node_budget, calls: 0, memo: HashMap::new() })
    }
}

impl Policy for Pnc {
    fn name(&self) -> String {
        format!("PNC(H={})", self.horizon)
    }

    fn decide(&mut self, view: &DecisionView<'_>) -> Result<ControlVector, PolicyError> {
        self.calls += 1;
        let key = (view.q.to_vec(), view.s);
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let v = pnc_decide(view.network, view.chain, view.arrival_rate, view.q, view.s, self.horizon, self.node_budget)?;
        self.memo.insert(key, v.clone());
        Ok(v)
    }

    fn solver_calls(&self) -> u64 {
        self.calls
    }
}

/// Max-weight scheduling.
#[derive(Debug, Default)]
pub struct Mw {
    calls: u64,
    memo: HashMap<MemoKey, ControlVector>,
}

impl Mw {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Policy for Mw {
    fn name(&self) -> String {
        "MW".into()
    }

    fn decide(&mut self, view: &DecisionView<'_>) -> Result<ControlVector, PolicyError> {
        self.calls += 1;
        let key = (view.q.to_vec(), view.s);
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let v = mw_decide(view.network, view.q, view.s, view.arrival_rate)?;
        self.memo.insert(key, v.clone());
        Ok(v)
    }

    fn solver_calls(&self) -> u64 {
        self.calls
    }
}

/// Fixed-trajectory predictive control: applies all `H` planned controls
/// before planning again.
#[derive(Debug)]
pub struct Fpnc {
    horizon: usize,
    node_budget: u64,
    calls: u64,
    pending: VecDeque<ControlVector>,
    memo: HashMap<MemoKey, Vec<ControlVector>>,
    repairs: u64,
}

impl Fpnc {
    pub fn new(horizon: usize, node_budget: u64) -> Result<Self, PolicyError> {
        if horizon == 0 {
            return Err(PolicyError::Horizon);
        }
        Ok(Fpnc { horizon, node_budget, calls: 0, pending: VecDeque::new(), memo: HashMap::new(), repairs: 0 })
    }

    /// How many planned controls had to be cut back to stay feasible.
    pub fn repairs(&self) -> u64 {
        self.repairs
    }
}

/// Keeps the planned links, in index order, as long as the partial control stays feasible.
pub fn repair(net: &Network, q: &[u64], planned: &ControlVector) -> ControlVector {
    let mut v = ControlVector::idle(planned.len());
    for j in planned.active_links() {
        v.0[j] = true;
        if check_feasible(net, q, &v).is_err() {
            v.0[j] = false;
        }
    }
    v
}

impl Policy for Fpnc {
    fn name(&self) -> String {
        format!("fPNC(H={})", self.horizon)
    }

    fn decide(&mut self, view: &DecisionView<'_>) -> Result<ControlVector, PolicyError> {
        if self.pending.is_empty() {
            self.calls += 1;
            let key = (view.q.to_vec(), view.s);
            let plan = match self.memo.get(&key) {
                Some(p) => p.clone(),
                None => {
                    let p =
                        pnc_plan(view.network, view.chain, view.arrival_rate, view.q, view.s, self.horizon, self.node_budget)?;
                    self.memo.insert(key, p.clone());
                    p
                }
            };
            self.pending.extend(plan);
        }
        let planned = self.pending.pop_front().expect("plan has H >= 1 blocks");
        if check_feasible(view.network, view.q, &planned).is_ok() {
            return Ok(planned);
        }
        self.repairs += 1;
        Ok(repair(view.network, view.q, &planned))
    }

    fn solver_calls(&self) -> u64 {
        self.calls
    }
}

fn default_budget() -> u64 {
    DEFAULT_NODE_BUDGET
}

/// JSON form: `{"kind": "PNC", "H": 5}`; `node_budget` is optional.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum PolicySpec {
    #[serde(rename = "MW")]
    Mw,
    #[serde(rename = "PNC")]
    Pnc {
        #[serde(rename = "H")]
        horizon: usize,
        #[serde(default = "default_budget")]
        node_budget: u64,
    },
    #[serde(rename = "FPNC", alias = "fPNC")]
    Fpnc {
        #[serde(rename = "H")]
        horizon: usize,
        #[serde(default = "default_budget")]
        node_budget: u64,
    },
    #[serde(rename = "IDLE")]
    Idle,
    #[serde(rename = "RANDOM")]
    Random,
}

impl PolicySpec {
    pub fn pnc(horizon: usize) -> Self {
        PolicySpec::Pnc { horizon, node_budget: DEFAULT_NODE_BUDGET }
    }

    pub fn fpnc(horizon: usize) -> Self {
        PolicySpec::Fpnc { horizon, node_budget: DEFAULT_NODE_BUDGET }
    }

    /// Parses a CLI-style kind (`MW`, `PNC`, `FPNC`, `IDLE`, `RANDOM`, any case).
    pub fn from_kind(kind: &str, horizon: Option<usize>) -> Result<Self, String> {
        let need_h = || horizon.ok_or_else(|| format!("policy {kind} needs --horizon"));
        match kind.to_ascii_uppercase().as_str() {
            "MW" => Ok(PolicySpec::Mw),
            "PNC" => Ok(PolicySpec::pnc(need_h()?)),
            "FPNC" => Ok(PolicySpec::fpnc(need_h()?)),
            "IDLE" => Ok(PolicySpec::Idle),
            "RANDOM" => Ok(PolicySpec::Random),
            other => Err(format!("unknown policy kind '{other}' (expected MW, PNC, FPNC, IDLE or RANDOM)")),
        }
    }

    pub fn horizon(&self) -> Option<usize> {
        match self {
            PolicySpec::Pnc { horizon, .. } | PolicySpec::Fpnc { horizon, .. } => Some(*horizon),
            PolicySpec::Mw => Some(1),
            _ => None,
        }
    }

    /// Display label, matching [`Policy::name`].
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Mw => "MW".into(),
            PolicySpec::Pnc { horizon, .. } => format!("PNC(H={horizon})"),
            PolicySpec::Fpnc { horizon, .. } => format!("fPNC(H={horizon})"),
            PolicySpec::Idle => "IDLE".into(),
            PolicySpec::Random => "RANDOM".into(),
        }
    }

    /// `seed` only matters for the random baseline.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Policy>, PolicyError> {
        Ok(match self {
            PolicySpec::Mw => Box::new(Mw::new()),
            PolicySpec::Pnc { horizon, node_budget } => Box::new(Pnc::new(*horizon, *node_budget)?),
            PolicySpec::Fpnc { horizon, node_budget } => Box::new(Fpnc::new(*horizon, *node_budget)?),
            PolicySpec::Idle => Box::new(Idle),
            PolicySpec::Random => Box::new(RandomPolicy::new(seed)),
        })
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::dynamics::{run, RunConfig};
    use crate::model::{fig1_raw, validate_network, ArrivalProcess, RawNetwork};

    fn zero(n: usize) -> Vec<Rational> {
        vec![Rational::from_integer(0); n]
    }

    fn example2() -> Network {
        validate_network(&RawNetwork {
            routing: vec![vec![-1, 0, -1], vec![0, 1, -1]],
            constituency: vec![vec![1, 1, 1]],
            bound: vec![1],
            weights: vec![vec![0.25, 1.0, 1.0]],
            source_requirement: Some(vec![vec![1, 1, 1], vec![0, 0, 1]]),
            arrival_bound: vec![1, 0],
        })
        .unwrap()
    }

    #[test]
    fn empty_network_stays_idle() {
        let net = validate_network(&fig1_raw()).unwrap();
        let chain = MarkovChain::constant();
        for h in 1..4 {
            let v = pnc_decide(&net, &chain, &zero(2), &[0, 0], 0, h, DEFAULT_NODE_BUDGET).unwrap();
            assert!(v.is_idle());
        }
        assert!(mw_decide(&net, &[0, 0], 0, &zero(2)).unwrap().is_idle());
    }

    #[test]
    fn fig1_unit_horizon_uses_only_the_first_link() {
        // Cost 2 q0^T R W = 2 (3, 0) [[-1, 0], [1, -1]] = (-6, 0); link 2 is infeasible anyway.
        let net = validate_network(&fig1_raw()).unwrap();
        let v = pnc_decide(&net, &MarkovChain::constant(), &zero(2), &[3, 0], 0, 1, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(v, ControlVector::from_bits(&[1, 0]));
    }

    #[test]
    fn example2_two_step_plan_shares_then_drains() {
        let net = example2();
        let plan = pnc_plan(&net, &MarkovChain::constant(), &zero(2), &[4, 0], 0, 2, DEFAULT_NODE_BUDGET).unwrap();
        // Copying into the empty second queue enables the paired drain next slot.
        assert_eq!(plan, vec![ControlVector::from_bits(&[0, 1, 0]), ControlVector::from_bits(&[0, 0, 1])]);
        let mw = mw_decide(&net, &[4, 0], 0, &zero(2)).unwrap();
        assert_eq!(mw, ControlVector::from_bits(&[1, 0, 0]));
    }

    #[test]
    fn unit_horizon_fpnc_matches_pnc() {
        let net = example2();
        let chain = MarkovChain::constant();
        let arrivals =
            ArrivalProcess::BernoulliBatch { batch: vec![1, 0], rate: vec![Rational::new(9, 20), Rational::from_integer(0)] };
        let cfg = RunConfig {
            scenario: "t",
            network: &net,
            chain: &chain,
            arrivals: &arrivals,
            initial_queues: &[0, 0],
            slots: 300,
            seed: 3,
        };
        let a = run(&cfg, &mut Pnc::new(1, DEFAULT_NODE_BUDGET).unwrap()).unwrap();
        let b = run(&cfg, &mut Fpnc::new(1, DEFAULT_NODE_BUDGET).unwrap()).unwrap();
        let c = run(&cfg, &mut Mw::new()).unwrap();
        let controls = |t: &crate::dynamics::Trace| t.records.iter().map(|r| r.v.clone()).collect::<Vec<_>>();
        assert_eq!(controls(&a), controls(&b));
        assert_eq!(controls(&a), controls(&c));
    }

    #[test]
    fn solver_call_counts() {
        let net = example2();
        let chain = MarkovChain::constant();
        let arrivals =
            ArrivalProcess::BernoulliBatch { batch: vec![1, 0], rate: vec![Rational::new(1, 2), Rational::from_integer(0)] };
        let cfg = RunConfig {
            scenario: "t",
            network: &net,
            chain: &chain,
            arrivals: &arrivals,
            initial_queues: &[0, 0],
            slots: 100,
            seed: 5,
        };
        assert_eq!(run(&cfg, &mut Pnc::new(2, DEFAULT_NODE_BUDGET).unwrap()).unwrap().solver_calls, 100);
        assert_eq!(run(&cfg, &mut Fpnc::new(3, DEFAULT_NODE_BUDGET).unwrap()).unwrap().solver_calls, 34);
    }

    #[test]
    fn repair_drops_only_violating_links() {
        let net = validate_network(&fig1_raw()).unwrap();
        let v = repair(&net, &[1, 0], &ControlVector::from_bits(&[1, 1]));
        assert_eq!(v, ControlVector::from_bits(&[1, 0]));
        let v = repair(&net, &[0, 1], &ControlVector::from_bits(&[1, 1]));
        assert_eq!(v, ControlVector::from_bits(&[0, 1]));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec: PolicySpec = serde_json::from_str(r#"{"kind":"PNC","H":5}"#).unwrap();
        assert_eq!(spec, PolicySpec::pnc(5));
        let spec: PolicySpec = serde_json::from_str(r#"{"kind":"fPNC","H":3,"node_budget":10}"#).unwrap();
        assert_eq!(spec, PolicySpec::Fpnc { horizon: 3, node_budget: 10 });
        let text = serde_json::to_string(&PolicySpec::Mw).unwrap();
        assert_eq!(text, r#"{"kind":"MW"}"#);
        assert!(serde_json::from_str::<PolicySpec>(r#"{"kind":"PNC"}"#).is_err());
        assert!(matches!(PolicySpec::pnc(0).build(0), Err(PolicyError::Horizon)));
        assert_eq!(PolicySpec::from_kind("fpnc", Some(2)).unwrap().label(), "fPNC(H=2)");
        assert!(PolicySpec::from_kind("PNC", None).is_err());
    }

    #[test]
    fn random_policy_is_feasible_and_seeded() {
        let net = example2();
        let chain = MarkovChain::constant();
        let arrivals =
            ArrivalProcess::BernoulliBatch { batch: vec![1, 0], rate: vec![Rational::new(1, 2), Rational::from_integer(0)] };
        let cfg = RunConfig {
            scenario: "t",
            network: &net,
            chain: &chain,
            arrivals: &arrivals,
            initial_queues: &[2, 0],
            slots: 200,
            seed: 1,
        };
        let a = run(&cfg, &mut RandomPolicy::new(4)).unwrap();
        let b = run(&cfg, &mut RandomPolicy::new(4)).unwrap();
        assert_eq!(a.records, b.records);
    }

    proptest! {
        #[test]
        fn mw_is_unit_horizon_pnc_and_backpressure(
            routing in prop::collection::vec(prop::collection::vec(-1i64..=1, 3), 2),
            c in prop::collection::vec(0u64..=1, 3),
            w in prop::collection::vec(prop::collection::vec(0u32..=4, 3), 2),
            q0 in prop::collection::vec(0u64..=3, 2),
            a in prop::collection::vec(0i64..=4, 2),
            s0 in 0usize..2,
        ) {
            let net = validate_network(&RawNetwork {
                routing,
                constituency: vec![c],
                bound: vec![1],
                weights: w.iter().map(|r| r.iter().map(|&k| k as f64 / 4.0).collect()).collect(),
                source_requirement: None,
                arrival_bound: vec![1, 1],
            }).unwrap();
            let chain = MarkovChain::new(vec![vec![0.5, 0.5], vec![0.25, 0.75]], crate::markov::Initial::State(0)).unwrap();
            let abar: Vec<Rational> = a.iter().map(|&k| Rational::new(k, 4)).collect();
            let mw = mw_decide(&net, &q0, s0, &abar).unwrap();
            let pnc = pnc_decide(&net, &chain, &abar, &q0, s0, 1, DEFAULT_NODE_BUDGET).unwrap();
            let bp = backpressure_oracle(&net, &q0, s0, &abar).unwrap();
            prop_assert_eq!(&mw, &pnc);
            prop_assert_eq!(&mw, &bp);
            prop_assert!(check_feasible(&net, &q0, &mw).is_ok());
        }
    }
}
