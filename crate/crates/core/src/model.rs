//! Static queueing-network model: routing, activation constraints, link
//! success probabilities and arrival processes.

use std::fmt;

use num::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::Rational;

/// Largest link count for which the admissible control set is enumerated.
pub const MAX_ENUMERATED_LINKS: usize = 24;

/// Network description as it appears in a scenario file, before validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNetwork {
    /// Routing matrix, one row per queue, one column per link.
    pub routing: Vec<Vec<i64>>,
    /// Constituency matrix `C` (one row per activation constraint).
    pub constituency: Vec<Vec<u64>>,
    /// Constituency bound `c`.
    pub bound: Vec<u64>,
    /// Diagonals of the success-probability matrices, one row per chain state.
    pub weights: Vec<Vec<f64>>,
    /// Optional explicit source requirements (queue x link, entries 0/1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_requirement: Option<Vec<Vec<u8>>>,
    /// Element-wise upper bound on per-slot arrivals.
    pub arrival_bound: Vec<u64>,
}

/// A validated network. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    raw: RawNetwork,
    routing: Vec<Vec<i64>>,
    drain: Vec<Vec<i64>>,
    source_req: Vec<Vec<bool>>,
    conventional: bool,
    warnings: Vec<String>,
}

impl Network {
    pub fn n_queues(&self) -> usize {
        self.routing.len()
    }

    pub fn n_links(&self) -> usize {
        self.routing[0].len()
    }

    pub fn n_states(&self) -> usize {
        self.raw.weights.len()
    }

    pub fn routing(&self) -> &[Vec<i64>] {
        &self.routing
    }

    /// `R^-`: the routing matrix with its positive entries removed.
    pub fn drain(&self) -> &[Vec<i64>] {
        &self.drain
    }

    pub fn constituency(&self) -> &[Vec<u64>] {
        &self.raw.constituency
    }

    pub fn bound(&self) -> &[u64] {
        &self.raw.bound
    }

    /// Diagonal of `W^s`.
    pub fn weights(&self, state: usize) -> &[f64] {
        &self.raw.weights[state]
    }

    pub fn all_weights(&self) -> &[Vec<f64>] {
        &self.raw.weights
    }

    /// Whether activating `link` requires `queue` to hold at least one packet.
    pub fn requires_source(&self, queue: usize, link: usize) -> bool {
        self.source_req[queue][link]
    }

    pub fn arrival_bound(&self) -> &[u64] {
        &self.raw.arrival_bound
    }

    /// Every link has exactly one origin and at most one destination.
    pub fn is_conventional(&self) -> bool {
        self.conventional
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn raw(&self) -> &RawNetwork {
        &self.raw
    }

    /// Column `link` of the routing matrix.
    pub fn link_column(&self, link: usize) -> Vec<i64> {
        self.routing.iter().map(|row| row[link]).collect()
    }

    /// A sink link drains at least one queue and feeds none; its successful
    /// activation delivers one packet out of the system.
    pub fn is_sink_link(&self, link: usize) -> bool {
        let col = self.link_column(link);
        col.contains(&-1) && !col.contains(&1)
    }

    /// A link without any origin queue (it only injects packets).
    pub fn is_copy_link(&self, link: usize) -> bool {
        self.link_column(link).iter().all(|&r| r != -1)
    }

    /// `C v <= c`.
    pub fn satisfies_constituency(&self, v: &ControlVector) -> bool {
        first_constituency_violation(&self.raw.constituency, &self.raw.bound, v).is_none()
    }
}

/// `min(R, 0)` element-wise.
pub fn negative_part(routing: &[Vec<i64>]) -> Vec<Vec<i64>> {
    routing.iter().map(|row| row.iter().map(|&r| r.min(0)).collect()).collect()
}

pub(crate) fn first_constituency_violation(constituency: &[Vec<u64>], bound: &[u64], v: &ControlVector) -> Option<usize> {
    constituency.iter().zip(bound).position(|(row, &c)| {
        let load: u64 = row.iter().zip(v.iter()).filter(|(_, active)| *active).map(|(&coef, _)| coef).sum();
        load > c
    })
}

/// Checks every invariant of the network model and derives `R^-`, the default
/// source requirements and the conventional flag.
pub fn validate_network(raw: &RawNetwork) -> Result<Network, ModelError> {
    let n_q = raw.routing.len();
    if n_q == 0 {
        return Err(ModelError::Empty("routing"));
    }
    let n_v = raw.routing[0].len();
    for (i, row) in raw.routing.iter().enumerate() {
        if row.len() != n_v {
            return Err(ModelError::Dimension { field: format!("routing[{i}]"), expected: n_v, found: row.len() });
        }
        for (j, &r) in row.iter().enumerate() {
            if !(-1..=1).contains(&r) {
                return Err(ModelError::OutOfDomain {
                    field: format!("routing[{i}][{j}]"),
                    value: r.to_string(),
                    domain: "{-1, 0, 1}",
                });
            }
        }
    }

    if raw.constituency.len() != raw.bound.len() {
        return Err(ModelError::Dimension { field: "bound".into(), expected: raw.constituency.len(), found: raw.bound.len() });
    }
    for (k, row) in raw.constituency.iter().enumerate() {
        if row.len() != n_v {
            return Err(ModelError::Dimension { field: format!("constituency[{k}]"), expected: n_v, found: row.len() });
        }
    }

    if raw.weights.is_empty() {
        return Err(ModelError::Empty("weights"));
    }
    for (s, diag) in raw.weights.iter().enumerate() {
        if diag.len() != n_v {
            return Err(ModelError::Dimension { field: format!("weights[{s}]"), expected: n_v, found: diag.len() });
        }
        for (j, &w) in diag.iter().enumerate() {
            if !(0.0..=1.0).contains(&w) {
                return Err(ModelError::ProbabilityOutOfRange { field: format!("weights[{s}][{j}]"), value: w });
            }
        }
    }

    if raw.arrival_bound.len() != n_q {
        return Err(ModelError::Dimension { field: "arrival_bound".into(), expected: n_q, found: raw.arrival_bound.len() });
    }

    let drain = negative_part(&raw.routing);
    let mut source_req: Vec<Vec<bool>> = drain.iter().map(|row| row.iter().map(|&d| d == -1).collect()).collect();
    if let Some(req) = &raw.source_requirement {
        if req.len() != n_q {
            return Err(ModelError::Dimension { field: "source_requirement".into(), expected: n_q, found: req.len() });
        }
        for (i, row) in req.iter().enumerate() {
            if row.len() != n_v {
                return Err(ModelError::Dimension { field: format!("source_requirement[{i}]"), expected: n_v, found: row.len() });
            }
            for (j, &e) in row.iter().enumerate() {
                match e {
                    0 => {}
                    1 => source_req[i][j] = true,
                    other => {
                        return Err(ModelError::OutOfDomain {
                            field: format!("source_requirement[{i}][{j}]"),
                            value: other.to_string(),
                            domain: "{0, 1}",
                        })
                    }
                }
            }
        }
    }

    let mut warnings = Vec::new();
    let mut conventional = true;
    for j in 0..n_v {
        let origins = raw.routing.iter().filter(|row| row[j] == -1).count();
        let destinations = raw.routing.iter().filter(|row| row[j] == 1).count();
        if origins == 0 && destinations == 0 {
            warnings.push(format!("link {j} has an all-zero routing column and no effect"));
        }
        if origins != 1 || destinations > 1 {
            conventional = false;
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(Network { raw: raw.clone(), routing: raw.routing.clone(), drain, source_req, conventional, warnings })
}

/// Binary link-activation vector. Ordered lexicographically with `0 < 1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ControlVector(pub Vec<bool>);

impl ControlVector {
    pub fn idle(n_links: usize) -> Self {
        ControlVector(vec![false; n_links])
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        ControlVector(bits.iter().map(|&b| b != 0).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_active(&self, link: usize) -> bool {
        self.0[link]
    }

    pub fn is_idle(&self) -> bool {
        self.0.iter().all(|a| !a)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn active_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j)
    }
}

impl fmt::Display for ControlVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &a in &self.0 {
            f.write_str(if a { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// All `v in {0,1}^{n_v}` with `C v <= c`, sorted lexicographically.
pub fn enumerate_control_set(net: &Network) -> Result<Vec<ControlVector>, ModelError> {
    let n_v = net.n_links();
    if n_v > MAX_ENUMERATED_LINKS {
        return Err(ModelError::TooManyLinks { n_links: n_v, limit: MAX_ENUMERATED_LINKS });
    }
    // Counting with link 0 as the most significant bit visits vectors in
    // lexicographic order.
    let set = (0u64..1 << n_v)
        .map(|code| ControlVector((0..n_v).map(|j| code >> (n_v - 1 - j) & 1 == 1).collect()))
        .filter(|v| net.satisfies_constituency(v))
        .collect();
    Ok(set)
}

mod rational_list {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::Rational;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(values.iter().map(|r| r.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let reprs = Vec::<Repr>::deserialize(d)?;
        reprs
            .into_iter()
            .map(|r| match r {
                Repr::Int(n) => Ok(Rational::from_integer(n)),
                Repr::Text(t) => crate::parse_rational(&t).map_err(D::Error::custom),
            })
            .collect()
    }
}

/// Exogenous packet arrivals, one entry per queue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalProcess {
    /// `amount` packets every slot.
    Constant { amount: Vec<u64> },
    /// `amount` packets in every slot with `t % period == phase`.
    Periodic {
        period: u64,
        #[serde(default)]
        phase: u64,
        amount: Vec<u64>,
    },
    /// Independently per queue and slot, a batch of `batch[i]` packets with
    /// probability `rate[i] / batch[i]`.
    BernoulliBatch {
        batch: Vec<u64>,
        #[serde(with = "rational_list")]
        rate: Vec<Rational>,
    },
}

impl ArrivalProcess {
    pub fn n_queues(&self) -> usize {
        match self {
            ArrivalProcess::Constant { amount } | ArrivalProcess::Periodic { amount, .. } => amount.len(),
            ArrivalProcess::BernoulliBatch { batch, .. } => batch.len(),
        }
    }

    /// Mean arrival rate per slot.
    pub fn mean(&self) -> Vec<Rational> {
        match self {
            ArrivalProcess::Constant { amount } => amount.iter().map(|&a| Rational::from_integer(a as i64)).collect(),
            ArrivalProcess::Periodic { period, amount, .. } => {
                amount.iter().map(|&a| Rational::new(a as i64, *period as i64)).collect()
            }
            ArrivalProcess::BernoulliBatch { rate, .. } => rate.clone(),
        }
    }

    /// Largest value any single sample can take, per queue.
    pub fn max_sample(&self) -> Vec<u64> {
        match self {
            ArrivalProcess::Constant { amount } | ArrivalProcess::Periodic { amount, .. } => amount.clone(),
            ArrivalProcess::BernoulliBatch { batch, rate } => {
                batch.iter().zip(rate).map(|(&b, r)| if r.is_zero() { 0 } else { b }).collect()
            }
        }
    }

    /// Success probability of each queue's batch (Bernoulli kind only).
    fn batch_probabilities(batch: &[u64], rate: &[Rational]) -> Vec<Rational> {
        batch
            .iter()
            .zip(rate)
            .map(|(&b, r)| if b == 0 { Rational::zero() } else { r / Rational::from_integer(b as i64) })
            .collect()
    }

    pub fn validate(&self, net: &Network) -> Result<(), ModelError> {
        let n_q = net.n_queues();
        match self {
            ArrivalProcess::Constant { .. } => {}
            ArrivalProcess::Periodic { period, phase, .. } => {
                if *period == 0 || phase >= period {
                    return Err(ModelError::InvalidArrivals(format!(
                        "periodic arrivals need 0 <= phase < period, got phase {phase}, period {period}"
                    )));
                }
            }
            ArrivalProcess::BernoulliBatch { batch, rate } => {
                if batch.len() != rate.len() {
                    return Err(ModelError::Dimension {
                        field: "arrivals.rate".into(),
                        expected: batch.len(),
                        found: rate.len(),
                    });
                }
                for (i, p) in Self::batch_probabilities(batch, rate).iter().enumerate() {
                    let r = &rate[i];
                    if *r < Rational::zero() || *p > Rational::from_integer(1) || (batch[i] == 0 && !r.is_zero()) {
                        return Err(ModelError::InvalidArrivals(format!(
                            "arrivals.rate[{i}] = {r} is not reachable with batch size {}",
                            batch[i]
                        )));
                    }
                }
            }
        }
        if self.n_queues() != n_q {
            return Err(ModelError::Dimension { field: "arrivals".into(), expected: n_q, found: self.n_queues() });
        }
        for (i, (&m, &bound)) in self.max_sample().iter().zip(net.arrival_bound()).enumerate() {
            if m > bound {
                return Err(ModelError::InvalidArrivals(format!(
                    "arrivals at queue {i} can reach {m}, above arrival_bound {bound}"
                )));
            }
        }
        Ok(())
    }

    /// Draws the arrival vector of slot `t`. Bernoulli arrivals consume exactly
    /// one draw per queue per slot; deterministic kinds consume none.
    pub fn sample<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> Vec<u64> {
        match self {
            ArrivalProcess::Constant { amount } => amount.clone(),
            ArrivalProcess::Periodic { period, phase, amount } => {
                if t % period == *phase {
                    amount.clone()
                } else {
                    vec![0; amount.len()]
                }
            }
            ArrivalProcess::BernoulliBatch { batch, rate } => Self::batch_probabilities(batch, rate)
                .iter()
                .zip(batch)
                .map(|(p, &b)| {
                    let den = *p.denom() as u64;
                    let num = *p.numer() as u64;
                    if rng.gen_range(0..den) < num {
                        b
                    } else {
                        0
                    }
                })
                .collect(),
        }
    }

    /// Finite support of the slot-`t` arrival vector with exact probabilities.
    pub fn support(&self, t: u64) -> Vec<(Vec<u64>, Rational)> {
        match self {
            ArrivalProcess::Constant { amount } => vec![(amount.clone(), Rational::from_integer(1))],
            ArrivalProcess::Periodic { period, phase, amount } => {
                let a = if t % period == *phase { amount.clone() } else { vec![0; amount.len()] };
                vec![(a, Rational::from_integer(1))]
            }
            ArrivalProcess::BernoulliBatch { batch, rate } => {
                let probs = Self::batch_probabilities(batch, rate);
                let mut out: Vec<(Vec<u64>, Rational)> = vec![(Vec::new(), Rational::from_integer(1))];
                for (p, &b) in probs.iter().zip(batch) {
                    let mut next = Vec::with_capacity(out.len() * 2);
                    for (prefix, prob) in &out {
                        if !p.is_zero() {
                            let mut hit = prefix.clone();
                            hit.push(b);
                            next.push((hit, prob * p));
                        }
                        if *p != Rational::from_integer(1) {
                            let mut miss = prefix.clone();
                            miss.push(0);
                            next.push((miss, prob * (Rational::from_integer(1) - p)));
                        }
                    }
                    out = next;
                }
                out
            }
        }
    }

    /// Mean rates as floating point, for cost assembly.
    pub fn mean_f64(&self) -> Vec<f64> {
        self.mean().iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fig1_raw() -> RawNetwork {
        RawNetwork {
            routing: vec![vec![-1, 0], vec![1, -1]],
            constituency: vec![vec![0, 0]],
            bound: vec![1],
            weights: vec![vec![1.0, 1.0]],
            source_requirement: None,
            arrival_bound: vec![1, 0],
        }
    }

    #[test]
    fn fig1_network_is_conventional() {
        let net = validate_network(&fig1_raw()).unwrap();
        assert!(net.is_conventional());
        assert_eq!(net.drain(), &[vec![-1, 0], vec![0, -1]]);
        assert!(net.requires_source(0, 0));
        assert!(net.requires_source(1, 1));
        assert!(!net.requires_source(1, 0));
        assert!(net.warnings().is_empty());
    }

    #[test]
    fn zero_column_is_flagged_not_rejected() {
        let mut raw = fig1_raw();
        raw.routing = vec![vec![-1, 0], vec![1, 0]];
        let net = validate_network(&raw).unwrap();
        assert_eq!(net.warnings().len(), 1);
        assert!(net.warnings()[0].contains("link 1"));
    }

    #[test]
    fn probability_out_of_range() {
        let mut raw = fig1_raw();
        raw.weights = vec![vec![1.3, 1.0]];
        let err = validate_network(&raw).unwrap_err();
        assert!(err.to_string().contains("probability out of range"), "{err}");
        assert!(err.to_string().contains("weights[0][0]"));
    }

    #[test]
    fn dimension_errors_name_the_field() {
        let mut raw = fig1_raw();
        raw.routing[1].push(0);
        let err = validate_network(&raw).unwrap_err();
        assert!(err.to_string().contains("routing[1]"), "{err}");

        let mut raw = fig1_raw();
        raw.routing[0][1] = 2;
        let err = validate_network(&raw).unwrap_err();
        assert!(err.to_string().contains("routing[0][1]"), "{err}");

        let mut raw = fig1_raw();
        raw.arrival_bound = vec![1];
        assert!(validate_network(&raw).is_err());
    }

    #[test]
    fn control_set_of_fig1() {
        let net = validate_network(&fig1_raw()).unwrap();
        let set = enumerate_control_set(&net).unwrap();
        let strs: Vec<String> = set.iter().map(|v| v.to_string()).collect();
        assert_eq!(strs, ["00", "01", "10", "11"]);
    }

    #[test]
    fn forbidden_links_leave_only_idle() {
        let mut raw = fig1_raw();
        raw.constituency = vec![vec![1, 0], vec![0, 1]];
        raw.bound = vec![0, 0];
        let net = validate_network(&raw).unwrap();
        let set = enumerate_control_set(&net).unwrap();
        assert_eq!(set, vec![ControlVector::idle(2)]);
    }

    #[test]
    fn disjunct_links() {
        let raw = RawNetwork {
            routing: vec![vec![-1, 0, -1], vec![0, 1, -1]],
            constituency: vec![vec![1, 1, 1]],
            bound: vec![1],
            weights: vec![vec![0.25, 1.0, 1.0]],
            source_requirement: Some(vec![vec![1, 1, 1], vec![0, 0, 1]]),
            arrival_bound: vec![1, 1],
        };
        let net = validate_network(&raw).unwrap();
        assert!(!net.is_conventional());
        let set: Vec<String> = enumerate_control_set(&net).unwrap().iter().map(|v| v.to_string()).collect();
        assert_eq!(set, ["000", "001", "010", "100"]);
        assert!(net.requires_source(0, 1));
        assert!(net.is_copy_link(1));
        assert!(net.is_sink_link(0) && net.is_sink_link(2));
    }

    #[test]
    fn enumeration_guard() {
        let n = MAX_ENUMERATED_LINKS + 1;
        let raw = RawNetwork {
            routing: vec![vec![-1; n]],
            constituency: vec![],
            bound: vec![],
            weights: vec![vec![1.0; n]],
            source_requirement: None,
            arrival_bound: vec![0],
        };
        let net = validate_network(&raw).unwrap();
        assert!(matches!(enumerate_control_set(&net), Err(ModelError::TooManyLinks { .. })));
    }

    #[test]
    fn negative_part_examples() {
        assert_eq!(negative_part(&[vec![-1, 1]]), vec![vec![-1, 0]]);
        assert_eq!(negative_part(&[vec![0, 0], vec![0, 0]]), vec![vec![0, 0], vec![0, 0]]);
        // Example 2 topology, sink row dropped.
        let r = vec![vec![-1, 0, -1], vec![0, 1, -1]];
        assert_eq!(negative_part(&r), vec![vec![-1, 0, -1], vec![0, 0, -1]]);
    }

    #[test]
    fn bernoulli_support_sums_to_one() {
        let arr = ArrivalProcess::BernoulliBatch { batch: vec![2, 1], rate: vec![Rational::new(3, 5), Rational::new(1, 4)] };
        let support = arr.support(0);
        assert_eq!(support.len(), 4);
        let total: Rational = support.iter().map(|(_, p)| *p).sum();
        assert_eq!(total, Rational::from_integer(1));
        let mean0: Rational = support.iter().map(|(a, p)| Rational::from_integer(a[0] as i64) * p).sum();
        assert_eq!(mean0, Rational::new(3, 5));
    }

    #[test]
    fn arrival_validation() {
        let net = validate_network(&fig1_raw()).unwrap();
        let ok = ArrivalProcess::Periodic { period: 2, phase: 0, amount: vec![1, 0] };
        ok.validate(&net).unwrap();
        assert_eq!(ok.mean(), vec![Rational::new(1, 2), Rational::zero()]);
        let too_big = ArrivalProcess::Constant { amount: vec![2, 0] };
        assert!(too_big.validate(&net).is_err());
        let bad_rate = ArrivalProcess::BernoulliBatch { batch: vec![1, 0], rate: vec![Rational::new(3, 2), Rational::zero()] };
        assert!(bad_rate.validate(&net).is_err());
    }

    #[test]
    fn arrival_json_rates_are_exact() {
        let arr: ArrivalProcess = serde_json::from_str(r#"{"kind":"bernoulli_batch","batch":[1,2],"rate":["9/20",1]}"#).unwrap();
        assert_eq!(arr.mean(), vec![Rational::new(9, 20), Rational::from_integer(1)]);
        let back = serde_json::to_string(&arr).unwrap();
        assert!(back.contains("\"9/20\""));
    }
}

#[cfg(test)]
pub(crate) use tests::fig1_raw;

#[cfg(test)]
mod props {
    use proptest::prelude::*;

    use super::*;

    fn raw_strategy() -> impl Strategy<Value = RawNetwork> {
        (1usize..4, 1usize..6).prop_flat_map(|(n_q, n_v)| {
            (
                proptest::collection::vec(proptest::collection::vec(-1i64..=1, n_v), n_q),
                proptest::collection::vec(proptest::collection::vec(0u64..3, n_v), 0..3),
                proptest::collection::vec(0.0f64..=1.0, n_v),
            )
                .prop_map(move |(routing, constituency, w)| RawNetwork {
                    bound: constituency.iter().map(|row| row.iter().sum::<u64>() / 2).collect(),
                    routing,
                    constituency,
                    weights: vec![w],
                    source_requirement: None,
                    arrival_bound: vec![1; n_q],
                })
        })
    }

    proptest! {
        #[test]
        fn control_set_is_exactly_the_feasible_binaries(raw in raw_strategy()) {
            let net = validate_network(&raw).unwrap();
            let set = enumerate_control_set(&net).unwrap();
            let n_v = net.n_links();
            let all: Vec<ControlVector> = (0u64..1 << n_v)
                .map(|code| ControlVector((0..n_v).map(|j| code >> j & 1 == 1).collect()))
                .collect();
            for v in all {
                let load_ok = raw.constituency.iter().zip(&raw.bound).all(|(row, &c)| {
                    row.iter().zip(&v.0).map(|(&a, &x)| if x { a } else { 0 }).sum::<u64>() <= c
                });
                prop_assert_eq!(set.contains(&v), load_ok);
            }
            prop_assert!(set.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn negative_part_is_idempotent(raw in raw_strategy()) {
            let once = negative_part(&raw.routing);
            prop_assert_eq!(negative_part(&once), once.clone());
        }

        #[test]
        fn validation_is_stable(raw in raw_strategy()) {
            let net = validate_network(&raw).unwrap();
            prop_assert_eq!(validate_network(net.raw()).unwrap(), net);
        }
    }
}
