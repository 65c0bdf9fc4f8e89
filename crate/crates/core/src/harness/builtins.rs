//! Built-in scenarios.

use crate::markov::RawChain;
use crate::model::{ArrivalProcess, RawNetwork};
use crate::policies::PolicySpec;
use crate::Rational;

use super::{Outputs, Scenario};

const SECTORS: usize = 3;
const SLOTS_PER_SECTOR: usize = 3;

/// Moving receiver served by three access points in turn.
///
/// Queue 1 is the source, queues 2..4 the access points. Links 1..3 are the
/// wired hops to access points 1..3, links 4..6 the wireless hops to the
/// receiver. Access point `i` is reachable during slots `3(i-1)..3i`; chain
/// state `k < 9` is slot `k` and state 9 is an absorbing terminal state in
/// which no wireless link works. One wired and one wireless link may be
/// active per slot. One packet arrives at the source on every even slot.
pub fn scenario_example1() -> Scenario {
    let n_q = 1 + SECTORS;
    let n_v = 2 * SECTORS;
    let mut routing = vec![vec![0i64; n_v]; n_q];
    for i in 0..SECTORS {
        routing[0][i] = -1;
        routing[1 + i][i] = 1;
        routing[1 + i][SECTORS + i] = -1;
    }
    let n_s = SECTORS * SLOTS_PER_SECTOR + 1;
    let weights = (0..n_s)
        .map(|s| {
            let mut w = vec![1.0; SECTORS];
            w.extend((0..SECTORS).map(|i| if s < n_s - 1 && s / SLOTS_PER_SECTOR == i { 1.0 } else { 0.0 }));
            w
        })
        .collect();
    let transition = (0..n_s)
        .map(|s| {
            let mut row = vec![0.0; n_s];
            row[(s + 1).min(n_s - 1)] = 1.0;
            row
        })
        .collect();
    let mut wired = vec![0u64; n_v];
    let mut wireless = vec![0u64; n_v];
    for i in 0..SECTORS {
        wired[i] = 1;
        wireless[SECTORS + i] = 1;
    }
    Scenario {
        name: "example1".into(),
        notes: "Receiver passes three access points, three slots each; arrivals on slots 0, 2, 4, 6, 8 (5 packets in 9 slots)."
            .into(),
        network: RawNetwork {
            routing,
            constituency: vec![wired, wireless],
            bound: vec![1, 1],
            weights,
            source_requirement: None,
            arrival_bound: vec![1, 0, 0, 0],
        },
        chain: RawChain { transition, s0: Some(0), sigma0: None },
        arrivals: ArrivalProcess::Periodic { period: 2, phase: 0, amount: vec![1, 0, 0, 0] },
        policies: vec![PolicySpec::Mw, PolicySpec::pnc(2), PolicySpec::pnc(3), PolicySpec::pnc(4), PolicySpec::pnc(5)],
        slots: (SECTORS * SLOTS_PER_SECTOR) as u64,
        replications: 1,
        seed: 1,
        rate_scale: 1,
        initial_queues: None,
        outputs: Outputs::default(),
    }
}

/// Named test points for the share/sync network, in units of 1/4 packet per
/// slot: inside the max-weight region, inside the region the H = 3 fixed
/// trajectory reaches, and inside only the full region.
pub const EXAMPLE2_POINTS: [(&str, (i64, i64), i64); 3] = [("red", (2, 1), 4), ("blue", (29, 0), 20), ("green", (195, 0), 100)];

/// Share/sync network: link 1 drains queue 1 with success probability 1/4,
/// link 2 copies the head of queue 1 into queue 2 without removing it, link 3
/// drains both queues together. Only one link per slot.
pub fn scenario_example2() -> Scenario {
    example2_point("blue").expect("known point")
}

/// Example 2 with the arrival rate of a named test point.
pub fn example2_point(point: &str) -> Option<Scenario> {
    let &(name, (n1, n2), d) = EXAMPLE2_POINTS.iter().find(|(n, _, _)| *n == point)?;
    // Points are in scaled units; simulated rates are a quarter of that.
    let rate = vec![Rational::new(n1, 4 * d), Rational::new(n2, 4 * d)];
    Some(Scenario {
        name: format!("example2-{name}"),
        notes: "Rates in region files are scaled by 4, matching the option coordinates.".into(),
        network: RawNetwork {
            routing: vec![vec![-1, 0, -1], vec![0, 1, -1]],
            constituency: vec![vec![1, 1, 1]],
            bound: vec![1],
            weights: vec![vec![0.25, 1.0, 1.0]],
            source_requirement: Some(vec![vec![1, 1, 1], vec![0, 0, 1]]),
            arrival_bound: vec![1, 1],
        },
        chain: RawChain { transition: vec![vec![1.0]], s0: Some(0), sigma0: None },
        arrivals: ArrivalProcess::BernoulliBatch { batch: vec![1, 1], rate },
        policies: vec![PolicySpec::Mw, PolicySpec::pnc(2), PolicySpec::fpnc(2), PolicySpec::fpnc(3)],
        slots: 20_000,
        replications: 5,
        seed: 7,
        rate_scale: 4,
        initial_queues: None,
        outputs: Outputs::default(),
    })
}

pub fn builtin_names() -> Vec<&'static str> {
    vec!["example1", "example2", "example2-red", "example2-blue", "example2-green"]
}

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "example1" => Some(scenario_example1()),
        "example2" => {
            let mut s = scenario_example2();
            s.name = "example2".into();
            Some(s)
        }
        other => other.strip_prefix("example2-").and_then(example2_point),
    }
}
