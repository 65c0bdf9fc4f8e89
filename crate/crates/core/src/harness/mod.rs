//! Scenario files, built-in scenarios and experiment orchestration.

mod builtins;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use builtins::{builtin, builtin_names, example2_point, scenario_example1, scenario_example2, EXAMPLE2_POINTS};

use crate::dynamics::{derive_seed, run, RunConfig, Trace};
use crate::error::ScenarioError;
use crate::markov::{MarkovChain, RawChain};
use crate::model::{validate_network, ArrivalProcess, Network, RawNetwork};
use crate::policies::PolicySpec;
use crate::stability::{
    assess_stability, quadrant_directions, region_slice, without_copy_links, BoundaryPoint, RegionQuery, StabilityConfig,
    StabilityVerdict,
};
use crate::Rational;

/// Which control set a region computation uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicySet {
    Full,
    Mw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionRequest {
    pub policy_set: PolicySet,
    /// Rays through the first quadrant of the first two queues.
    #[serde(default = "default_directions")]
    pub directions: usize,
}

fn default_directions() -> usize {
    17
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub traces: bool,
    #[serde(default = "yes")]
    pub summary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionRequest>,
}

fn yes() -> bool {
    true
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { traces: true, summary: true, region: None }
    }
}

fn one() -> i64 {
    1
}

/// A scenario file. See `docs/scenario-schema.md` for the field reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    pub network: RawNetwork,
    pub chain: RawChain,
    pub arrivals: ArrivalProcess,
    pub policies: Vec<PolicySpec>,
    pub slots: u64,
    pub replications: u32,
    pub seed: u64,
    /// Region coordinates are arrival rates times this factor.
    #[serde(default = "one")]
    pub rate_scale: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_queues: Option<Vec<u64>>,
    #[serde(default)]
    pub outputs: Outputs,
}

/// A scenario whose references have been checked.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub scenario: Scenario,
    pub network: Network,
    pub chain: MarkovChain,
    pub initial_queues: Vec<u64>,
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.into() }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn prepare(&self) -> Result<Prepared, ScenarioError> {
        let network = validate_network(&self.network)?;
        let chain = MarkovChain::from_raw(&self.chain)?;
        if chain.n_states() != network.n_states() {
            return Err(invalid(
                "chain.P",
                format!("{} states, but network.weights has {}", chain.n_states(), network.n_states()),
            ));
        }
        self.arrivals.validate(&network).map_err(|e| invalid("arrivals", e.to_string()))?;
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(invalid("policies", "must list at least one policy"));
        }
        for (k, p) in self.policies.iter().enumerate() {
            if p.horizon() == Some(0) {
                return Err(invalid(&format!("policies[{k}].H"), "horizon must be at least 1"));
            }
        }
        if self.rate_scale < 1 {
            return Err(invalid("rate_scale", "must be a positive integer"));
        }
        let initial_queues = match &self.initial_queues {
            Some(q) if q.len() != network.n_queues() => {
                return Err(invalid("initial_queues", format!("expected {} entries, found {}", network.n_queues(), q.len())))
            }
            Some(q) => q.clone(),
            None => vec![0; network.n_queues()],
        };
        for w in network.warnings() {
            log::warn!("{}: {w}", self.name);
        }
        Ok(Prepared { scenario: self.clone(), network, chain, initial_queues })
    }
}

/// Loads a built-in scenario by name, or a JSON file by path.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario, ScenarioError> {
    if let Some(s) = builtin(name_or_path) {
        return Ok(s);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(ScenarioError::Unknown(name_or_path.into()));
    }
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: name_or_path.into(), source })?;
    Scenario::from_json(&text)
}

/// One (policy, replication) run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub policy: String,
    pub replication: u32,
    pub seed: u64,
    /// The verdict is `None` when the trace is too short to assess.
    pub result: Result<(Trace, Option<StabilityVerdict>), String>,
}

#[derive(Clone, Debug)]
pub struct Bundle {
    pub scenario: String,
    pub runs: Vec<RunOutcome>,
    pub region: Option<Vec<BoundaryPoint>>,
}

/// Seed of replication `k`; shared by every policy so runs are paired.
pub fn replication_seed(seed: u64, k: u32) -> u64 {
    derive_seed(seed, &format!("replication-{k}"))
}

impl Prepared {
    fn arrival_rate_total(&self) -> f64 {
        self.scenario.arrivals.mean_f64().iter().sum()
    }

    /// Region query at the scenario's own arrival rate, in scaled units.
    pub fn region_query(&self, set: PolicySet) -> Result<RegionQuery<'_>, ScenarioError> {
        let pi = self.chain.stationary()?;
        let scale = Rational::from_integer(self.scenario.rate_scale);
        let controls = match set {
            PolicySet::Full => None,
            PolicySet::Mw => Some(without_copy_links(&self.network)?),
        };
        Ok(RegionQuery {
            network: &self.network,
            pi,
            abar: self.scenario.arrivals.mean().iter().map(|a| a * scale).collect(),
            controls,
            option_scale: self.scenario.rate_scale,
        })
    }

    pub fn region(&self, set: PolicySet, directions: usize) -> Result<Vec<BoundaryPoint>, ScenarioError> {
        if self.network.n_queues() < 2 {
            return Err(invalid("outputs.region", "needs at least two queues"));
        }
        let q = self.region_query(set)?;
        Ok(region_slice(&q, (0, 1), &quadrant_directions(directions), 1e-6)?)
    }

    pub fn run_one(&self, spec: &PolicySpec, replication: u32) -> RunOutcome {
        let seed = replication_seed(self.scenario.seed, replication);
        let result = (|| {
            let mut policy = spec.build(seed).map_err(|e| e.to_string())?;
            let cfg = RunConfig {
                scenario: &self.scenario.name,
                network: &self.network,
                chain: &self.chain,
                arrivals: &self.scenario.arrivals,
                initial_queues: &self.initial_queues,
                slots: self.scenario.slots,
                seed,
            };
            let trace = run(&cfg, policy.as_mut()).map_err(|e| e.to_string())?;
            let verdict = match assess_stability(&trace, self.arrival_rate_total(), &StabilityConfig::default()) {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("{} {}: {e}; skipping the stability verdict", self.scenario.name, spec.label());
                    None
                }
            };
            Ok((trace, verdict))
        })();
        if let Err(e) = &result {
            log::error!("{} {} replication {replication}: {e}", self.scenario.name, spec.label());
        }
        RunOutcome { policy: spec.label(), replication, seed, result }
    }

    /// Every (policy, replication) pair, in parallel, in a fixed output order.
    pub fn run_all(&self) -> Vec<RunOutcome> {
        let jobs: Vec<(&PolicySpec, u32)> =
            self.scenario.policies.iter().flat_map(|p| (0..self.scenario.replications).map(move |k| (p, k))).collect();
        jobs.par_iter().map(|(p, k)| self.run_one(p, *k)).collect()
    }
}

pub fn run_experiment(scenario: &Scenario) -> Result<Bundle, ScenarioError> {
    let prepared = scenario.prepare()?;
    let runs = prepared.run_all();
    let region = match &scenario.outputs.region {
        Some(req) => Some(prepared.region(req.policy_set, req.directions)?),
        None => None,
    };
    Ok(Bundle { scenario: scenario.name.clone(), runs, region })
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect::<String>().trim_matches('_').to_string()
}

impl Bundle {
    /// `policy,replication,seed,slots,arrivals,delivered,delivered_fraction,mean_total_queue,verdict,slope,solver_calls,error`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "policy,replication,seed,slots,arrivals,delivered,delivered_fraction,mean_total_queue,verdict,slope,solver_calls,error\n",
        );
        for r in &self.runs {
            match &r.result {
                Ok((trace, verdict)) => {
                    let s = trace.summary();
                    let (class, slope) = match verdict {
                        Some(v) => (v.classification.as_str(), format!("{:.6}", v.slope)),
                        None => ("unassessed", String::new()),
                    };
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{:.6},{:.6},{},{},{},\n",
                        r.policy,
                        r.replication,
                        r.seed,
                        trace.records.len(),
                        s.arrivals,
                        s.delivered,
                        trace.delivered_fraction(),
                        s.mean_total_queue,
                        class,
                        slope,
                        trace.solver_calls
                    ));
                }
                Err(e) => {
                    out.push_str(&format!(
                        "{},{},{},,,,,,error,,,\"{}\"\n",
                        r.policy,
                        r.replication,
                        r.seed,
                        e.replace('"', "'")
                    ));
                }
            }
        }
        out
    }

    pub fn trace_file_name(&self, run: &RunOutcome) -> String {
        format!("{}_{}_r{}.csv", file_stem(&self.scenario), file_stem(&run.policy), run.replication)
    }

    /// Writes the requested files under `dir` and returns their paths.
    pub fn write(&self, dir: &Path, outputs: &Outputs) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if outputs.traces {
            for r in &self.runs {
                if let Ok((trace, _)) = &r.result {
                    let path = dir.join(self.trace_file_name(r));
                    let mut buf = Vec::new();
                    trace.write_csv(&mut buf)?;
                    fs::write(&path, buf)?;
                    written.push(path);
                }
            }
        }
        if outputs.summary {
            let path = dir.join(format!("{}_summary.csv", file_stem(&self.scenario)));
            fs::write(&path, self.summary_csv())?;
            written.push(path);
        }
        if let Some(points) = &self.region {
            let path = dir.join(format!("{}_region.csv", file_stem(&self.scenario)));
            let mut buf = Vec::new();
            crate::stability::write_region_csv(points, &mut buf)?;
            fs::write(&path, buf)?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&RunOutcome, &str)> {
        self.runs.iter().filter_map(|r| r.result.as_ref().err().map(|e| (r, e.as_str())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip_through_json() {
        for name in builtin_names() {
            let s = builtin(name).unwrap();
            let back = Scenario::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s, "{name}");
            s.prepare().unwrap();
        }
    }

    #[test]
    fn validation_names_the_field() {
        let mut s = scenario_example2();
        s.replications = 0;
        assert!(s.prepare().unwrap_err().to_string().starts_with("replications:"));
        let mut s = scenario_example2();
        s.initial_queues = Some(vec![1]);
        assert!(s.prepare().unwrap_err().to_string().starts_with("initial_queues:"));
        let mut s = scenario_example2();
        s.network.weights[0][1] = 2.0;
        let msg = s.prepare().unwrap_err().to_string();
        assert!(msg.starts_with("network:") && msg.contains("weights[0][1]"), "{msg}");
    }

    #[test]
    fn unknown_scenario() {
        assert!(matches!(load_scenario("no-such-scenario"), Err(ScenarioError::Unknown(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&scenario_example2().to_json()).unwrap();
        v["slotz"] = 3.into();
        assert!(Scenario::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn summary_matches_traces() {
        let mut s = scenario_example2();
        s.slots = 400;
        s.replications = 2;
        let bundle = run_experiment(&s).unwrap();
        assert_eq!(bundle.runs.len(), s.policies.len() * 2);
        let csv = bundle.summary_csv();
        for (line, r) in csv.lines().skip(1).zip(&bundle.runs) {
            let (trace, _) = r.result.as_ref().unwrap();
            let cols: Vec<&str> = line.split(',').collect();
            let arrivals: u64 = trace.records.iter().map(|x| x.a.iter().sum::<u64>()).sum();
            let delivered: u64 = trace.records.iter().map(|x| x.delivered).sum();
            assert_eq!(cols[4], arrivals.to_string());
            assert_eq!(cols[5], delivered.to_string());
            assert_eq!(cols[6], format!("{:.6}", delivered as f64 / arrivals as f64));
        }
    }

    #[test]
    fn paired_streams_across_policies() {
        let mut s = scenario_example2();
        s.slots = 300;
        let bundle = run_experiment(&s).unwrap();
        let first: Vec<&Trace> =
            bundle.runs.iter().filter(|r| r.replication == 0).map(|r| &r.result.as_ref().unwrap().0).collect();
        for t in &first[1..] {
            for (a, b) in t.records.iter().zip(&first[0].records) {
                assert_eq!((&a.a, a.s), (&b.a, b.s));
            }
        }
    }
}
