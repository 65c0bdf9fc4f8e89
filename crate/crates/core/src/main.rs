use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qnet::harness::{builtin_names, load_scenario, PolicySet, RegionRequest, Scenario};
use qnet::policies::PolicySpec;
use qnet::stability::region_membership;

#[derive(Parser)]
#[command(name = "qnet", version, about = "Predictive control of switched queueing networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    replications: Option<u32>,
    /// MW, PNC, FPNC, IDLE or RANDOM; replaces the scenario's policy list.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario (built-in name or JSON file).
    Run {
        scenario: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory (default: $QNET_OUT_DIR or ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Trace the stability region boundary of a scenario.
    Region {
        scenario: String,
        #[arg(long, value_enum, default_value = "full")]
        policy_set: SetArg,
        #[arg(long, default_value_t = 17)]
        directions: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Check a scenario without running it.
    Validate { scenario: String },
    /// Print the built-in scenario names.
    ListScenarios,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetArg {
    Full,
    Mw,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("QNET_OUT_DIR").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

fn load(name: &str) -> Result<Scenario, Failure> {
    load_scenario(name).map_err(|e| Failure::Validation(e.to_string()))
}

fn apply(s: &mut Scenario, o: Overrides) -> Result<(), Failure> {
    if let Some(seed) = o.seed {
        s.seed = seed;
    }
    if let Some(n) = o.slots {
        s.slots = n;
    }
    if let Some(n) = o.replications {
        s.replications = n;
    }
    match (o.policy, o.horizon) {
        (Some(kind), h) => {
            let spec = PolicySpec::from_kind(&kind, h).map_err(Failure::Validation)?;
            if let Some(h) = h.filter(|&h| spec.horizon() != Some(h)) {
                return Err(Failure::Validation(format!("--horizon {h} conflicts with --policy {kind}")));
            }
            s.policies = vec![spec];
        }
        (None, Some(_)) => return Err(Failure::Validation("--horizon requires --policy".into())),
        (None, None) => {}
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::ListScenarios => {
            for name in builtin_names() {
                println!("{name}");
            }
        }
        Command::Validate { scenario } => {
            let s = load(&scenario)?;
            let p = s.prepare().map_err(|e| Failure::Validation(e.to_string()))?;
            println!(
                "{}: ok ({} queues, {} links, {} chain states, {} policies)",
                s.name,
                p.network.n_queues(),
                p.network.n_links(),
                p.chain.n_states(),
                s.policies.len()
            );
        }
        Command::Run { scenario, overrides, out, format: Format::Csv } => {
            let mut s = load(&scenario)?;
            apply(&mut s, overrides)?;
            let bundle = qnet::harness::run_experiment(&s).map_err(|e| Failure::Validation(e.to_string()))?;
            let files = bundle.write(&out_dir(out), &s.outputs).map_err(|e| Failure::Runtime(e.to_string()))?;
            for f in files {
                println!("{}", f.display());
            }
            let failure = bundle.failures().next().map(|(r, e)| format!("{} replication {}: {e}", r.policy, r.replication));
            if let Some(message) = failure {
                return Err(Failure::Runtime(message));
            }
        }
        Command::Region { scenario, policy_set, directions, out, format: Format::Csv } => {
            let mut s = load(&scenario)?;
            let set = match policy_set {
                SetArg::Full => PolicySet::Full,
                SetArg::Mw => PolicySet::Mw,
            };
            s.outputs = qnet::harness::Outputs {
                traces: false,
                summary: false,
                region: Some(RegionRequest { policy_set: set, directions }),
            };
            let p = s.prepare().map_err(|e| Failure::Validation(e.to_string()))?;
            let here = p.region_query(set).map_err(|e| Failure::Runtime(e.to_string()))?;
            let m = region_membership(&here).map_err(|e| Failure::Runtime(e.to_string()))?;
            eprintln!("scenario rate: {m:?}");
            let points = p.region(set, directions).map_err(|e| Failure::Runtime(e.to_string()))?;
            let bundle = qnet::harness::Bundle {
                scenario: format!("{}_{}", s.name, if matches!(set, PolicySet::Mw) { "mw" } else { "full" }),
                runs: vec![],
                region: Some(points),
            };
            let files = bundle.write(&out_dir(out), &s.outputs).map_err(|e| Failure::Runtime(e.to_string()))?;
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
