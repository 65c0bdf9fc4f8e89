use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("dimension mismatch at {field}: expected {expected}, found {found}")]
    Dimension { field: String, expected: usize, found: usize },
    #[error("entry out of domain at {field}: {value} not in {domain}")]
    OutOfDomain { field: String, value: String, domain: &'static str },
    #[error("probability out of range at {field}: {value} not in [0, 1]")]
    ProbabilityOutOfRange { field: String, value: f64 },
    #[error("{n_links} links is too many to enumerate (limit {limit})")]
    TooManyLinks { n_links: usize, limit: usize },
    #[error("invalid arrivals: {0}")]
    InvalidArrivals(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("transition matrix must be square and non-empty, row {row} has {found} entries for {expected} states")]
    Shape { row: usize, expected: usize, found: usize },
    #[error("transition matrix row {row} is not a distribution (entry out of [0,1] or sum {sum})")]
    NotStochastic { row: usize, sum: f64 },
    #[error("initial distribution is invalid: {0}")]
    InitialDistribution(String),
    #[error("initial state {state} out of range for {n_states} states")]
    InitialState { state: usize, n_states: usize },
    #[error("chain may be periodic or reducible: {0}")]
    NoConvergence(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{n} variables is too many for exhaustive search (limit {limit})")]
    TooLarge { n: usize, limit: usize },
    #[error("numerical stall in simplex after {pivots} pivots (largest |pivot| {pivot:e})")]
    Stall { pivots: usize, pivot: f64 },
    #[error("row {row} has {found} coefficients for {expected} variables")]
    Shape { row: usize, expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("node budget of {budget} exhausted on a problem with {n} variables")]
    BudgetExhausted { budget: u64, n: usize },
    #[error("prediction problem is infeasible")]
    Infeasible,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("horizon must be at least 1")]
    Horizon,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("infeasible control {control} at slot {t}: {violation}")]
    InfeasibleControl { t: u64, control: String, violation: String },
    #[error("policy failed at slot {t}: {source}")]
    Policy {
        t: u64,
        #[source]
        source: PolicyError,
    },
    #[error("control has {found} entries, network has {expected} links")]
    ControlLength { expected: usize, found: usize },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}' (try `qnet list-scenarios`)")]
    Unknown(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("network: {0}")]
    Network(#[from] ModelError),
    #[error("chain: {0}")]
    Chain(#[from] ChainError),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("prediction has {n} binary coordinates, the exact oracle allows at most {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("outcome tree reached {states} distinct states (limit {limit})")]
    Support { states: usize, limit: usize },
    #[error("trajectory has {found} blocks, horizon is {expected}")]
    Horizon { expected: usize, found: usize },
}
