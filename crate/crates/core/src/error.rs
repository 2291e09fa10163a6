use thiserror::Error;

/// Rejected instance construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("instance needs at least one voter and one project (got n={voters}, m={projects})")]
    Empty { voters: usize, projects: usize },
    #[error("project {project} has non-positive or non-finite size {size}")]
    BadSize { project: usize, size: f64 },
    #[error("capacity must be positive and finite, got {0}")]
    BadCapacity(f64),
    #[error("voter {voter} approves project {project}, but only {projects} projects exist")]
    ApprovalOutOfRange {
        voter: usize,
        project: usize,
        projects: usize,
    },
    #[error("voter index {voter} out of range (n={voters})")]
    VoterOutOfRange { voter: usize, voters: usize },
    #[error("vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input vector contains a non-finite entry at coordinate {0}")]
    NonFinite(usize),
}

/// The requested (ε, δ, α, K) combination leaves no per-iteration budget.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrivacyBudgetError {
    #[error("epsilon must be positive and finite, got {0}")]
    Epsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
    #[error("alpha must exceed 1, got {0}")]
    Alpha(f64),
    #[error("iteration count K must be at least 1")]
    Iterations,
    #[error("voter count n must be at least 1")]
    Voters,
    #[error(
        "epsilon {epsilon} must exceed log(1/delta)/(alpha - 1) = {conversion_cost} \
         (delta={delta}, alpha={alpha}); per-iteration budget would be {eps_prime}"
    )]
    Exhausted {
        epsilon: f64,
        delta: f64,
        alpha: f64,
        conversion_cost: f64,
        eps_prime: f64,
    },
}

/// An agent subproblem hit its iteration cap without passing the first-order certificate.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("subproblem for voter {voter} stopped after {iterations} iterations with residual {residual:e} > xi {xi:e}")]
pub struct SubsolverError {
    pub voter: usize,
    pub iterations: usize,
    pub residual: f64,
    pub xi: f64,
    /// Best iterate found; feasible.
    pub best: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("every voter has zero attainable utility")]
    NoEligibleVoters,
    #[error("voter {0} has zero utility and zero slack, core ratio is undefined")]
    ZeroDenominator(usize),
    #[error("allocation lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Malformed election file. `line` is 1-based; 0 when the problem is not tied to a line.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("missing section {0}")]
    MissingSection(&'static str),
    #[error("section {0} appears twice")]
    DuplicateSection(&'static str),
    #[error("missing header row in section {0}")]
    MissingHeader(&'static str),
    #[error("header of {section} must start with `{expected}`")]
    BadHeader {
        section: &'static str,
        expected: &'static str,
    },
    #[error("missing budget in META")]
    MissingBudget,
    #[error("budget `{0}` is not a positive number")]
    BadBudget(String),
    #[error("cost `{0}` is not a positive number")]
    BadCost(String),
    #[error("duplicate project id `{0}`")]
    DuplicateProject(String),
    #[error("duplicate voter id `{0}`")]
    DuplicateVoter(String),
    #[error("row has {got} fields, header declares {expected}")]
    FieldCount { expected: usize, got: usize },
    #[error("column `{0}` missing from header")]
    MissingColumn(&'static str),
    #[error("unsupported vote_type `{0}`; only approval ballots are accepted")]
    UnsupportedVoteType(String),
    #[error("data row outside of any section")]
    Orphan,
    #[error("malformed row: {0}")]
    Row(String),
}

/// Top-level error for solver runs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Privacy(#[from] PrivacyBudgetError),
    #[error(transparent)]
    Subsolver(#[from] SubsolverError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid parameter: {0}")]
    Param(String),
}
