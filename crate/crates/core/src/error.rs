use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the library.
///
/// Every variant maps to a stable, module-qualified code (see [`Error::code`])
/// that the experiment runner writes into its failure records.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("parallel edge {from} -> {to}")]
    ParallelEdge { from: String, to: String },
    #[error("stubborn agent `{0}` has an outgoing edge")]
    StubbornSource(String),
    #[error("edge {from} -> {to} has invalid rate {rate} (must be finite and > 0)")]
    InvalidRate { from: String, to: String, rate: f64 },
    #[error("edge {from} -> {to} has invalid trust {trust} (must lie in (0, 1])")]
    InvalidTrust {
        from: String,
        to: String,
        trust: f64,
    },
    #[error("stubborn agent `{node}` has non-finite belief {belief}")]
    InvalidBelief { node: String, belief: f64 },
    #[error("network has no regular agents")]
    NoRegularAgents,
    #[error("network has no stubborn agents")]
    NoStubbornAgents,
    #[error("graph is not connected")]
    Disconnected,
    #[error("regular agent `{0}` is not influenced by any stubborn agent")]
    Uninfluenced(String),
    #[error("regular agent `{0}` has no outgoing edge")]
    NoOutEdges(String),
    #[error("jump matrix is not reversible on regular agents: {0}")]
    Irreversible(String),
    #[error("jump matrix restricted to regular agents is reducible")]
    Reducible,
    #[error("stubborn agent `{0}` receives no edge from a regular agent; the reversible extension is undefined")]
    IsolatedStubborn(String),
    #[error("invalid network specification: {0}")]
    InvalidSpec(String),

    #[error("invalid graph recipe: {0}")]
    InvalidRecipe(String),
    #[error("graph not connected after {attempts} attempts")]
    ConnectivityNotAchieved { attempts: usize },
    #[error("invalid stubborn placement: {0}")]
    InvalidPlacement(String),

    #[error("initial belief of stubborn agent `{node}` is {got}, expected {expected}")]
    StubbornMismatch {
        node: String,
        got: f64,
        expected: f64,
    },
    #[error("initial state has {got} entries, network has {expected} agents")]
    StateLength { got: usize, expected: usize },
    #[error("total meeting rate is zero")]
    ZeroRate,
    #[error("invalid horizon {0}")]
    InvalidHorizon(f64),
    #[error("tail bound {bound:e} still above tolerance after {events} events")]
    TailBoundNotReached { bound: f64, events: u64 },
    #[error("operation requires unit trust on every edge; edge {from} -> {to} has trust {trust}")]
    TrustNotUnit {
        from: String,
        to: String,
        trust: f64,
    },

    #[error(
        "iterative solver did not converge after {sweeps} sweeps (relative residual {residual:e})"
    )]
    NotConverged { sweeps: usize, residual: f64 },
    #[error("singular linear system")]
    Singular,
    #[error(
        "pair system needs {unknowns} unknowns, limit is {limit}; pass an explicit smaller support"
    )]
    SupportTooLarge { unknowns: usize, limit: usize },
    #[error("node `{0}` is not a pair-support member")]
    NotInSupport(String),
    #[error("oracle precondition failed: {0}")]
    OraclePrecondition(String),
    #[error("ODE step size underflow at t = {0}")]
    StepUnderflow(f64),

    #[error("{states} states exceed the cap of {cap} for exact mixing time; use the relaxation-time proxy")]
    StateCapExceeded { states: usize, cap: usize },
    #[error("eigen-solver failure: {0}")]
    Eigen(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, qualified by the module that raised it.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            UnknownNode(_) => "network.unknown_node",
            DuplicateNode(_) => "network.duplicate_node",
            SelfLoop(_) => "network.self_loop",
            ParallelEdge { .. } => "network.parallel_edge",
            StubbornSource(_) => "network.stubborn_source",
            InvalidRate { .. } => "network.invalid_rate",
            InvalidTrust { .. } => "network.invalid_trust",
            InvalidBelief { .. } => "network.invalid_belief",
            NoRegularAgents => "network.no_regular_agents",
            NoStubbornAgents => "network.no_stubborn_agents",
            Disconnected => "network.disconnected",
            Uninfluenced(_) => "network.uninfluenced_agent",
            NoOutEdges(_) => "network.no_out_edges",
            Irreversible(_) => "network.irreversible",
            Reducible => "network.reducible",
            IsolatedStubborn(_) => "network.isolated_stubborn",
            InvalidSpec(_) => "network.invalid_spec",
            InvalidRecipe(_) => "generators.invalid_recipe",
            ConnectivityNotAchieved { .. } => "generators.connectivity",
            InvalidPlacement(_) => "generators.invalid_placement",
            StubbornMismatch { .. } => "simulate.stubborn_mismatch",
            StateLength { .. } => "simulate.state_length",
            ZeroRate => "simulate.zero_rate",
            InvalidHorizon(_) => "simulate.invalid_horizon",
            TailBoundNotReached { .. } => "simulate.tail_bound",
            TrustNotUnit { .. } => "simulate.trust_not_unit",
            NotConverged { .. } => "moments.not_converged",
            Singular => "moments.singular",
            SupportTooLarge { .. } => "moments.support_too_large",
            NotInSupport(_) => "moments.not_in_support",
            OraclePrecondition(_) => "moments.oracle_precondition",
            StepUnderflow(_) => "moments.step_underflow",
            StateCapExceeded { .. } => "fluidity.state_cap",
            Eigen(_) => "fluidity.eigen",
            InvalidArgument(_) => "core.invalid_argument",
            Io(_) => "io.error",
            Json(_) => "io.json",
        }
    }
}
