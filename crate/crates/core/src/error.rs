use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected: node {0} is unreachable from node 0")]
    DisconnectedGraph(usize),
    #[error("edge ({a}, {b}) has non-positive weight {weight}")]
    NonPositiveWeight { a: usize, b: usize, weight: f64 },
    #[error("duplicate edge ({a}, {b})")]
    DuplicateEdge { a: usize, b: usize },
    #[error("self loop at node {0}")]
    SelfLoop(usize),
    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("graph needs at least one node")]
    EmptyGraph,
    #[error("invalid lattice range: {0}")]
    InvalidRange(String),
    #[error("torus dimension {0} is below 3 and would create multi-edges")]
    TorusTooSmall(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("density is not in the interior of the simplex: rho[{node}] = {value}")]
    NonInteriorDensity { node: usize, value: f64 },
    #[error("density does not sum to one (sum = {0})")]
    NotNormalized(f64),
    #[error("input must be mean-zero, got sum {0}")]
    NonZeroMean(f64),
    #[error("weighted Laplacian is near singular (second eigenvalue {0:e})")]
    NearSingular(f64),
    #[error("interaction matrix is not symmetric")]
    AsymmetricInteraction,
    #[error("Planck constant must be positive, got {0}")]
    NonPositivePlanck(f64),
    #[error("wave function has zero modulus at node {0}")]
    ZeroModulus(usize),
    #[error("path needs at least two samples, got {0}")]
    PathTooShort(usize),
    #[error("path sample times must be strictly increasing")]
    NonIncreasingTimes,
    #[error("Newton iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence { residual: f64, iterations: usize },
    #[error("step left the simplex interior at t = {0}")]
    StepLeftSimplex(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("wave number {0:?} is not commensurate with the torus")]
    IncommensurateWaveNumber(Vec<f64>),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
