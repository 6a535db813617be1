use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] graph_nls::Error),
    #[error("integration failed: {0}")]
    Integrator(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("{0} propert(y/ies) failed verification")]
    VerifyFailed(usize),
}

impl CliError {
    /// 1 for configuration and IO problems, 2 for numerical failures, 3 for failed properties.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) => match e {
                graph_nls::Error::MaxIterations { .. }
                | graph_nls::Error::Eigen(_)
                | graph_nls::Error::NewtonDivergence { .. }
                | graph_nls::Error::StepLeftSimplex(_) => 2,
                _ => 1,
            },
            CliError::Integrator(_) | CliError::Solver(_) => 2,
            CliError::VerifyFailed(_) => 3,
        }
    }
}
