use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no feasible mean parameter satisfies the event constraint: {0}")]
    InfeasibleEvent(String),

    #[error("no sign change found while bracketing {what} on ({lo}, {hi}]")]
    Bracket { what: &'static str, lo: f64, hi: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("resampling weights degenerate at stage {stage} (log mean weight {log_mean})")]
    DegenerateWeights { stage: usize, log_mean: f64 },

    #[error("residual resampling produced an empty population at stage {stage}")]
    PopulationCollapse { stage: usize },

    #[error("subgroup {index}: {source}")]
    Subgroup {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures of the numerical machinery (solvers, weights), as
    /// opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. }
            | Error::Domain(_)
            | Error::InfeasibleEvent(_)
            | Error::Bracket { .. }
            | Error::DegenerateWeights { .. }
            | Error::PopulationCollapse { .. } => true,
            Error::Subgroup { source, .. } => source.is_numerical(),
            Error::Config(_) | Error::Io(_) => false,
        }
    }
}
