use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("path {path} diverged at step {step} (non-finite state)")]
    DivergedPath { path: usize, step: usize },

    #[error("problem does not supply `{0}` and finite-difference fallback is disabled")]
    MissingDerivative(&'static str),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("flow condition estimate {estimate:.3e} exceeds {limit:.0e} at node {node}; use dense flow mode")]
    IllConditionedFlow { node: usize, estimate: f64, limit: f64 },

    #[error("gradient entry at node {node}, coordinate {coord} is not finite")]
    PoisonedGradient { node: usize, coord: usize },

    #[error("{diverged} of {batch} paths diverged in iteration {iteration}; reduce the rate or the time step")]
    UnstableProblem { iteration: usize, diverged: usize, batch: usize },
}
