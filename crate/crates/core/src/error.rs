use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error("invalid state: {0}")]
    State(&'static str),
    #[error("invalid input: {0}")]
    Input(&'static str),
    #[error("integrity violation: {0}")]
    Integrity(&'static str),
    #[error("protocol error: {0}")]
    Protocol(&'static str),
    #[error("modularity is undefined on a graph without edges")]
    UndefinedScore,
    #[error("policy stalled for {steps} steps without revealing new cells")]
    Livelock { steps: usize },
}
