use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violated a structural precondition (bad item set, malformed split, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Index outside the range of the combinatorial family it indexes.
    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: u64, size: u64 },

    /// A table or enumeration would exceed the configured size limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Conditioning on an observation that has zero probability under the prior.
    /// `node` is the first hierarchy node (preorder) whose conditioned table
    /// has no mass; `None` for the dense oracle.
    #[error("zero evidence: observation impossible under the prior (node {node:?}, items {items:?})")]
    ZeroEvidence { node: Option<usize>, items: Vec<usize> },

    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
