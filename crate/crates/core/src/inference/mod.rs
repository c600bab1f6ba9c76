//! Conditioning on partial rankings, observation probabilities, and the
//! dense brute-force oracle used to check them.

mod condition;
mod dense;

pub use condition::{
    condition_with_evidence, consistent_indices, log_partial_ranking_probability,
    partial_ranking_probability, pr_condition, Conditioned,
};
pub use dense::{
    brute_force_posterior, decompose_dense, densify, factorization_test, for_each_ranking,
    DenseDistribution, FactorizationReport, SubsetObservation, DENSE_MAX_ITEMS,
};

pub(crate) use condition::for_each_consistent;

/// Tolerance for agreement between the factored path and the dense oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Tolerance for factorization of objects that factor exactly.
pub const FACTORIZATION_TOLERANCE: f64 = 1e-12;
