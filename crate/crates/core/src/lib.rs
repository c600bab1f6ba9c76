//! Hierarchical riffle-independent distributions over rankings.
//!
//! A ranking distribution factors along a binary [`Hierarchy`]: each split
//! node holds a distribution over how its two sides interleave and each
//! leaf holds a distribution over the relative ranking of its items. Such
//! models can be conditioned exactly on partial-ranking observations in
//! time linear in the number of parameters ([`pr_condition`]), which in turn
//! makes exact EM over heterogeneous top-k style data practical
//! ([`learning`]).

pub mod combinatorics;
mod error;
pub mod inference;
pub mod learning;
pub mod model;
pub mod rankings;
pub mod rng;

pub use error::{Error, Result};
pub use inference::{
    brute_force_posterior, condition_with_evidence, densify, factorization_test,
    partial_ranking_probability, pr_condition, DenseDistribution, SubsetObservation,
};
pub use model::{Hierarchy, NodeId, NodeKind, RiffleModel};
pub use rankings::{Interleaving, Item, ItemSet, PartialRanking, Ranking, Side, Split};
