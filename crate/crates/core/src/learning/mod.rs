//! Estimation from (partially) ranked data: complete-data MLE, exact EM
//! for tables, and structural EM for the hierarchy.

mod dataset;
mod em;
mod structure;

pub use dataset::{RankingDataset, Record};
pub use em::{
    em_fit_from, em_fit_params, log_likelihood, mle_full, posterior_sample, EmConfig, EmTrace,
    LogLikelihood, TraceEntry,
};
pub use structure::{structural_em, structure_search, StructuralFit, StructureConfig};

