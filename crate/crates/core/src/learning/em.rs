//! Parameter estimation: closed-form MLE from full rankings and exact EM
//! from partial rankings.
//!
//! The posterior given a partial ranking factors along the prior's
//! hierarchy, so the expected count of every table cell is just the
//! posterior table entry. The E-step therefore accumulates conditioned
//! tables directly instead of sampling completions.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::inference::{for_each_consistent, log_partial_ranking_probability, pr_condition};
use crate::model::{node_indices, Hierarchy, RiffleModel};
use crate::rankings::{PartialRanking, Ranking};

use super::dataset::RankingDataset;

/// Records per E-step work unit. Partial sums are combined in chunk order,
/// so results do not depend on the thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once `|ΔLL| / |LL|` falls below this.
    pub rel_tol: f64,
    /// Pseudocount added to every table cell in the M-step.
    pub smoothing: f64,
    /// Posterior completions drawn per record for structure search.
    pub structure_samples: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { max_iters: 100, rel_tol: 1e-6, smoothing: 0.1, structure_samples: 10, seed: 0 }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return domain("max_iters must be at least 1");
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return domain("rel_tol must be positive");
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return domain("smoothing must be a nonnegative finite number");
        }
        if self.structure_samples < 1 {
            return domain("structure_samples must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub log_likelihood: f64,
    pub fingerprint: String,
}

/// Per-iteration training log-likelihood and hierarchy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmTrace {
    pub entries: Vec<TraceEntry>,
}

impl EmTrace {
    pub fn push(&mut self, iteration: usize, log_likelihood: f64, fingerprint: String) {
        self.entries.push(TraceEntry { iteration, log_likelihood, fingerprint });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.log_likelihood).collect()
    }

    pub fn final_log_likelihood(&self) -> Option<f64> {
        self.entries.last().map(|e| e.log_likelihood)
    }

    /// Number of parameter updates performed.
    pub fn iterations(&self) -> usize {
        self.entries.last().map_or(0, |e| e.iteration)
    }

    /// Largest drop between consecutive log-likelihoods (zero if none).
    pub fn max_decrease(&self) -> f64 {
        self.entries
            .windows(2)
            .map(|w| w[0].log_likelihood - w[1].log_likelihood)
            .fold(0.0, f64::max)
    }
}

/// Training log-likelihood, with impossible records counted separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    /// Sum over possible records of `count · ln P(record)`.
    pub finite: f64,
    /// Total multiplicity of records with probability zero.
    pub impossible: u64,
}

impl LogLikelihood {
    /// The log-likelihood proper: `-inf` as soon as any record is impossible.
    pub fn value(&self) -> f64 {
        if self.impossible > 0 {
            f64::NEG_INFINITY
        } else {
            self.finite
        }
    }
}

pub fn log_likelihood(model: &RiffleModel, data: &RankingDataset) -> Result<LogLikelihood> {
    let parts = data
        .records()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = LogLikelihood { finite: 0.0, impossible: 0 };
            for r in chunk {
                let lp = log_partial_ranking_probability(model, &r.ranking)?;
                if lp == f64::NEG_INFINITY {
                    acc.impossible += r.count;
                } else {
                    acc.finite += r.count as f64 * lp;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().fold(LogLikelihood { finite: 0.0, impossible: 0 }, |a, b| LogLikelihood {
        finite: a.finite + b.finite,
        impossible: a.impossible + b.impossible,
    }))
}

fn empty_counts(h: &Hierarchy) -> Result<Vec<Vec<f64>>> {
    (0..h.len()).map(|id| h.table_size(id).map(|s| vec![0.0; s as usize])).collect()
}

/// Normalizes `counts + smoothing` into a model.
fn maximize(
    template: &RiffleModel,
    mut counts: Vec<Vec<f64>>,
    smoothing: f64,
) -> Result<RiffleModel> {
    for table in &mut counts {
        table.iter_mut().for_each(|c| *c += smoothing);
        let total: f64 = table.iter().sum();
        if total <= 0.0 {
            // no evidence reaches this node; fall back to uniform
            let u = 1.0 / table.len() as f64;
            table.iter_mut().for_each(|c| *c = u);
        } else {
            table.iter_mut().for_each(|c| *c /= total);
        }
    }
    RiffleModel::new(template.items_arc().clone(), template.hierarchy_arc().clone(), counts)
}

/// Closed-form complete-data estimate: smoothed empirical frequencies of
/// every node's interleaving and every leaf's relative ranking.
pub fn mle_full(h: Arc<Hierarchy>, data: &RankingDataset, smoothing: f64) -> Result<RiffleModel> {
    if data.is_empty() {
        return domain("cannot fit a model to an empty dataset");
    }
    if smoothing.is_nan() || smoothing < 0.0 {
        return domain("smoothing must be nonnegative");
    }
    let template = RiffleModel::uniform(data.items().clone(), h.clone())?;
    let n = data.n_items();
    let mut counts = empty_counts(&h)?;
    for r in data.records() {
        let Some(sigma) = r.ranking.as_ranking() else {
            return domain("mle_full needs full rankings only");
        };
        for (id, idx) in node_indices(&h, &sigma.positions(n)?).into_iter().enumerate() {
            counts[id][idx] += r.count as f64;
        }
    }
    maximize(&template, counts, smoothing)
}

/// One E-step: training log-likelihood of `model` and expected cell counts.
fn expected_counts(model: &RiffleModel, data: &RankingDataset) -> Result<(LogLikelihood, Vec<Vec<f64>>)> {
    let h = model.hierarchy();
    let n = model.n_items();
    let parts = data
        .records()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut counts = empty_counts(h)?;
            let mut ll = LogLikelihood { finite: 0.0, impossible: 0 };
            let mut masses = vec![0.0; h.len()];
            'records: for r in chunk {
                let block_of = r.ranking.block_of(n);
                let mut log_evidence = 0.0;
                for (id, mass) in masses.iter_mut().enumerate() {
                    let table = model.table(id);
                    let mut m = 0.0;
                    for_each_consistent(model, id, &block_of, |idx| m += table[idx]);
                    if m <= 0.0 {
                        ll.impossible += r.count;
                        continue 'records;
                    }
                    *mass = m;
                    log_evidence += m.ln();
                }
                ll.finite += r.count as f64 * log_evidence;
                for (id, &mass) in masses.iter().enumerate() {
                    let table = model.table(id);
                    let scale = r.count as f64 / mass;
                    let acc = &mut counts[id];
                    for_each_consistent(model, id, &block_of, |idx| acc[idx] += scale * table[idx]);
                }
            }
            Ok((ll, counts))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total_counts = empty_counts(h)?;
    let mut total_ll = LogLikelihood { finite: 0.0, impossible: 0 };
    for (ll, counts) in parts {
        total_ll.finite += ll.finite;
        total_ll.impossible += ll.impossible;
        for (acc, c) in total_counts.iter_mut().zip(counts) {
            acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
    }
    Ok((total_ll, total_counts))
}

fn relative_change(old: f64, new: f64) -> f64 {
    if old == new {
        return 0.0;
    }
    if !old.is_finite() || !new.is_finite() {
        return f64::INFINITY;
    }
    (new - old).abs() / old.abs().max(f64::MIN_POSITIVE)
}

/// Exact EM for the tables of a fixed hierarchy, starting from uniform.
///
/// Trace entry `t` holds the log-likelihood after `t` parameter updates;
/// the returned model is the one scored by the last entry.
pub fn em_fit_params(h: Arc<Hierarchy>, data: &RankingDataset, cfg: &EmConfig) -> Result<(RiffleModel, EmTrace)> {
    cfg.validate()?;
    if data.is_empty() {
        return domain("cannot fit a model to an empty dataset");
    }
    let model = RiffleModel::uniform(data.items().clone(), h)?;
    em_fit_from(model, data, cfg)
}

/// [`em_fit_params`] from a given starting model.
pub fn em_fit_from(mut model: RiffleModel, data: &RankingDataset, cfg: &EmConfig) -> Result<(RiffleModel, EmTrace)> {
    cfg.validate()?;
    let fingerprint = model.hierarchy().fingerprint();
    let mut trace = EmTrace::default();
    let (mut ll, mut counts) = expected_counts(&model, data)?;
    trace.push(0, ll.value(), fingerprint.clone());
    for iteration in 1..=cfg.max_iters {
        model = maximize(&model, counts, cfg.smoothing)?;
        let (new_ll, new_counts) = expected_counts(&model, data)?;
        trace.push(iteration, new_ll.value(), fingerprint.clone());
        let change = relative_change(ll.value(), new_ll.value());
        ll = new_ll;
        counts = new_counts;
        if change < cfg.rel_tol {
            break;
        }
    }
    Ok((model, trace))
}

/// Exact draw from the posterior given `pr`; always a member of `pr`.
pub fn posterior_sample<R: Rng + ?Sized>(model: &RiffleModel, pr: &PartialRanking, rng: &mut R) -> Result<Ranking> {
    if let Some(sigma) = pr.as_ranking() {
        // still validates coverage and evidence
        pr_condition(model, pr)?;
        return Ok(sigma);
    }
    Ok(pr_condition(model, pr)?.sample(rng))
}
