//! Hierarchy search from full rankings, and structural EM around it.
//!
//! Search is top-down recursive bipartitioning. A node's candidate split
//! `(A, B)` is scored by the BIC of the locally fitted one-split model:
//! the smoothed maximum log-likelihood of the observed interleavings plus
//! that of the relative rankings of each side (both sides as flat leaves),
//! minus half the free-parameter count times `ln N`. The node stays a leaf
//! when no split scores strictly better than the flat leaf.
//!
//! Scores only need counts of distinct observed patterns, so they never
//! allocate `|S|!`-sized tables.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::combinatorics::{ln_binomial, ln_factorial, MAX_FACTORIAL};
use crate::error::{domain, Result};
use crate::model::{Hierarchy, RiffleModel};
use crate::rankings::{Item, PartialRanking};
use crate::rng::task_stream;

use super::dataset::RankingDataset;
use super::em::{em_fit_params, log_likelihood, EmConfig, EmTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct StructureConfig {
    /// Sets of at most this many items are never split.
    pub max_leaf_size: usize,
    /// Pseudocount per cell used when scoring fitted tables.
    pub smoothing: f64,
    pub seed: u64,
    /// Largest set whose bipartitions are enumerated exhaustively.
    pub exhaustive_limit: usize,
    /// Hill-climbing restarts for larger sets.
    pub restarts: usize,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig { max_leaf_size: 1, smoothing: 0.1, seed: 0, exhaustive_limit: 12, restarts: 50 }
    }
}

/// Relative score difference below which two candidates count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

fn beats(score: f64, best: f64) -> bool {
    score > best + TIE_TOLERANCE * best.abs().max(1.0)
}

/// Learns a hierarchy from full rankings.
///
/// Ties between equally scored splits go to the smaller side A, then to
/// the lexicographically smallest A (side A always holds the node's
/// smallest item).
pub fn structure_search(data: &RankingDataset, cfg: &StructureConfig) -> Result<Hierarchy> {
    search_weighted(data, cfg, 1.0)
}

/// [`structure_search`] with every multiplicity scaled by `weight`.
fn search_weighted(data: &RankingDataset, cfg: &StructureConfig, weight: f64) -> Result<Hierarchy> {
    if data.is_empty() {
        return domain("cannot learn a structure from an empty dataset");
    }
    let n = data.n_items();
    let mut positions = Vec::with_capacity(data.len());
    let mut weights = Vec::with_capacity(data.len());
    for r in data.records() {
        let Some(sigma) = r.ranking.as_ranking() else {
            return domain("structure search needs full rankings only");
        };
        positions.push(sigma.positions(n)?);
        weights.push(r.count as f64 * weight);
    }
    let total = data.total_count() as f64 * weight;
    let scorer = Scorer { positions, weights, total, smoothing: cfg.smoothing };
    scorer.build(&(0..n).collect::<Vec<_>>(), cfg)
}

struct Scorer {
    positions: Vec<Vec<usize>>,
    weights: Vec<f64>,
    total: f64,
    smoothing: f64,
}

/// Hash key for a sequence of small local indices.
#[derive(Clone, PartialEq, Eq, Hash)]
enum SeqKey {
    Packed(u128),
    Long(Box<[u16]>),
}

fn seq_key(seq: impl ExactSizeIterator<Item = usize>) -> SeqKey {
    if seq.len() <= 25 {
        SeqKey::Packed(seq.fold(0u128, |acc, x| acc << 5 | x as u128))
    } else {
        SeqKey::Long(seq.map(|x| x as u16).collect())
    }
}

impl Scorer {
    fn build(&self, items: &[Item], cfg: &StructureConfig) -> Result<Hierarchy> {
        if items.len() <= cfg.max_leaf_size.max(1) {
            return Hierarchy::leaf(items.to_vec());
        }
        // every record's ranking of `items`, as local indices into `items`
        let orders: Vec<Vec<usize>> = self
            .positions
            .par_iter()
            .map(|pos| {
                let mut local: Vec<usize> = (0..items.len()).collect();
                local.sort_unstable_by_key(|&i| pos[items[i]]);
                local
            })
            .collect();
        let s = items.len();
        let leaf_score = if s <= MAX_FACTORIAL {
            self.flat_log_likelihood(&orders, &vec![true; s], s) - 0.5 * param_count_leaf(s) * self.total.ln()
        } else {
            f64::NEG_INFINITY
        };
        let best = if s <= cfg.exhaustive_limit {
            self.best_exhaustive(&orders, s)
        } else {
            self.best_local_search(&orders, s, items, cfg)
        };
        match best {
            Some((mask, score)) if beats(score, leaf_score) => {
                let a: Vec<Item> = (0..s).filter(|&i| mask[i]).map(|i| items[i]).collect();
                let b: Vec<Item> = (0..s).filter(|&i| !mask[i]).map(|i| items[i]).collect();
                Hierarchy::join(self.build(&a, cfg)?, self.build(&b, cfg)?)
            }
            _ => Hierarchy::leaf(items.to_vec()),
        }
    }

    /// Canonical candidate order: side A holds local item 0; smaller A first,
    /// then lexicographically smaller A.
    fn best_exhaustive(&self, orders: &[Vec<usize>], s: usize) -> Option<(Vec<bool>, f64)> {
        let mut candidates: Vec<Vec<usize>> = (0u64..1 << (s - 1))
            .map(|rest| (rest << 1) | 1)
            .filter(|&mask| mask != (1u64 << s) - 1)
            .map(|mask| (0..s).filter(|&i| mask >> i & 1 == 1).collect())
            .collect();
        candidates.sort_by(|x: &Vec<usize>, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
        let scored: Vec<(Vec<bool>, f64)> = candidates
            .par_iter()
            .map(|a| {
                let mut mask = vec![false; s];
                a.iter().for_each(|&i| mask[i] = true);
                let score = self.split_score(orders, &mask);
                (mask, score)
            })
            .collect();
        pick_best(scored)
    }

    /// Swap hill-climbing from random bipartitions, one derived stream per
    /// restart; ties go to the lower restart index.
    fn best_local_search(
        &self,
        orders: &[Vec<usize>],
        s: usize,
        items: &[Item],
        cfg: &StructureConfig,
    ) -> Option<(Vec<bool>, f64)> {
        let node_tag = (items[0] as u64) << 32 | s as u64;
        let results: Vec<(Vec<bool>, f64)> = (0..cfg.restarts.max(1))
            .into_par_iter()
            .map(|restart| {
                let mut rng = task_stream(cfg.seed ^ node_tag.wrapping_mul(0x9E37_79B9_7F4A_7C15), restart as u64);
                let size_a = rng.random_range(1..s);
                let mut order: Vec<usize> = (0..s).collect();
                order.shuffle(&mut rng);
                let mut mask = vec![false; s];
                order[..size_a].iter().for_each(|&i| mask[i] = true);
                let mut score = self.split_score(orders, &mask);
                loop {
                    let mut swaps: Vec<(usize, usize)> = (0..s)
                        .filter(|&i| mask[i])
                        .flat_map(|i| (0..s).filter(|&j| !mask[j]).map(move |j| (i, j)))
                        .collect();
                    swaps.shuffle(&mut rng);
                    let mut improved = false;
                    for (i, j) in swaps {
                        mask[i] = false;
                        mask[j] = true;
                        let candidate = self.split_score(orders, &mask);
                        if beats(candidate, score) {
                            score = candidate;
                            improved = true;
                            break;
                        }
                        mask[i] = true;
                        mask[j] = false;
                    }
                    if !improved {
                        break;
                    }
                }
                if !mask[0] {
                    mask.iter_mut().for_each(|m| *m = !*m);
                }
                (mask, score)
            })
            .collect();
        pick_best(results)
    }

    fn split_score(&self, orders: &[Vec<usize>], mask: &[bool]) -> f64 {
        let s = mask.len();
        let a = mask.iter().filter(|m| **m).count();
        let b = s - a;
        let inter_cells = ln_binomial(s, a);
        let ll = self.interleaving_log_likelihood(orders, mask, inter_cells)
            + self.flat_log_likelihood(orders, mask, a)
            + self.flat_log_likelihood(orders, &mask.iter().map(|m| !m).collect::<Vec<_>>(), b);
        let params = inter_cells.exp() - 1.0 + param_count_leaf(a) + param_count_leaf(b);
        ll - 0.5 * params * self.total.ln()
    }

    /// Smoothed maximum log-likelihood of the A/B patterns.
    fn interleaving_log_likelihood(&self, orders: &[Vec<usize>], mask: &[bool], ln_cells: f64) -> f64 {
        let mut counts: HashMap<SeqKey, f64> = HashMap::new();
        for (order, &w) in orders.iter().zip(&self.weights) {
            let key = if order.len() <= 128 {
                SeqKey::Packed(order.iter().fold(0u128, |acc, &i| acc << 1 | mask[i] as u128))
            } else {
                SeqKey::Long(order.iter().map(|&i| mask[i] as u16).collect())
            };
            *counts.entry(key).or_insert(0.0) += w;
        }
        self.smoothed_log_likelihood(counts, ln_cells)
    }

    /// Smoothed maximum log-likelihood of the relative rankings of the
    /// items selected by `mask` (of which there are `size`).
    fn flat_log_likelihood(&self, orders: &[Vec<usize>], mask: &[bool], size: usize) -> f64 {
        if size <= 1 {
            return 0.0;
        }
        // local index of each selected item among the selected ones
        let mut rank_in_subset = vec![usize::MAX; mask.len()];
        let mut next = 0;
        for (i, &m) in mask.iter().enumerate() {
            if m {
                rank_in_subset[i] = next;
                next += 1;
            }
        }
        let mut counts: HashMap<SeqKey, f64> = HashMap::new();
        for (order, &w) in orders.iter().zip(&self.weights) {
            let key = seq_key(SubsetIter { order, mask, rank_in_subset: &rank_in_subset, pos: 0, left: size });
            *counts.entry(key).or_insert(0.0) += w;
        }
        self.smoothed_log_likelihood(counts, ln_factorial(size))
    }

    fn smoothed_log_likelihood<K: Eq + Hash>(&self, counts: HashMap<K, f64>, ln_cells: f64) -> f64 {
        // ln(N + s·K) without overflowing K
        let ln_denominator = if self.smoothing > 0.0 {
            log_add_exp(self.total.ln(), self.smoothing.ln() + ln_cells)
        } else {
            self.total.ln()
        };
        counts.values().map(|&c| c * ((c + self.smoothing).ln() - ln_denominator)).sum()
    }
}

struct SubsetIter<'a> {
    order: &'a [usize],
    mask: &'a [bool],
    rank_in_subset: &'a [usize],
    pos: usize,
    left: usize,
}

impl Iterator for SubsetIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        while self.pos < self.order.len() {
            let i = self.order[self.pos];
            self.pos += 1;
            if self.mask[i] {
                self.left -= 1;
                return Some(self.rank_in_subset[i]);
            }
        }
        None
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.left, Some(self.left))
    }
}

impl ExactSizeIterator for SubsetIter<'_> {}

fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

fn param_count_leaf(size: usize) -> f64 {
    ln_factorial(size).exp() - 1.0
}

fn pick_best(scored: Vec<(Vec<bool>, f64)>) -> Option<(Vec<bool>, f64)> {
    let mut best: Option<(Vec<bool>, f64)> = None;
    for (mask, score) in scored {
        if best.as_ref().is_none_or(|(_, b)| beats(score, *b)) {
            best = Some((mask, score));
        }
    }
    best
}

/// Result of [`structural_em`].
#[derive(Debug, Clone)]
pub struct StructuralFit {
    pub hierarchy: Arc<Hierarchy>,
    pub model: RiffleModel,
    pub trace: EmTrace,
}

/// EM over both hierarchy and tables.
///
/// Starts from a chain with uniform tables. Each iteration completes every
/// record with `cfg.structure_samples` posterior draws, searches a new
/// hierarchy on the completed rankings, then refits the tables by exact EM
/// on the original records. Stops once the hierarchy repeats and the
/// log-likelihood has settled, or after `cfg.max_iters` iterations.
pub fn structural_em(data: &RankingDataset, cfg: &EmConfig, max_leaf_size: usize) -> Result<StructuralFit> {
    cfg.validate()?;
    if data.is_empty() {
        return domain("cannot fit a model to an empty dataset");
    }
    let items = data.items().clone();
    let mut hierarchy = Arc::new(Hierarchy::chain_n(data.n_items())?);
    let mut model = RiffleModel::uniform(items.clone(), hierarchy.clone())?;
    let mut trace = EmTrace::default();
    let mut previous_ll: Option<f64> = None;
    for iteration in 1..=cfg.max_iters {
        let completed = complete_records(&model, data, cfg.structure_samples, cfg.seed, iteration as u64)?;
        let structure_cfg = StructureConfig {
            max_leaf_size,
            smoothing: cfg.smoothing,
            seed: cfg.seed.wrapping_add(iteration as u64),
            ..StructureConfig::default()
        };
        // each record's draws share its weight, so scores see the original sample size
        let learned = Arc::new(search_weighted(&completed, &structure_cfg, 1.0 / cfg.structure_samples as f64)?);
        let same_structure = learned.fingerprint() == hierarchy.fingerprint();
        hierarchy = learned;
        let (fitted, _) = em_fit_params(hierarchy.clone(), data, cfg)?;
        model = fitted;
        let ll = log_likelihood(&model, data)?.value();
        trace.push(iteration, ll, hierarchy.fingerprint());
        let settled = previous_ll.is_some_and(|old| {
            old == ll || (old.is_finite() && (ll - old).abs() / old.abs().max(f64::MIN_POSITIVE) < cfg.rel_tol)
        });
        if same_structure && settled {
            break;
        }
        previous_ll = Some(ll);
    }
    Ok(StructuralFit { hierarchy, model, trace })
}

/// Posterior completions of every record, weighted by the record's count.
/// Each record draws from its own stream, so the result is thread-count
/// independent.
fn complete_records(
    model: &RiffleModel,
    data: &RankingDataset,
    samples: usize,
    seed: u64,
    round: u64,
) -> Result<RankingDataset> {
    let round_seed = seed ^ round.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let drawn: Vec<Vec<(PartialRanking, u64)>> = data
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            if r.ranking.is_full() {
                return Ok(vec![(r.ranking.clone(), r.count * samples as u64)]);
            }
            let conditioned = crate::inference::pr_condition(model, &r.ranking)?;
            let mut rng = task_stream(round_seed, i as u64);
            Ok((0..samples).map(|_| (PartialRanking::full(&conditioned.sample(&mut rng)), r.count)).collect())
        })
        .collect::<Result<_>>()?;
    let mut out = RankingDataset::empty(data.items().clone());
    for (pr, count) in drawn.into_iter().flatten() {
        out.push(pr, count)?;
    }
    Ok(out)
}
