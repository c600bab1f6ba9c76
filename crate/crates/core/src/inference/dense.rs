//! Explicit distributions over all `n!` rankings, for small `n` only.
//!
//! These are the reference implementations that the factored routines are
//! checked against: plain Bayes conditioning by masking, marginals by
//! summation, and a direct test of riffled independence.

use std::sync::Arc;

use crate::combinatorics::{factorial, next_permutation};
use crate::error::{domain, Error, Result};
use crate::model::{node_indices, Hierarchy, RiffleModel};
use crate::rankings::{Item, ItemSet, PartialRanking, Ranking, Split};

/// Largest item count the dense representation accepts (8! = 40320 entries).
pub const DENSE_MAX_ITEMS: usize = 8;

/// A probability for every ranking of `0..n`, indexed by [`Ranking::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDistribution {
    items: Arc<ItemSet>,
    probs: Vec<f64>,
}

fn check_dense_size(n: usize) -> Result<usize> {
    if n > DENSE_MAX_ITEMS {
        return Err(Error::Capacity(format!(
            "dense distributions are limited to {DENSE_MAX_ITEMS} items, got {n}"
        )));
    }
    Ok(factorial(n)? as usize)
}

/// Calls `f(index, ranking)` for every ranking of `0..n` in index order.
pub fn for_each_ranking(n: usize, mut f: impl FnMut(usize, &[Item])) {
    let mut perm: Vec<Item> = (0..n).collect();
    let mut idx = 0;
    loop {
        f(idx, &perm);
        idx += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
}

impl DenseDistribution {
    pub fn new(items: Arc<ItemSet>, probs: Vec<f64>) -> Result<Self> {
        let size = check_dense_size(items.len())?;
        if probs.len() != size {
            return domain(format!("expected {size} probabilities, got {}", probs.len()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return domain("probabilities must be finite and nonnegative");
        }
        Ok(DenseDistribution { items, probs })
    }

    pub fn uniform(items: Arc<ItemSet>) -> Result<Self> {
        let size = check_dense_size(items.len())?;
        Self::new(items, vec![1.0 / size as f64; size])
    }

    pub fn items(&self) -> &Arc<ItemSet> {
        &self.items
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, sigma: &Ranking) -> Result<f64> {
        if !sigma.is_full(self.n_items()) {
            return domain("ranking does not cover the distribution's items");
        }
        Ok(self.probs[sigma.index()? as usize])
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability of the observation's member set.
    pub fn mass(&self, obs: &SubsetObservation) -> Result<f64> {
        let members = obs.members(self.n_items())?;
        Ok(self.probs.iter().zip(&members).filter(|(_, m)| **m).map(|(p, _)| p).sum())
    }

    /// Largest absolute pointwise difference.
    pub fn max_abs_diff(&self, other: &DenseDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn total_variation(&self, other: &DenseDistribution) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
    }
}

/// A set of rankings to condition on: either a partial ranking or an
/// arbitrary explicit member set.
#[derive(Debug, Clone, PartialEq)]
pub enum SubsetObservation {
    Partial(PartialRanking),
    /// Membership flag for every ranking index of `0..n`.
    Explicit(Vec<bool>),
}

impl SubsetObservation {
    /// All rankings satisfying `pred`.
    pub fn from_predicate(n: usize, pred: impl Fn(&[Item]) -> bool) -> Result<Self> {
        let size = check_dense_size(n)?;
        let mut members = vec![false; size];
        for_each_ranking(n, |idx, perm| members[idx] = pred(perm));
        if !members.iter().any(|m| *m) {
            return domain("observation has no member rankings");
        }
        Ok(SubsetObservation::Explicit(members))
    }

    /// "`item` is in zero-based rank `rank`".
    pub fn item_at_rank(n: usize, item: Item, rank: usize) -> Result<Self> {
        if item >= n || rank >= n {
            return domain("item or rank out of range");
        }
        Self::from_predicate(n, |perm| perm[rank] == item)
    }

    /// The whole of `S_n`.
    pub fn everything(n: usize) -> Result<Self> {
        Self::from_predicate(n, |_| true)
    }

    pub fn members(&self, n: usize) -> Result<Vec<bool>> {
        let size = check_dense_size(n)?;
        match self {
            SubsetObservation::Explicit(m) => {
                if m.len() != size {
                    return domain("observation was built for a different item count");
                }
                Ok(m.clone())
            }
            SubsetObservation::Partial(pr) => {
                if pr.len() != n || pr.items().iter().enumerate().any(|(i, &x)| i != x) {
                    return domain("partial ranking does not cover the items");
                }
                let block_of = pr.block_of(n);
                let mut members = vec![false; size];
                for_each_ranking(n, |idx, perm| {
                    members[idx] = perm.windows(2).all(|w| block_of[w[0]] <= block_of[w[1]]);
                });
                Ok(members)
            }
        }
    }
}

impl From<PartialRanking> for SubsetObservation {
    fn from(pr: PartialRanking) -> Self {
        SubsetObservation::Partial(pr)
    }
}

/// Explicit table of `model`'s distribution.
pub fn densify(model: &RiffleModel) -> Result<DenseDistribution> {
    let n = model.n_items();
    let size = check_dense_size(n)?;
    let mut probs = vec![0.0; size];
    let mut pos = vec![0; n];
    for_each_ranking(n, |idx, perm| {
        for (r, &x) in perm.iter().enumerate() {
            pos[x] = r;
        }
        probs[idx] = node_indices(model.hierarchy(), &pos)
            .into_iter()
            .enumerate()
            .map(|(id, i)| model.table(id)[i])
            .product();
    });
    DenseDistribution::new(model.items_arc().clone(), probs)
}

/// `h(σ | obs) ∝ 1[σ ∈ obs] · h(σ)`, by masking and renormalizing.
pub fn brute_force_posterior(prior: &DenseDistribution, obs: &SubsetObservation) -> Result<DenseDistribution> {
    let members = obs.members(prior.n_items())?;
    let mut probs: Vec<f64> =
        prior.probs.iter().zip(&members).map(|(p, m)| if *m { *p } else { 0.0 }).collect();
    let mass: f64 = probs.iter().sum();
    if mass <= 0.0 {
        return Err(Error::ZeroEvidence { node: None, items: prior.items.all() });
    }
    probs.iter_mut().for_each(|p| *p /= mass);
    DenseDistribution::new(prior.items.clone(), probs)
}

/// Outcome of [`factorization_test`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationReport {
    /// Largest pointwise gap between the distribution and the product of
    /// its interleaving and relative-ranking marginals.
    pub max_deviation: f64,
    pub passes: bool,
}

/// Checks whether `dense` factors as `m(τ_AB) · f(φ_A) · g(φ_B)`.
pub fn factorization_test(dense: &DenseDistribution, split: &Split, tol: f64) -> Result<FactorizationReport> {
    let n = dense.n_items();
    if split.union() != (0..n).collect::<Vec<_>>() {
        return domain("split does not partition the distribution's items");
    }
    // A two-leaf hierarchy computes exactly the three marginal coordinates.
    let h = Hierarchy::join(Hierarchy::leaf(split.a().to_vec())?, Hierarchy::leaf(split.b().to_vec())?)?;
    let (root, a_leaf, b_leaf) = if h.node(1).items() == split.a() { (0, 1, 2) } else { (0, 2, 1) };
    let mut coords = Vec::with_capacity(dense.probs.len());
    let sizes: Vec<usize> = (0..h.len()).map(|id| h.table_size(id).map(|s| s as usize)).collect::<Result<_>>()?;
    let mut marginals: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
    let mut pos = vec![0; n];
    for_each_ranking(n, |idx, perm| {
        for (r, &x) in perm.iter().enumerate() {
            pos[x] = r;
        }
        let c = node_indices(&h, &pos);
        for (id, &i) in c.iter().enumerate() {
            marginals[id][i] += dense.probs[idx];
        }
        coords.push(c);
    });
    let total = dense.total();
    let max_deviation = coords
        .iter()
        .zip(&dense.probs)
        .map(|(c, p)| {
            let product = marginals[root][c[root]] * marginals[a_leaf][c[a_leaf]] * marginals[b_leaf][c[b_leaf]]
                / (total * total);
            (product - p).abs()
        })
        .fold(0.0, f64::max);
    Ok(FactorizationReport { max_deviation, passes: max_deviation <= tol })
}

/// Projects `dense` onto `h`: each node table is the exact marginal of the
/// node's interleaving or leaf relative ranking.
pub fn decompose_dense(dense: &DenseDistribution, h: Arc<Hierarchy>) -> Result<RiffleModel> {
    let n = dense.n_items();
    if !h.covers(n) {
        return domain("hierarchy does not cover the distribution's items");
    }
    let mut tables: Vec<Vec<f64>> = (0..h.len())
        .map(|id| h.table_size(id).map(|s| vec![0.0; s as usize]))
        .collect::<Result<_>>()?;
    let mut pos = vec![0; n];
    for_each_ranking(n, |idx, perm| {
        for (r, &x) in perm.iter().enumerate() {
            pos[x] = r;
        }
        for (id, i) in node_indices(&h, &pos).into_iter().enumerate() {
            tables[id][i] += dense.probs[idx];
        }
    });
    for table in &mut tables {
        let sum: f64 = table.iter().sum();
        if sum <= 0.0 {
            return domain("distribution has no mass");
        }
        table.iter_mut().for_each(|p| *p /= sum);
    }
    RiffleModel::new(dense.items.clone(), h, tables)
}
