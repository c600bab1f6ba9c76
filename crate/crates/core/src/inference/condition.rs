//! Exact conditioning of a factored model on a partial ranking.
//!
//! A partial ranking restricted to any node's item set is again a partial
//! ranking, so the observation splits into independent per-node
//! constraints: at a split node, only interleavings placing the right number
//! of A and B items in every block survive; at a leaf, only relative
//! rankings that respect block order survive. Each table is masked and
//! renormalized on its own and the discarded masses multiply to the
//! evidence.
//!
//! Restriction is implicit: every node reads block membership from one
//! shared `block_of` array, so no per-node partial ranking is materialized.

use crate::combinatorics::{binomials, FACTORIALS};
use crate::error::{domain, Error, Result};
use crate::model::{NodeKind, RiffleModel};
use crate::rankings::{Item, PartialRanking};

/// A conditioned model together with the prior probability of the observation.
#[derive(Debug, Clone)]
pub struct Conditioned {
    pub model: RiffleModel,
    pub evidence: f64,
}

/// Posterior of `prior` given that the true ranking lies in `obs`.
///
/// The result keeps the prior's hierarchy. Fails with
/// [`Error::ZeroEvidence`] when `obs` has probability zero.
pub fn pr_condition(prior: &RiffleModel, obs: &PartialRanking) -> Result<RiffleModel> {
    condition_with_evidence(prior, obs).map(|c| c.model)
}

/// [`pr_condition`] that also reports the evidence `P(obs)`.
pub fn condition_with_evidence(prior: &RiffleModel, obs: &PartialRanking) -> Result<Conditioned> {
    let block_of = observation_blocks(prior, obs)?;
    let h = prior.hierarchy();
    let mut tables = Vec::with_capacity(h.len());
    let mut evidence = 1.0;
    for id in 0..h.len() {
        let table = prior.table(id);
        let mut post = vec![0.0; table.len()];
        let mut mass = 0.0;
        let mut kept = 0;
        for_each_consistent(prior, id, &block_of, |idx| {
            post[idx] = table[idx];
            mass += table[idx];
            kept += 1;
        });
        // an unconstrained node keeps its table bit for bit
        if kept == table.len() {
            tables.push(post);
            continue;
        }
        if mass <= 0.0 {
            return Err(Error::ZeroEvidence {
                node: Some(id),
                items: h.node(id).items().to_vec(),
            });
        }
        post.iter_mut().for_each(|p| *p /= mass);
        evidence *= mass;
        tables.push(post);
    }
    let model = RiffleModel::from_parts_unchecked(
        prior.items_arc().clone(),
        prior.hierarchy_arc().clone(),
        tables,
    );
    Ok(Conditioned { model, evidence })
}

/// `P(σ ∈ pr)`: product over nodes of the prior mass on consistent entries.
/// Zero for impossible observations.
pub fn partial_ranking_probability(model: &RiffleModel, pr: &PartialRanking) -> Result<f64> {
    let block_of = observation_blocks(model, pr)?;
    let mut evidence = 1.0;
    for id in 0..model.hierarchy().len() {
        let table = model.table(id);
        let mut mass = 0.0;
        for_each_consistent(model, id, &block_of, |idx| mass += table[idx]);
        evidence *= mass;
        if evidence == 0.0 {
            break;
        }
    }
    Ok(evidence)
}

/// `ln P(σ ∈ pr)`, accumulated per node; `-inf` for impossible observations.
pub fn log_partial_ranking_probability(model: &RiffleModel, pr: &PartialRanking) -> Result<f64> {
    let block_of = observation_blocks(model, pr)?;
    let mut total = 0.0;
    for id in 0..model.hierarchy().len() {
        let table = model.table(id);
        let mut mass = 0.0;
        for_each_consistent(model, id, &block_of, |idx| mass += table[idx]);
        if mass <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += mass.ln();
    }
    Ok(total)
}

/// Table indices at node `id` consistent with the observation, in ascending order.
pub fn consistent_indices(model: &RiffleModel, id: usize, obs: &PartialRanking) -> Result<Vec<usize>> {
    let block_of = observation_blocks(model, obs)?;
    let mut out = Vec::new();
    for_each_consistent(model, id, &block_of, |idx| out.push(idx));
    Ok(out)
}

fn observation_blocks(model: &RiffleModel, obs: &PartialRanking) -> Result<Vec<usize>> {
    let n = model.n_items();
    if obs.len() != n || obs.items().iter().enumerate().any(|(i, &x)| i != x) {
        return domain(format!("observation does not cover the model's {n} items"));
    }
    Ok(obs.block_of(n))
}

pub(crate) fn for_each_consistent<F: FnMut(usize)>(
    model: &RiffleModel,
    id: usize,
    block_of: &[usize],
    emit: F,
) {
    let h = model.hierarchy();
    let node = h.node(id);
    match node.kind() {
        NodeKind::Split { a, .. } => {
            let a_items = h.node(a).items();
            let blocks = block_profile(node.items(), block_of, |x| a_items.binary_search(&x).is_ok());
            let total_a = a_items.len();
            let mut walk = InterleavingWalk {
                blocks: &blocks,
                n: node.items().len(),
                emit,
            };
            let (size, need) = blocks[0];
            walk.visit(0, 0, size, need, total_a, 0);
        }
        NodeKind::Leaf => {
            let items = node.items();
            let m = items.len();
            // local item masks per block, in block order
            let mut keyed: Vec<(usize, usize)> =
                items.iter().enumerate().map(|(local, &x)| (block_of[x], local)).collect();
            keyed.sort_unstable();
            let mut groups: Vec<u32> = Vec::new();
            let mut prev = usize::MAX;
            for (block, local) in keyed {
                if block != prev {
                    groups.push(0);
                    prev = block;
                }
                *groups.last_mut().unwrap() |= 1 << local;
            }
            let mut walk = LeafWalk { groups: &groups, m, full: (1u32 << m) - 1, emit };
            walk.visit(0, 0, groups[0], 0, 0);
        }
    }
}

/// `(block size, A count)` of the node's items for each nonempty block, in block order.
fn block_profile(items: &[Item], block_of: &[usize], in_a: impl Fn(Item) -> bool) -> Vec<(usize, usize)> {
    let mut keyed: Vec<(usize, bool)> = items.iter().map(|&x| (block_of[x], in_a(x))).collect();
    keyed.sort_unstable_by_key(|k| k.0);
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut prev = usize::MAX;
    for (block, is_a) in keyed {
        if block != prev {
            out.push((0, 0));
            prev = block;
        }
        let last = out.last_mut().unwrap();
        last.0 += 1;
        last.1 += is_a as usize;
    }
    out
}

/// Depth-first enumeration of the interleavings with prescribed A counts
/// per block, emitting their combinatorial-number-system indices in
/// ascending order.
struct InterleavingWalk<'a, F> {
    blocks: &'a [(usize, usize)],
    n: usize,
    emit: F,
}

impl<F: FnMut(usize)> InterleavingWalk<'_, F> {
    fn visit(&mut self, pos: usize, block: usize, slots: usize, need_a: usize, left_a: usize, acc: u64) {
        // Once only one symbol remains the suffix is forced, and it adds
        // nothing to the index; block totals guarantee it is consistent.
        if left_a == 0 || left_a == self.n - pos {
            (self.emit)(acc as usize);
            return;
        }
        if slots == 0 {
            let (size, need) = self.blocks[block + 1];
            self.visit(pos, block + 1, size, need, left_a, acc);
            return;
        }
        if need_a > 0 {
            self.visit(pos + 1, block, slots - 1, need_a - 1, left_a - 1, acc);
        }
        if slots > need_a {
            let skipped = binomials().get(self.n - pos - 1, left_a - 1);
            self.visit(pos + 1, block, slots - 1, need_a, left_a, acc + skipped);
        }
    }
}

/// Depth-first enumeration of the leaf rankings that list each block's
/// items before the next block's, emitting Lehmer indices in ascending order.
struct LeafWalk<'a, F> {
    groups: &'a [u32],
    m: usize,
    full: u32,
    emit: F,
}

impl<F: FnMut(usize)> LeafWalk<'_, F> {
    fn visit(&mut self, step: usize, group: usize, available: u32, used: u32, acc: u64) {
        if step == self.m {
            (self.emit)(acc as usize);
            return;
        }
        if available == 0 {
            let next = self.groups[group + 1];
            self.visit(step, group + 1, next, used, acc);
            return;
        }
        let weight = FACTORIALS[self.m - 1 - step];
        let free = self.full & !used;
        let mut rest = available;
        while rest != 0 {
            let local = rest.trailing_zeros();
            let bit = 1u32 << local;
            rest &= !bit;
            let digit = (free & (bit - 1)).count_ones() as u64;
            self.visit(step + 1, group, available & !bit, used | bit, acc + digit * weight);
        }
    }
}
