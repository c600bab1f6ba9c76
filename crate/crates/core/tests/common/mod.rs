#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use riffle_core::learning::RankingDataset;
use riffle_core::{Hierarchy, Item, ItemSet, NodeKind, PartialRanking, Ranking, RiffleModel, Split};

/// Every permutation of `0..n` in lexicographic order.
pub fn all_rankings(n: usize) -> Vec<Vec<Item>> {
    fn go(prefix: &mut Vec<Item>, used: &mut Vec<bool>, out: &mut Vec<Vec<Item>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for x in 0..used.len() {
            if !used[x] {
                used[x] = true;
                prefix.push(x);
                go(prefix, used, out);
                prefix.pop();
                used[x] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// `h(σ)` straight from the definition: walk the tree, look up each node's
/// interleaving or relative ranking by its index.
pub fn oracle_prob(model: &RiffleModel, perm: &[Item]) -> f64 {
    let sigma = Ranking::new(perm.to_vec()).unwrap();
    let h = model.hierarchy();
    let mut p = 1.0;
    for id in 0..h.len() {
        let node = h.node(id);
        let idx = match node.kind() {
            NodeKind::Leaf => sigma.relative_ranking(node.items()).unwrap().index().unwrap(),
            NodeKind::Split { a, b } => {
                let split = Split::new(h.node(a).items().to_vec(), h.node(b).items().to_vec()).unwrap();
                let within = sigma.relative_ranking(node.items()).unwrap();
                within.interleaving(&split).unwrap().index().unwrap()
            }
        };
        p *= model.table(id)[idx as usize];
    }
    p
}

/// Probability of every permutation, in `all_rankings` order.
pub fn oracle_dense(model: &RiffleModel) -> Vec<f64> {
    all_rankings(model.n_items()).iter().map(|perm| oracle_prob(model, perm)).collect()
}

/// Membership by definition: earlier blocks occupy earlier ranks.
pub fn oracle_contains(pr: &PartialRanking, perm: &[Item]) -> bool {
    let mut start = 0;
    for block in pr.blocks() {
        let mut seg: Vec<Item> = perm[start..start + block.len()].to_vec();
        seg.sort_unstable();
        if seg != *block {
            return false;
        }
        start += block.len();
    }
    true
}

/// Masked and renormalized prior; `None` if the mask has no mass.
pub fn oracle_posterior(prior: &[f64], members: &[bool]) -> Option<Vec<f64>> {
    let mass: f64 = prior.iter().zip(members).filter(|(_, m)| **m).map(|(p, _)| p).sum();
    if mass <= 0.0 {
        return None;
    }
    Some(prior.iter().zip(members).map(|(p, m)| if *m { p / mass } else { 0.0 }).collect())
}

pub fn members_of(pr: &PartialRanking, n: usize) -> Vec<bool> {
    all_rankings(n).iter().map(|perm| oracle_contains(pr, perm)).collect()
}

/// Random binary hierarchy over `items`: recursive random bipartition.
pub fn random_hierarchy<R: Rng>(items: &[Item], rng: &mut R) -> Hierarchy {
    if items.len() == 1 || (items.len() <= 3 && rng.random_bool(0.3)) {
        return Hierarchy::leaf(items.to_vec()).unwrap();
    }
    let mut shuffled = items.to_vec();
    shuffled.shuffle(rng);
    let cut = rng.random_range(1..items.len());
    Hierarchy::join(
        random_hierarchy(&shuffled[..cut], rng),
        random_hierarchy(&shuffled[cut..], rng),
    )
    .unwrap()
}

pub fn random_ranking<R: Rng>(n: usize, rng: &mut R) -> Ranking {
    let mut v: Vec<Item> = (0..n).collect();
    v.shuffle(rng);
    Ranking::new(v).unwrap()
}

/// Random ordered partition: a random ranking cut at random places.
pub fn random_partial_ranking<R: Rng>(n: usize, rng: &mut R) -> PartialRanking {
    let sigma = random_ranking(n, rng);
    let mut blocks = vec![vec![sigma.items()[0]]];
    for &x in &sigma.items()[1..] {
        if rng.random_bool(0.5) {
            blocks.push(vec![x]);
        } else {
            blocks.last_mut().unwrap().push(x);
        }
    }
    PartialRanking::new(blocks).unwrap()
}

/// Largest total variation between corresponding node tables.
pub fn max_table_tv(a: &RiffleModel, b: &RiffleModel) -> f64 {
    a.tables()
        .iter()
        .zip(b.tables())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>() / 2.0)
        .fold(0.0, f64::max)
}

/// Collapses repeated observations into multiplicities, in first-seen order.
pub fn tally(items: &Arc<ItemSet>, observations: impl IntoIterator<Item = PartialRanking>) -> RankingDataset {
    let mut order = Vec::new();
    let mut counts: HashMap<PartialRanking, u64> = HashMap::new();
    for pr in observations {
        let c = counts.entry(pr.clone()).or_insert(0);
        if *c == 0 {
            order.push(pr);
        }
        *c += 1;
    }
    let mut data = RankingDataset::empty(items.clone());
    for pr in order {
        let c = counts[&pr];
        data.push(pr, c).unwrap();
    }
    data
}

/// The six-food hierarchy: ((veg fruit) junk) with veg = {0,1},
/// fruit = {2,3}, junk = {4,5}.
pub fn six_food_hierarchy() -> Hierarchy {
    Hierarchy::join(
        Hierarchy::join(Hierarchy::leaf(vec![0, 1]).unwrap(), Hierarchy::leaf(vec![2, 3]).unwrap()).unwrap(),
        Hierarchy::leaf(vec![4, 5]).unwrap(),
    )
    .unwrap()
}

/// Interleaving table with weight `decay^inversions`, where an inversion is
/// a B ranked above an A.
pub fn biased_interleavings(p: usize, q: usize, decay: f64) -> Vec<f64> {
    let size = riffle_core::Interleaving::count(p, q).unwrap();
    let mut w: Vec<f64> = (0..size)
        .map(|idx| {
            let tau = riffle_core::Interleaving::from_index(idx, p, q).unwrap();
            let mut bs = 0;
            let mut inversions = 0;
            for s in tau.sides() {
                match s {
                    riffle_core::Side::B => bs += 1,
                    riffle_core::Side::A => inversions += bs,
                }
            }
            decay.powi(inversions)
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Six-food model with well-separated factors: healthy foods tend to
/// outrank junk, vegetables and fruit interleave uniformly, and each pair
/// has a strong favorite.
pub fn planted_six_food() -> RiffleModel {
    let h = six_food_hierarchy();
    // preorder: root, healthy, veg, fruit, junk
    let tables = vec![
        biased_interleavings(4, 2, 0.6),
        biased_interleavings(2, 2, 1.0),
        vec![0.95, 0.05],
        vec![0.05, 0.95],
        vec![0.95, 0.05],
    ];
    RiffleModel::new(Arc::new(ItemSet::numbered(6).unwrap()), Arc::new(h), tables).unwrap()
}

/// Top-`k` censoring with `k` uniform on `lo..=hi`.
pub fn censor_top_k<R: Rng>(sigma: &Ranking, lo: usize, hi: usize, rng: &mut R) -> PartialRanking {
    PartialRanking::top_k(sigma, rng.random_range(lo..=hi))
}
