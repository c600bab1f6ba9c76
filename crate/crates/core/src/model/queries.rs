//! Marginal queries answered directly from the factored tables.

use rand::Rng;

use crate::combinatorics::{binary_string_decode, lehmer_decode};
use crate::error::{domain, Result};
use crate::inference::partial_ranking_probability;
use crate::model::{NodeId, NodeKind, RiffleModel};
use crate::rankings::{Item, PartialRanking};

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Probability that each item is ranked first.
///
/// "`x` first" is the partial ranking `{x} | rest`, so each entry is an
/// exact observation probability.
pub fn first_place_distribution(model: &RiffleModel) -> Result<Vec<f64>> {
    let n = model.n_items();
    (0..n)
        .map(|x| {
            if n == 1 {
                return Ok(1.0);
            }
            let rest: Vec<Item> = (0..n).filter(|&y| y != x).collect();
            partial_ranking_probability(model, &PartialRanking::new(vec![vec![x], rest])?)
        })
        .collect()
}

/// Exact probability that `i` is ranked before `j`.
///
/// The relative order of two items is decided at their lowest common
/// node: within a leaf by its table, at a split by how the node's
/// interleaving places the rank of `i` inside one side against the rank of
/// `j` inside the other.
pub fn pairwise_marginal(model: &RiffleModel, i: Item, j: Item) -> Result<f64> {
    let n = model.n_items();
    if i == j {
        return domain("pairwise marginal needs two distinct items");
    }
    if i >= n || j >= n {
        return domain("item out of range");
    }
    let h = model.hierarchy();
    let mut id = h.root();
    loop {
        match h.node(id).kind() {
            NodeKind::Leaf => {
                let items = h.node(id).items();
                let mut p = 0.0;
                for (idx, &w) in model.table(id).iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let order = lehmer_decode(idx as u64, items)?;
                    let ri = order.iter().position(|&x| x == i).unwrap();
                    let rj = order.iter().position(|&x| x == j).unwrap();
                    if ri < rj {
                        p += w;
                    }
                }
                return Ok(p);
            }
            NodeKind::Split { a, b } => {
                let a_items = h.node(a).items();
                let (i_in_a, j_in_a) = (a_items.binary_search(&i).is_ok(), a_items.binary_search(&j).is_ok());
                if i_in_a && j_in_a {
                    id = a;
                } else if !i_in_a && !j_in_a {
                    id = b;
                } else if i_in_a {
                    return a_before_b(model, id, i, j);
                } else {
                    return Ok(1.0 - a_before_b(model, id, j, i)?);
                }
            }
        }
    }
}

/// `P(x before y)` at split node `id` with `x` on side A and `y` on side B.
fn a_before_b(model: &RiffleModel, id: NodeId, x: Item, y: Item) -> Result<f64> {
    let h = model.hierarchy();
    let NodeKind::Split { a, b } = h.node(id).kind() else { unreachable!() };
    let (p, q) = (h.node(a).items().len(), h.node(b).items().len());
    let rank_x = rank_distribution(model, a, x)?;
    let rank_y = rank_distribution(model, b, y)?;
    let mut total = 0.0;
    for (idx, &w) in model.table(id).iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let bits = binary_string_decode(idx as u64, p, q)?;
        // walk positions; each A slot sees the mass of B ranks still to come
        let mut b_seen = 0;
        let mut b_mass_after: f64 = rank_y.iter().sum();
        let mut a_seen = 0;
        let mut acc = 0.0;
        for is_b in bits {
            if is_b {
                b_mass_after -= rank_y[b_seen];
                b_seen += 1;
            } else {
                acc += rank_x[a_seen] * b_mass_after;
                a_seen += 1;
            }
        }
        total += w * acc;
    }
    Ok(total)
}

/// Distribution of the zero-based rank of `x` within node `id`'s items.
fn rank_distribution(model: &RiffleModel, id: NodeId, x: Item) -> Result<Vec<f64>> {
    let h = model.hierarchy();
    let node = h.node(id);
    let mut out = vec![0.0; node.items().len()];
    match node.kind() {
        NodeKind::Leaf => {
            for (idx, &w) in model.table(id).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let order = lehmer_decode(idx as u64, node.items())?;
                out[order.iter().position(|&z| z == x).unwrap()] += w;
            }
        }
        NodeKind::Split { a, b } => {
            let (p, q) = (h.node(a).items().len(), h.node(b).items().len());
            let on_a = h.node(a).items().binary_search(&x).is_ok();
            let inner = rank_distribution(model, if on_a { a } else { b }, x)?;
            for (idx, &w) in model.table(id).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let bits = binary_string_decode(idx as u64, p, q)?;
                let mut seen = 0;
                for (pos, is_b) in bits.into_iter().enumerate() {
                    if is_b != on_a {
                        out[pos] += w * inner[seen];
                        seen += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Sampling estimate of `P(i before j)`, as a cross-check on
/// [`pairwise_marginal`] or for models too large to tabulate cheaply.
pub fn pairwise_marginal_monte_carlo<R: Rng + ?Sized>(
    model: &RiffleModel,
    i: Item,
    j: Item,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if i == j {
        return domain("pairwise marginal needs two distinct items");
    }
    if samples == 0 {
        return domain("need at least one sample");
    }
    let hits = (0..samples)
        .filter(|_| {
            let s = model.sample(rng);
            s.rank_of(i) < s.rank_of(j)
        })
        .count();
    let value = hits as f64 / samples as f64;
    Ok(Estimate { value, std_error: (value * (1.0 - value) / samples as f64).sqrt(), samples })
}
