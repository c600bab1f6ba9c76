//! Hierarchical riffle-independent models: one interleaving table per split
//! node and one relative-ranking table per leaf.

mod hierarchy;
mod queries;

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::combinatorics::{binary_string_decode, binary_string_index, lehmer_decode, lehmer_index};
use crate::error::{domain, Error, Result};
use crate::rankings::{Item, ItemSet, Ranking};

pub use hierarchy::{Hierarchy, HierarchyNode, NodeId, NodeKind};
pub use queries::{first_place_distribution, pairwise_marginal, pairwise_marginal_monte_carlo, Estimate};

/// Tolerance on table sums accepted when constructing a model.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Default cap on the number of entries in any single table.
pub const DEFAULT_TABLE_CAP: u64 = 10_000_000;

/// A distribution over rankings of an [`ItemSet`] that factors along a [`Hierarchy`].
///
/// `tables[id]` belongs to hierarchy node `id`. Split tables are indexed by
/// [`Interleaving::index`](crate::rankings::Interleaving::index) of the
/// node's A/B pattern and leaf tables by [`Ranking::index`] of the leaf's
/// relative ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RiffleModel {
    items: Arc<ItemSet>,
    hierarchy: Arc<Hierarchy>,
    tables: Vec<Vec<f64>>,
}

impl RiffleModel {
    pub fn new(items: Arc<ItemSet>, hierarchy: Arc<Hierarchy>, tables: Vec<Vec<f64>>) -> Result<Self> {
        if !hierarchy.covers(items.len()) {
            return domain(format!(
                "hierarchy covers {} items but the item set has {}",
                hierarchy.n_items(),
                items.len()
            ));
        }
        if tables.len() != hierarchy.len() {
            return Err(Error::InvalidModel(format!(
                "{} tables for {} hierarchy nodes",
                tables.len(),
                hierarchy.len()
            )));
        }
        for (id, table) in tables.iter().enumerate() {
            let want = hierarchy.table_size(id)?;
            if table.len() as u64 != want {
                return Err(Error::InvalidModel(format!(
                    "node {id}: table has {} entries, expected {want}",
                    table.len()
                )));
            }
            if table.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidModel(format!("node {id}: negative or non-finite entry")));
            }
            let sum: f64 = table.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::InvalidModel(format!("node {id}: table sums to {sum}")));
            }
        }
        Ok(RiffleModel { items, hierarchy, tables })
    }

    pub(crate) fn from_parts_unchecked(
        items: Arc<ItemSet>,
        hierarchy: Arc<Hierarchy>,
        tables: Vec<Vec<f64>>,
    ) -> Self {
        RiffleModel { items, hierarchy, tables }
    }

    /// Every table uniform, so every ranking has probability `1/n!`.
    pub fn uniform(items: Arc<ItemSet>, hierarchy: Arc<Hierarchy>) -> Result<Self> {
        hierarchy.check_capacity(DEFAULT_TABLE_CAP)?;
        let tables = (0..hierarchy.len())
            .map(|id| {
                let size = hierarchy.table_size(id)? as usize;
                Ok(vec![1.0 / size as f64; size])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(items, hierarchy, tables)
    }

    /// Tables drawn independently from a symmetric Dirichlet.
    pub fn random<R: Rng + ?Sized>(
        items: Arc<ItemSet>,
        hierarchy: Arc<Hierarchy>,
        rng: &mut R,
        concentration: f64,
    ) -> Result<Self> {
        if !(concentration > 0.0 && concentration.is_finite()) {
            return domain("Dirichlet concentration must be positive and finite");
        }
        hierarchy.check_capacity(DEFAULT_TABLE_CAP)?;
        let gamma = Gamma::new(concentration, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
        let tables = (0..hierarchy.len())
            .map(|id| {
                let size = hierarchy.table_size(id)? as usize;
                let mut t: Vec<f64> = (0..size).map(|_| gamma.sample(rng)).collect();
                let sum: f64 = t.iter().sum();
                if sum > 0.0 {
                    t.iter_mut().for_each(|p| *p /= sum);
                } else {
                    // every gamma draw underflowed; the Dirichlet is then
                    // concentrated on a vertex
                    t[rng.random_range(0..size)] = 1.0;
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(items, hierarchy, tables)
    }

    /// Point mass on `sigma`, factored along `hierarchy`.
    pub fn point_mass(items: Arc<ItemSet>, hierarchy: Arc<Hierarchy>, sigma: &Ranking) -> Result<Self> {
        let mut tables = Self::uniform(items.clone(), hierarchy.clone())?.tables;
        let indices = node_indices(&hierarchy, &sigma.positions(items.len())?);
        for (table, idx) in tables.iter_mut().zip(indices) {
            table.iter_mut().for_each(|p| *p = 0.0);
            table[idx] = 1.0;
        }
        Self::new(items, hierarchy, tables)
    }

    pub fn items(&self) -> &ItemSet {
        &self.items
    }

    pub fn items_arc(&self) -> &Arc<ItemSet> {
        &self.items
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn hierarchy_arc(&self) -> &Arc<Hierarchy> {
        &self.hierarchy
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn table(&self, id: NodeId) -> &[f64] {
        &self.tables[id]
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    pub fn into_tables(self) -> Vec<Vec<f64>> {
        self.tables
    }

    pub fn parameter_count(&self) -> u64 {
        self.tables.iter().map(|t| t.len() as u64 - 1).sum()
    }

    /// `h(σ)`: product of the table entries that `sigma` selects at every node.
    pub fn evaluate(&self, sigma: &Ranking) -> Result<f64> {
        let pos = sigma.positions(self.n_items())?;
        Ok(node_indices(&self.hierarchy, &pos)
            .into_iter()
            .enumerate()
            .map(|(id, idx)| self.tables[id][idx])
            .product())
    }

    /// `ln h(σ)`, summed node by node so long chains do not underflow.
    pub fn log_evaluate(&self, sigma: &Ranking) -> Result<f64> {
        let pos = sigma.positions(self.n_items())?;
        Ok(node_indices(&self.hierarchy, &pos)
            .into_iter()
            .enumerate()
            .map(|(id, idx)| self.tables[id][idx].ln())
            .sum())
    }

    /// Exact draw: leaf rankings first, then interleavings merged bottom-up.
    ///
    /// Consumes one uniform variate per node, in preorder.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Ranking {
        let draws: Vec<usize> = self.tables.iter().map(|t| sample_index(t, rng)).collect();
        Ranking::from_vec_unchecked(self.assemble(0, &draws))
    }

    fn assemble(&self, id: NodeId, draws: &[usize]) -> Vec<Item> {
        let node = self.hierarchy.node(id);
        match node.kind() {
            NodeKind::Leaf => lehmer_decode(draws[id] as u64, node.items()).expect("index in range"),
            NodeKind::Split { a, b } => {
                let on_a = self.assemble(a, draws);
                let on_b = self.assemble(b, draws);
                let bits = binary_string_decode(draws[id] as u64, on_a.len(), on_b.len())
                    .expect("index in range");
                let (mut ia, mut ib) = (on_a.into_iter(), on_b.into_iter());
                bits.into_iter()
                    .map(|is_b| if is_b { ib.next().unwrap() } else { ia.next().unwrap() })
                    .collect()
            }
        }
    }
}

/// Inverse-CDF draw from an unnormalized-tolerant probability vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(table: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * table.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in table.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Table index selected at every node by the ranking with rank table `pos`.
pub(crate) fn node_indices(h: &Hierarchy, pos: &[usize]) -> Vec<usize> {
    let mut out = vec![0; h.len()];
    ordered_items(h, 0, pos, &mut out);
    out
}

/// Items of node `id` sorted by rank; fills `out` for the node's subtree.
fn ordered_items(h: &Hierarchy, id: NodeId, pos: &[usize], out: &mut [usize]) -> Vec<Item> {
    let node = h.node(id);
    match node.kind() {
        NodeKind::Leaf => {
            let mut v = node.items().to_vec();
            v.sort_unstable_by_key(|&x| pos[x]);
            out[id] = lehmer_index(&v).expect("leaf within factorial range") as usize;
            v
        }
        NodeKind::Split { a, b } => {
            let on_a = ordered_items(h, a, pos, out);
            let on_b = ordered_items(h, b, pos, out);
            let mut merged = Vec::with_capacity(on_a.len() + on_b.len());
            let mut bits = Vec::with_capacity(on_a.len() + on_b.len());
            let (mut i, mut j) = (0, 0);
            while i < on_a.len() || j < on_b.len() {
                if j == on_b.len() || (i < on_a.len() && pos[on_a[i]] < pos[on_b[j]]) {
                    merged.push(on_a[i]);
                    bits.push(false);
                    i += 1;
                } else {
                    merged.push(on_b[j]);
                    bits.push(true);
                    j += 1;
                }
            }
            out[id] = binary_string_index(&bits).expect("split within binomial range") as usize;
            merged
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::next_permutation;
    use crate::rng::seeded;

    pub(crate) fn foods6() -> (Arc<ItemSet>, Arc<Hierarchy>) {
        let items =
            ItemSet::new(["Artichoke", "Broccoli", "Cherry", "Date", "Eclair", "Fondue"]).unwrap();
        let healthy =
            Hierarchy::join(Hierarchy::leaf(vec![0, 1]).unwrap(), Hierarchy::leaf(vec![2, 3]).unwrap())
                .unwrap();
        let h = Hierarchy::join(healthy, Hierarchy::leaf(vec![4, 5]).unwrap()).unwrap();
        (Arc::new(items), Arc::new(h))
    }

    fn all_rankings(n: usize) -> Vec<Ranking> {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut out = Vec::new();
        loop {
            out.push(Ranking::new(perm.clone()).unwrap());
            if !next_permutation(&mut perm) {
                return out;
            }
        }
    }

    #[test]
    fn uniform_evaluates_to_inverse_factorial() {
        let (items, h) = foods6();
        let m = RiffleModel::uniform(items, h).unwrap();
        for sigma in all_rankings(6).iter().step_by(37) {
            assert!((m.evaluate(sigma).unwrap() - 1.0 / 720.0).abs() < 1e-15);
        }
        assert_eq!(m.parameter_count(), 22);
    }

    #[test]
    fn evaluate_multiplies_node_factors() {
        let (items, h) = foods6();
        let m = RiffleModel::random(items, h, &mut seeded(3), 1.0).unwrap();
        // Artichoke|Eclair|Cherry|Broccoli|Fondue|Date
        let sigma = Ranking::new(vec![0, 4, 2, 1, 5, 3]).unwrap();
        let healthy_sigma = sigma.relative_ranking(&[0, 1, 2, 3]).unwrap();
        let root_tau = sigma
            .interleaving(&crate::rankings::Split::new(vec![0, 1, 2, 3], vec![4, 5]).unwrap())
            .unwrap();
        let healthy_tau = healthy_sigma
            .interleaving(&crate::rankings::Split::new(vec![0, 1], vec![2, 3]).unwrap())
            .unwrap();
        let expected = m.table(0)[root_tau.index().unwrap() as usize]
            * m.table(1)[healthy_tau.index().unwrap() as usize]
            * m.table(2)[sigma.relative_ranking(&[0, 1]).unwrap().index().unwrap() as usize]
            * m.table(3)[sigma.relative_ranking(&[2, 3]).unwrap().index().unwrap() as usize]
            * m.table(4)[sigma.relative_ranking(&[4, 5]).unwrap().index().unwrap() as usize];
        assert!((m.evaluate(&sigma).unwrap() - expected).abs() < 1e-15);
        assert!((m.log_evaluate(&sigma).unwrap() - expected.ln()).abs() < 1e-12);
    }

    #[test]
    fn random_models_normalize_over_all_rankings() {
        let mut rng = seeded(11);
        for n in 1..=7usize {
            let items = Arc::new(ItemSet::numbered(n).unwrap());
            for h in [Hierarchy::flat(n).unwrap(), Hierarchy::chain_n(n).unwrap()] {
                let m = RiffleModel::random(items.clone(), Arc::new(h), &mut rng, 1.0).unwrap();
                let total: f64 = all_rankings(n).iter().map(|s| m.evaluate(s).unwrap()).sum();
                assert!((total - 1.0).abs() < 1e-9, "n={n} total={total}");
            }
        }
    }

    #[test]
    fn random_tables_sum_to_one_and_flatten_with_concentration() {
        let (items, h) = foods6();
        let m = RiffleModel::random(items.clone(), h.clone(), &mut seeded(5), 1.0).unwrap();
        for t in m.tables() {
            assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let flat = RiffleModel::random(items, h, &mut seeded(5), 1e6).unwrap();
        for t in flat.tables() {
            let u = 1.0 / t.len() as f64;
            assert!(t.iter().all(|p| (p - u).abs() < 1e-2));
        }
    }

    #[test]
    fn point_mass_sampling_is_deterministic() {
        let (items, h) = foods6();
        let sigma = Ranking::new(vec![3, 1, 5, 0, 2, 4]).unwrap();
        let m = RiffleModel::point_mass(items, h, &sigma).unwrap();
        assert_eq!(m.evaluate(&sigma).unwrap(), 1.0);
        let mut rng = seeded(1);
        for _ in 0..50 {
            assert_eq!(m.sample(&mut rng), sigma);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let (items, h) = foods6();
        let m = RiffleModel::random(items, h, &mut seeded(9), 1.0).unwrap();
        let draw = |seed| (0..100).map(|_| m.sample(&mut seeded(seed))).collect::<Vec<_>>();
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn uniform_sampler_matches_within_total_variation() {
        let items = Arc::new(ItemSet::numbered(4).unwrap());
        let h = Arc::new(
            Hierarchy::join(Hierarchy::leaf(vec![0, 2]).unwrap(), Hierarchy::leaf(vec![1, 3]).unwrap())
                .unwrap(),
        );
        let m = RiffleModel::uniform(items, h).unwrap();
        let mut rng = seeded(17);
        let mut counts = [0usize; 24];
        let draws = 100_000;
        for _ in 0..draws {
            counts[m.sample(&mut rng).index().unwrap() as usize] += 1;
        }
        let tv: f64 =
            counts.iter().map(|&c| (c as f64 / draws as f64 - 1.0 / 24.0).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn constructor_validation() {
        let (items, h) = foods6();
        let good = RiffleModel::uniform(items.clone(), h.clone()).unwrap();
        let mut tables = good.tables().to_vec();
        tables[2] = vec![0.5, 0.4];
        assert!(RiffleModel::new(items.clone(), h.clone(), tables).is_err());
        let mut tables = good.tables().to_vec();
        tables[2] = vec![1.0];
        assert!(RiffleModel::new(items.clone(), h.clone(), tables).is_err());
        let mut tables = good.tables().to_vec();
        tables[2] = vec![1.5, -0.5];
        assert!(RiffleModel::new(items.clone(), h.clone(), tables).is_err());
        let wrong_items = Arc::new(ItemSet::numbered(5).unwrap());
        assert!(RiffleModel::uniform(wrong_items, h).is_err());
        assert!(RiffleModel::random(items, Arc::new(Hierarchy::flat(6).unwrap()), &mut seeded(0), 0.0)
            .is_err());
    }
}
