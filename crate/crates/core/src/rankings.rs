//! Rankings, partial rankings and interleavings, plus the maps between them.
//!
//! Items are identified by their construction-order index in an [`ItemSet`];
//! names only matter at the I/O boundary.

use std::collections::HashMap;
use std::fmt;

use crate::combinatorics::{
    binary_string_decode, binary_string_index, binomial, factorial, lehmer_decode, lehmer_index,
};
use crate::error::{domain, Error, Result};

/// Index of an item in its [`ItemSet`].
pub type Item = usize;

/// An ordered catalog of distinct item names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemSet {
    names: Vec<String>,
    lookup: HashMap<String, Item>,
}

impl ItemSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return domain("item set must contain at least one item");
        }
        let mut lookup = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return domain("item names must be nonempty");
            }
            if lookup.insert(name.clone(), i).is_some() {
                return domain(format!("duplicate item '{name}'"));
            }
        }
        Ok(ItemSet { names, lookup })
    }

    /// Items named `0`, `1`, ..., `n-1`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, item: Item) -> &str {
        &self.names[item]
    }

    pub fn index_of(&self, name: &str) -> Option<Item> {
        self.lookup.get(name).copied()
    }

    pub fn all(&self) -> Vec<Item> {
        (0..self.len()).collect()
    }
}

/// Checks that `subset` is nonempty, strictly ascending, and inside `0..n`
/// when `n` is given.
fn check_subset(subset: &[Item]) -> Result<()> {
    if subset.is_empty() {
        return domain("subset must be nonempty");
    }
    if subset.windows(2).any(|w| w[0] >= w[1]) {
        return domain("subset must be sorted without duplicates");
    }
    Ok(())
}

/// A total order over a set of items, stored as the item at each rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking {
    order: Vec<Item>,
}

impl Ranking {
    pub fn new(order: Vec<Item>) -> Result<Self> {
        if order.is_empty() {
            return domain("a ranking needs at least one item");
        }
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return domain("a ranking cannot repeat items");
        }
        Ok(Ranking { order })
    }

    pub(crate) fn from_vec_unchecked(order: Vec<Item>) -> Self {
        Ranking { order }
    }

    pub fn identity(n: usize) -> Self {
        Ranking { order: (0..n).collect() }
    }

    /// Item at each rank, best first.
    pub fn items(&self) -> &[Item] {
        &self.order
    }

    pub fn into_items(self) -> Vec<Item> {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Zero-based rank of `item`, if ranked.
    pub fn rank_of(&self, item: Item) -> Option<usize> {
        self.order.iter().position(|&x| x == item)
    }

    /// Ranked items in ascending index order.
    pub fn item_set(&self) -> Vec<Item> {
        let mut s = self.order.clone();
        s.sort_unstable();
        s
    }

    /// True when the ranking covers exactly `0..n`.
    pub fn is_full(&self, n: usize) -> bool {
        self.order.len() == n && self.order.iter().all(|&x| x < n)
    }

    /// Rank of every item `0..n` (the inverse permutation).
    pub fn positions(&self, n: usize) -> Result<Vec<usize>> {
        if !self.is_full(n) {
            return domain(format!("ranking does not cover items 0..{n}"));
        }
        let mut pos = vec![0; n];
        for (r, &x) in self.order.iter().enumerate() {
            pos[x] = r;
        }
        Ok(pos)
    }

    /// The order this ranking induces on `subset` (sorted item indices).
    pub fn relative_ranking(&self, subset: &[Item]) -> Result<Ranking> {
        check_subset(subset)?;
        let order: Vec<Item> = self
            .order
            .iter()
            .copied()
            .filter(|x| subset.binary_search(x).is_ok())
            .collect();
        if order.len() != subset.len() {
            return domain("subset contains items the ranking does not rank");
        }
        Ok(Ranking { order })
    }

    /// Which side of `split` occupies each rank.
    pub fn interleaving(&self, split: &Split) -> Result<Interleaving> {
        if self.item_set() != split.union() {
            return domain("split does not partition the ranked items");
        }
        let sides = self
            .order
            .iter()
            .map(|x| if split.a.binary_search(x).is_ok() { Side::A } else { Side::B })
            .collect();
        Ok(Interleaving { sides })
    }

    /// Builds the unique ranking with interleaving `tau` whose relative
    /// rankings on the two sides are `on_a` and `on_b`.
    pub fn compose(tau: &Interleaving, on_a: &Ranking, on_b: &Ranking) -> Result<Ranking> {
        let (p, q) = tau.counts();
        if p != on_a.len() || q != on_b.len() {
            return domain(format!(
                "interleaving has counts ({p}, {q}) but side rankings have lengths ({}, {})",
                on_a.len(),
                on_b.len()
            ));
        }
        let mut a = on_a.order.iter();
        let mut b = on_b.order.iter();
        let order = tau
            .sides
            .iter()
            .map(|s| match s {
                Side::A => *a.next().unwrap(),
                Side::B => *b.next().unwrap(),
            })
            .collect();
        Ranking::new(order)
    }

    /// Lexicographic (Lehmer code) index among all orderings of the same items.
    pub fn index(&self) -> Result<u64> {
        lehmer_index(&self.order)
    }

    /// Ranking of `items` (ascending) with the given Lehmer index.
    pub fn from_index(index: u64, items: &[Item]) -> Result<Ranking> {
        check_subset(items)?;
        Ok(Ranking { order: lehmer_decode(index, items)? })
    }

    /// Ranking of `0..n` with the given Lehmer index.
    pub fn from_index_full(index: u64, n: usize) -> Result<Ranking> {
        if n == 0 {
            return domain("n must be positive");
        }
        Ok(Ranking { order: lehmer_decode(index, &(0..n).collect::<Vec<_>>())? })
    }

    /// Vertical-bar notation with item names, e.g. `Artichoke|Date|Broccoli|Cherry`.
    pub fn display<'a>(&'a self, items: &'a ItemSet) -> impl fmt::Display + 'a {
        DisplayRanking { ranking: self, items }
    }
}

struct DisplayRanking<'a> {
    ranking: &'a Ranking,
    items: &'a ItemSet,
}

impl fmt::Display for DisplayRanking<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &x) in self.ranking.order.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            f.write_str(self.items.name(x))?;
        }
        Ok(())
    }
}

/// Side of a binary split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    A,
    B,
}

/// A partition of an item set into two nonempty sides.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Split {
    a: Vec<Item>,
    b: Vec<Item>,
}

impl Split {
    pub fn new(mut a: Vec<Item>, mut b: Vec<Item>) -> Result<Self> {
        a.sort_unstable();
        b.sort_unstable();
        if a.is_empty() || b.is_empty() {
            return domain("both sides of a split must be nonempty");
        }
        check_subset(&a)?;
        check_subset(&b)?;
        if a.iter().any(|x| b.binary_search(x).is_ok()) {
            return domain("split sides overlap");
        }
        Ok(Split { a, b })
    }

    pub fn a(&self) -> &[Item] {
        &self.a
    }

    pub fn b(&self) -> &[Item] {
        &self.b
    }

    pub fn union(&self) -> Vec<Item> {
        let mut u: Vec<Item> = self.a.iter().chain(&self.b).copied().collect();
        u.sort_unstable();
        u
    }

    /// The same split oriented so that side A holds the smallest item.
    pub fn canonical(self) -> Self {
        if self.a[0] < self.b[0] {
            self
        } else {
            Split { a: self.b, b: self.a }
        }
    }

    pub fn side_of(&self, item: Item) -> Option<Side> {
        if self.a.binary_search(&item).is_ok() {
            Some(Side::A)
        } else if self.b.binary_search(&item).is_ok() {
            Some(Side::B)
        } else {
            None
        }
    }
}

/// Which side occupies each rank of a ranking of `A ∪ B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interleaving {
    sides: Vec<Side>,
}

impl Interleaving {
    pub fn new(sides: Vec<Side>) -> Result<Self> {
        if sides.is_empty() {
            return domain("empty interleaving");
        }
        Ok(Interleaving { sides })
    }

    /// Parses `A|B|A|B` (bars optional).
    pub fn parse(s: &str) -> Result<Self> {
        let sides = s
            .chars()
            .filter(|c| *c != '|' && !c.is_whitespace())
            .map(|c| match c {
                'A' | 'a' => Ok(Side::A),
                'B' | 'b' => Ok(Side::B),
                other => domain(format!("unexpected interleaving symbol '{other}'")),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sides)
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn len(&self) -> usize {
        self.sides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sides.is_empty()
    }

    /// `(p, q)`: number of A and B symbols.
    pub fn counts(&self) -> (usize, usize) {
        let p = self.sides.iter().filter(|s| **s == Side::A).count();
        (p, self.sides.len() - p)
    }

    /// Index in `0..C(p+q, p)`, lexicographic with A < B.
    pub fn index(&self) -> Result<u64> {
        let bits: Vec<bool> = self.sides.iter().map(|s| *s == Side::B).collect();
        binary_string_index(&bits)
    }

    pub fn from_index(index: u64, p: usize, q: usize) -> Result<Self> {
        if p + q == 0 {
            return domain("interleaving needs at least one position");
        }
        let bits = binary_string_decode(index, p, q)?;
        Ok(Interleaving {
            sides: bits.into_iter().map(|b| if b { Side::B } else { Side::A }).collect(),
        })
    }

    /// Number of interleavings with counts `(p, q)`.
    pub fn count(p: usize, q: usize) -> Result<u64> {
        binomial(p + q, p)
    }

    /// Same pattern with the roles of A and B exchanged.
    pub fn swapped(&self) -> Self {
        Interleaving {
            sides: self
                .sides
                .iter()
                .map(|s| match s {
                    Side::A => Side::B,
                    Side::B => Side::A,
                })
                .collect(),
        }
    }
}

impl fmt::Display for Interleaving {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sides.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            f.write_str(match s {
                Side::A => "A",
                Side::B => "B",
            })?;
        }
        Ok(())
    }
}

/// An ordered partition `Ω₁|…|Ω_k`: items of earlier blocks rank before
/// items of later blocks, and order within a block is unconstrained.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialRanking {
    blocks: Vec<Vec<Item>>,
}

impl PartialRanking {
    pub fn new(blocks: Vec<Vec<Item>>) -> Result<Self> {
        if blocks.is_empty() {
            return domain("a partial ranking needs at least one block");
        }
        let mut blocks = blocks;
        let mut seen: Vec<Item> = Vec::new();
        for block in &mut blocks {
            if block.is_empty() {
                return domain("partial ranking blocks must be nonempty");
            }
            block.sort_unstable();
            seen.extend_from_slice(block);
        }
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return domain("partial ranking blocks must be disjoint");
        }
        Ok(PartialRanking { blocks })
    }

    /// The single-block observation over `items`.
    pub fn trivial(items: &[Item]) -> Result<Self> {
        Self::new(vec![items.to_vec()])
    }

    /// Every item in its own block.
    pub fn full(ranking: &Ranking) -> Self {
        PartialRanking { blocks: ranking.items().iter().map(|&x| vec![x]).collect() }
    }

    /// Top-`k` censoring of a ranking: its first `k` items singly, then the rest tied.
    pub fn top_k(ranking: &Ranking, k: usize) -> Self {
        let items = ranking.items();
        let k = k.min(items.len());
        let mut blocks: Vec<Vec<Item>> = items[..k].iter().map(|&x| vec![x]).collect();
        if k < items.len() {
            let mut rest = items[k..].to_vec();
            rest.sort_unstable();
            blocks.push(rest);
        }
        PartialRanking { blocks }
    }

    pub fn blocks(&self) -> &[Vec<Item>] {
        &self.blocks
    }

    /// The type γ: block sizes in order.
    pub fn gamma(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// All items, ascending.
    pub fn items(&self) -> Vec<Item> {
        let mut all: Vec<Item> = self.blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }

    pub fn is_trivial(&self) -> bool {
        self.blocks.len() == 1
    }

    /// The unique member ranking when every block is a singleton.
    pub fn as_ranking(&self) -> Option<Ranking> {
        self.is_full()
            .then(|| Ranking::from_vec_unchecked(self.blocks.iter().map(|b| b[0]).collect()))
    }

    /// Number of member rankings, `∏ γᵢ!`.
    pub fn member_count(&self) -> Result<u64> {
        self.blocks.iter().try_fold(1u64, |acc, b| {
            let f = factorial(b.len())?;
            acc.checked_mul(f)
                .ok_or_else(|| Error::Capacity("member count does not fit in 64 bits".into()))
        })
    }

    /// Block index of every item in `0..n`; `usize::MAX` for items not covered.
    pub fn block_of(&self, n: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; n];
        for (i, block) in self.blocks.iter().enumerate() {
            for &x in block {
                if x < n {
                    out[x] = i;
                }
            }
        }
        out
    }

    /// Whether `sigma` ranks every item of an earlier block before every item of a later one.
    pub fn contains(&self, sigma: &Ranking) -> Result<bool> {
        if sigma.item_set() != self.items() {
            return domain("partial ranking and ranking are over different item sets");
        }
        let mut block_of: HashMap<Item, usize> = HashMap::with_capacity(sigma.len());
        for (i, block) in self.blocks.iter().enumerate() {
            for &x in block {
                block_of.insert(x, i);
            }
        }
        Ok(sigma.items().windows(2).all(|w| block_of[&w[0]] <= block_of[&w[1]]))
    }

    /// Intersects each block with `subset`, dropping blocks that become empty.
    pub fn restrict(&self, subset: &[Item]) -> Result<PartialRanking> {
        check_subset(subset)?;
        let blocks: Vec<Vec<Item>> = self
            .blocks
            .iter()
            .map(|b| b.iter().copied().filter(|x| subset.binary_search(x).is_ok()).collect())
            .filter(|b: &Vec<Item>| !b.is_empty())
            .collect();
        if blocks.is_empty() {
            return domain("subset shares no items with the partial ranking");
        }
        Ok(PartialRanking { blocks })
    }

    /// Whether `tau` puts, in each block's rank range, exactly as many A and
    /// B symbols as the block has items on each side of `split`.
    pub fn is_consistent_interleaving(&self, tau: &Interleaving, split: &Split) -> Result<bool> {
        if tau.counts() != (split.a.len(), split.b.len()) {
            return domain("interleaving counts do not match the split");
        }
        if self.items() != split.union() {
            return domain("split does not partition the partial ranking's items");
        }
        let mut start = 0;
        for block in &self.blocks {
            let want_a = block.iter().filter(|x| split.a.binary_search(x).is_ok()).count();
            let end = start + block.len();
            let got_a = tau.sides[start..end].iter().filter(|s| **s == Side::A).count();
            if got_a != want_a {
                return Ok(false);
            }
            start = end;
        }
        Ok(true)
    }

    /// Ballot notation with item names, e.g. `Artichoke,Cherry>Broccoli,Date`.
    pub fn display<'a>(&'a self, items: &'a ItemSet) -> impl fmt::Display + 'a {
        DisplayPartial { pr: self, items }
    }
}

struct DisplayPartial<'a> {
    pr: &'a PartialRanking,
    items: &'a ItemSet,
}

impl fmt::Display for DisplayPartial<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, block) in self.pr.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str(">")?;
            }
            for (j, &x) in block.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                f.write_str(self.items.name(x))?;
            }
        }
        Ok(())
    }
}
