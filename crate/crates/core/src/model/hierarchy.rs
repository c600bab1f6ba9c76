//! Binary hierarchies of riffle-independent splits.

use std::fmt;

use crate::combinatorics::{binomial, factorial, MAX_FACTORIAL};
use crate::error::{domain, Error, Result};
use crate::rankings::{Item, ItemSet};

/// Position of a node in a [`Hierarchy`]'s preorder node list.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Leaf,
    /// Children holding side A (the side with the smallest item) and side B.
    Split { a: NodeId, b: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HierarchyNode {
    items: Vec<Item>,
    kind: NodeKind,
}

impl HierarchyNode {
    /// Items under this node, ascending.
    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }
}

/// A binary tree over an item set. Internal nodes split their items into
/// two nonempty sides; leaves hold the sets whose relative rankings are
/// modelled directly.
///
/// Nodes are stored in preorder with the root at index 0, and every split
/// is oriented so that side A contains the smallest item of the node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hierarchy {
    nodes: Vec<HierarchyNode>,
}

impl Hierarchy {
    pub fn leaf(mut items: Vec<Item>) -> Result<Self> {
        items.sort_unstable();
        if items.is_empty() {
            return domain("a leaf needs at least one item");
        }
        if items.windows(2).any(|w| w[0] == w[1]) {
            return domain("leaf items must be distinct");
        }
        Ok(Hierarchy { nodes: vec![HierarchyNode { items, kind: NodeKind::Leaf }] })
    }

    /// A split node over two disjoint sub-hierarchies, in either order.
    pub fn join(first: Hierarchy, second: Hierarchy) -> Result<Self> {
        let (a, b) = if first.items()[0] < second.items()[0] {
            (first, second)
        } else {
            (second, first)
        };
        let mut items: Vec<Item> = a.items().iter().chain(b.items()).copied().collect();
        items.sort_unstable();
        if items.windows(2).any(|w| w[0] == w[1]) {
            return domain("the two sides of a split must be disjoint");
        }
        let a_len = a.nodes.len();
        let mut nodes = Vec::with_capacity(1 + a_len + b.nodes.len());
        nodes.push(HierarchyNode { items, kind: NodeKind::Split { a: 1, b: 1 + a_len } });
        for (offset, sub) in [(1, a), (1 + a_len, b)] {
            nodes.extend(sub.nodes.into_iter().map(|mut node| {
                if let NodeKind::Split { a, b } = &mut node.kind {
                    *a += offset;
                    *b += offset;
                }
                node
            }));
        }
        Ok(Hierarchy { nodes })
    }

    /// Single leaf over items `0..n`.
    pub fn flat(n: usize) -> Result<Self> {
        Self::leaf((0..n).collect())
    }

    /// Peels one item off per level, in the given order; the last item is a leaf.
    pub fn chain(order: &[Item]) -> Result<Self> {
        let (&last, rest) = order.split_last().ok_or_else(|| {
            Error::Domain("a chain needs at least one item".into())
        })?;
        let mut h = Hierarchy::leaf(vec![last])?;
        for &x in rest.iter().rev() {
            h = Hierarchy::join(Hierarchy::leaf(vec![x])?, h)?;
        }
        Ok(h)
    }

    /// Chain over `0..n` in index order.
    pub fn chain_n(n: usize) -> Result<Self> {
        Self::chain(&(0..n).collect::<Vec<_>>())
    }

    /// Items covered by the root, ascending.
    pub fn items(&self) -> &[Item] {
        &self.nodes[0].items
    }

    pub fn n_items(&self) -> usize {
        self.nodes[0].items.len()
    }

    /// True when the root covers exactly `0..n`.
    pub fn covers(&self, n: usize) -> bool {
        let items = self.items();
        items.len() == n && items.iter().enumerate().all(|(i, &x)| i == x)
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &HierarchyNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The sub-hierarchy rooted at `id`.
    pub fn subtree(&self, id: NodeId) -> Hierarchy {
        match self.nodes[id].kind {
            NodeKind::Leaf => Hierarchy { nodes: vec![self.nodes[id].clone()] },
            NodeKind::Split { a, b } => {
                Hierarchy::join(self.subtree(a), self.subtree(b)).expect("valid subtree")
            }
        }
    }

    /// Leaf item sets in preorder.
    pub fn leaf_sets(&self) -> Vec<Vec<Item>> {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.items.clone()).collect()
    }

    /// Leaf sets sorted, for comparing partitions regardless of tree shape.
    pub fn leaf_partition(&self) -> Vec<Vec<Item>> {
        let mut sets = self.leaf_sets();
        sets.sort();
        sets
    }

    /// Table length at a node: `C(|A|+|B|, |A|)` for splits, `|L|!` for leaves.
    pub fn table_size(&self, id: NodeId) -> Result<u64> {
        let node = &self.nodes[id];
        match node.kind {
            NodeKind::Leaf => factorial(node.items.len()),
            NodeKind::Split { a, .. } => {
                binomial(node.items.len(), self.nodes[a].items.len())
            }
        }
    }

    pub fn max_table_size(&self) -> Result<u64> {
        (0..self.len()).map(|id| self.table_size(id)).try_fold(0, |m, s| Ok(m.max(s?)))
    }

    /// Fails when some table would exceed `cap` entries.
    pub fn check_capacity(&self, cap: u64) -> Result<()> {
        for (id, node) in self.nodes.iter().enumerate() {
            if node.is_leaf() && node.items.len() > MAX_FACTORIAL {
                return Err(Error::Capacity(format!(
                    "leaf with {} items is too large to tabulate",
                    node.items.len()
                )));
            }
            let size = self.table_size(id)?;
            if size > cap {
                return Err(Error::Capacity(format!(
                    "node {id} needs a table of {size} entries (limit {cap})"
                )));
            }
        }
        Ok(())
    }

    /// Free parameters: every table's size minus one for normalization.
    pub fn parameter_count(&self) -> Result<u64> {
        (0..self.len()).map(|id| self.table_size(id)).try_fold(0, |acc, s| Ok(acc + s? - 1))
    }

    /// Canonical text form over item indices, e.g. `(([0,1] [2,3]) [4,5])`.
    ///
    /// Two hierarchies are equal exactly when their fingerprints are.
    pub fn fingerprint(&self) -> String {
        let mut out = String::new();
        self.write_node(0, &mut out, &|x| x.to_string());
        out
    }

    /// Same layout as [`Hierarchy::fingerprint`] with item names.
    pub fn display<'a>(&'a self, items: &'a ItemSet) -> impl fmt::Display + 'a {
        DisplayHierarchy { h: self, items }
    }

    fn write_node(&self, id: NodeId, out: &mut String, name: &dyn Fn(Item) -> String) {
        let node = &self.nodes[id];
        match node.kind {
            NodeKind::Leaf => {
                out.push('[');
                for (i, &x) in node.items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&name(x));
                }
                out.push(']');
            }
            NodeKind::Split { a, b } => {
                out.push('(');
                self.write_node(a, out, name);
                out.push(' ');
                self.write_node(b, out, name);
                out.push(')');
            }
        }
    }

    /// Parses the bracket form produced by [`Hierarchy::display`]:
    /// `[x,y,...]` is a leaf and `(H H)` a split. Names are resolved
    /// against `items`; bare indices are accepted when no name matches.
    pub fn parse(text: &str, items: &ItemSet) -> Result<Self> {
        let mut parser = BracketParser { s: text.as_bytes(), pos: 0, items };
        let h = parser.hierarchy()?;
        parser.skip_ws();
        if parser.pos != parser.s.len() {
            return domain(format!("trailing input at byte {} of hierarchy", parser.pos));
        }
        Ok(h)
    }
}

impl fmt::Display for Hierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fingerprint())
    }
}

struct DisplayHierarchy<'a> {
    h: &'a Hierarchy,
    items: &'a ItemSet,
}

impl fmt::Display for DisplayHierarchy<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.h.write_node(0, &mut out, &|x| self.items.name(x).to_string());
        f.write_str(&out)
    }
}

struct BracketParser<'a> {
    s: &'a [u8],
    pos: usize,
    items: &'a ItemSet,
}

impl BracketParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn hierarchy(&mut self) -> Result<Hierarchy> {
        self.skip_ws();
        match self.s.get(self.pos) {
            Some(b'(') => {
                self.pos += 1;
                let first = self.hierarchy()?;
                let second = self.hierarchy()?;
                self.skip_ws();
                if self.s.get(self.pos) != Some(&b')') {
                    return domain(format!("expected ')' at byte {}", self.pos));
                }
                self.pos += 1;
                Hierarchy::join(first, second)
            }
            Some(b'[') => {
                self.pos += 1;
                let close = self.s[self.pos..]
                    .iter()
                    .position(|&c| c == b']')
                    .ok_or_else(|| Error::Domain("unterminated leaf '['".into()))?;
                let body = std::str::from_utf8(&self.s[self.pos..self.pos + close])
                    .map_err(|_| Error::Domain("hierarchy is not valid UTF-8".into()))?;
                self.pos += close + 1;
                let leaf = body
                    .split(',')
                    .map(|name| {
                        let name = name.trim();
                        self.items
                            .index_of(name)
                            .or_else(|| name.parse::<usize>().ok().filter(|&i| i < self.items.len()))
                            .ok_or_else(|| Error::Domain(format!("unknown item '{name}' in hierarchy")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Hierarchy::leaf(leaf)
            }
            _ => domain(format!("expected '(' or '[' at byte {}", self.pos)),
        }
    }
}
