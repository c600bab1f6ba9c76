//! Model files.
//!
//! ```text
//! items: veg,fruit,junk
//! NODE A=[veg,fruit] B=[junk] m=[...]
//!   NODE A=[veg] B=[fruit] m=[...]
//!     LEAF items=[veg] table=[1.0000000000000000e0]
//!     LEAF items=[fruit] table=[1.0000000000000000e0]
//!   LEAF items=[junk] table=[1.0000000000000000e0]
//! ```
//!
//! One node per line in preorder, indented two spaces per depth, A child
//! before B child. Split tables are indexed by interleaving index of the
//! node's A/B pattern and leaf tables by the relative ranking index of the
//! leaf's items in catalog order. The `items:` header is optional; without
//! it items are named `0..n-1`. Probabilities carry 17 significant digits,
//! enough to read back the same `f64`.

use std::fmt::Write as _;
use std::sync::Arc;

use riffle_core::{Hierarchy, Interleaving, Item, ItemSet, NodeKind, RiffleModel};

use crate::ballots::{header_line, parse_header};
use crate::error::{CliError, CliResult};

pub fn format_model(model: &RiffleModel) -> String {
    let mut out = String::new();
    out.push_str(&header_line(model.items()));
    out.push('\n');
    let h = model.hierarchy();
    write_node(model, h.root(), 0, &mut out);
    out
}

fn write_node(model: &RiffleModel, id: usize, depth: usize, out: &mut String) {
    let h = model.hierarchy();
    let items = model.items();
    let indent = "  ".repeat(depth);
    let table = format_table(model.table(id));
    match h.node(id).kind() {
        NodeKind::Leaf => {
            let _ = writeln!(out, "{indent}LEAF items={} table={table}", name_list(h.node(id).items(), items));
        }
        NodeKind::Split { a, b } => {
            let _ = writeln!(
                out,
                "{indent}NODE A={} B={} m={table}",
                name_list(h.node(a).items(), items),
                name_list(h.node(b).items(), items)
            );
            write_node(model, a, depth + 1, out);
            write_node(model, b, depth + 1, out);
        }
    }
}

fn name_list(members: &[Item], items: &ItemSet) -> String {
    let names: Vec<&str> = members.iter().map(|&x| items.name(x)).collect();
    format!("[{}]", names.join(","))
}

fn format_table(table: &[f64]) -> String {
    let cells: Vec<String> = table.iter().map(|p| format!("{p:.16e}")).collect();
    format!("[{}]", cells.join(","))
}

/// Parsed node before orientation is checked.
struct RawNode {
    line: usize,
    depth: usize,
    body: RawBody,
    table: Vec<f64>,
}

enum RawBody {
    Leaf { items: Vec<Item> },
    Split { a: Vec<Item>, b: Vec<Item> },
}

pub fn parse_model(text: &str) -> CliResult<RiffleModel> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .collect();
    let Some(&(first_no, first)) = lines.first() else {
        return Err(CliError::Data("model file is empty".into()));
    };
    let (items, body) = if first.trim_start().starts_with("items:") {
        (Some(parse_header(first).map_err(|m| at_line(first_no, m))?), &lines[1..])
    } else {
        (None, &lines[..])
    };

    // Without a header the catalog size is the root's item count; names are indices.
    let items = match items {
        Some(items) => items,
        None => {
            let &(no, root) = body.first().ok_or_else(|| CliError::Data("model file has no nodes".into()))?;
            let n = count_root_items(root).map_err(|m| at_line(no, m))?;
            ItemSet::numbered(n).map_err(|e| at_line(no, e.to_string()))?
        }
    };

    let raw: Vec<RawNode> =
        body.iter().map(|&(no, l)| parse_line(l, &items).map_err(|m| at_line(no, m)).map(|mut r| {
            r.line = no;
            r
        })).collect::<CliResult<_>>()?;
    if raw.is_empty() {
        return Err(CliError::Data("model file has no nodes".into()));
    }
    let mut pos = 0;
    let (h, tables) = build(&raw, &mut pos, 0)?;
    if pos != raw.len() {
        return Err(at_line(raw[pos].line, "node is not part of the tree".into()));
    }
    let items = Arc::new(items);
    if !h.covers(items.len()) {
        return Err(CliError::Data(format!("tree covers {} of the {} catalog items", h.n_items(), items.len())));
    }
    Ok(RiffleModel::new(items, Arc::new(h), tables)?)
}

fn at_line(index: usize, msg: String) -> CliError {
    CliError::Data(format!("line {}: {msg}", index + 1))
}

fn count_root_items(line: &str) -> Result<usize, String> {
    let t = line.trim();
    if let Some(rest) = t.strip_prefix("LEAF ") {
        Ok(split_list(field(rest, "items=")?).len())
    } else if let Some(rest) = t.strip_prefix("NODE ") {
        Ok(split_list(field(rest, "A=")?).len() + split_list(field(rest, "B=")?).len())
    } else {
        Err("expected NODE or LEAF".into())
    }
}

/// Contents of the `[...]` following `key` in `line`.
fn field<'a>(line: &'a str, key: &str) -> Result<&'a str, String> {
    let start = line
        .find(key)
        .map(|i| i + key.len())
        .ok_or_else(|| format!("missing '{key}'"))?;
    let rest = line[start..].strip_prefix('[').ok_or_else(|| format!("expected '[' after '{key}'"))?;
    let end = rest.find(']').ok_or_else(|| format!("unterminated list after '{key}'"))?;
    Ok(&rest[..end])
}

fn split_list(body: &str) -> Vec<&str> {
    if body.trim().is_empty() {
        Vec::new()
    } else {
        body.split(',').map(str::trim).collect()
    }
}

fn resolve(body: &str, items: &ItemSet) -> Result<Vec<Item>, String> {
    split_list(body)
        .into_iter()
        .map(|name| items.index_of(name).ok_or_else(|| format!("unknown item '{name}'")))
        .collect()
}

fn parse_line(line: &str, items: &ItemSet) -> Result<RawNode, String> {
    let trimmed = line.trim_start_matches(' ');
    let indent = line.len() - trimmed.len();
    if !indent.is_multiple_of(2) || trimmed.starts_with('\t') {
        return Err("indentation must be a multiple of two spaces".into());
    }
    let trimmed = trimmed.trim_end();
    let (body, table_key) = if let Some(rest) = trimmed.strip_prefix("LEAF ") {
        let leaf = resolve(field(rest, "items=")?, items)?;
        if leaf.windows(2).any(|w| w[0] >= w[1]) {
            return Err("leaf items must be listed once each, in catalog order".into());
        }
        (RawBody::Leaf { items: leaf }, "table=")
    } else if let Some(rest) = trimmed.strip_prefix("NODE ") {
        let a = resolve(field(rest, "A=")?, items)?;
        let b = resolve(field(rest, "B=")?, items)?;
        (RawBody::Split { a, b }, "m=")
    } else {
        return Err("expected NODE or LEAF".into());
    };
    let table = split_list(field(trimmed, table_key)?)
        .into_iter()
        .map(|cell| cell.parse::<f64>().map_err(|_| format!("bad probability '{cell}'")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RawNode { line: 0, depth: indent / 2, body, table })
}

/// Builds the subtree starting at `raw[*pos]`, which must sit at `depth`.
/// Returns the hierarchy with A/B oriented so that A holds the smallest
/// item, and its tables in preorder.
fn build(raw: &[RawNode], pos: &mut usize, depth: usize) -> CliResult<(Hierarchy, Vec<Vec<f64>>)> {
    let node = raw.get(*pos).ok_or_else(|| CliError::Data("model file ends inside a split".into()))?;
    if node.depth != depth {
        return Err(at_line(node.line, format!("expected indentation depth {depth}, found {}", node.depth)));
    }
    *pos += 1;
    match &node.body {
        RawBody::Leaf { items } => {
            let h = Hierarchy::leaf(items.clone()).map_err(|e| at_line(node.line, e.to_string()))?;
            Ok((h, vec![node.table.clone()]))
        }
        RawBody::Split { a, b } => {
            let (ha, ta) = build(raw, pos, depth + 1)?;
            let (hb, tb) = build(raw, pos, depth + 1)?;
            if !same_set(ha.items(), a) || !same_set(hb.items(), b) {
                return Err(at_line(node.line, "A and B lists do not match the child nodes".into()));
            }
            let (p, q) = (a.len(), b.len());
            let expected = Interleaving::count(p, q).map_err(|e| at_line(node.line, e.to_string()))?;
            if node.table.len() as u64 != expected {
                return Err(at_line(
                    node.line,
                    format!("split table has {} entries, expected {expected}", node.table.len()),
                ));
            }
            let a_first = ha.items()[0] < hb.items()[0];
            let (m, first, rest) = if a_first {
                (node.table.clone(), (ha, ta), (hb, tb))
            } else {
                (swap_table(&node.table, p, q), (hb, tb), (ha, ta))
            };
            let h = Hierarchy::join(first.0, rest.0).map_err(|e| at_line(node.line, e.to_string()))?;
            let mut tables = vec![m];
            tables.extend(first.1);
            tables.extend(rest.1);
            Ok((h, tables))
        }
    }
}

fn same_set(sorted: &[Item], listed: &[Item]) -> bool {
    let mut l = listed.to_vec();
    l.sort_unstable();
    l == sorted
}

/// Re-indexes an interleaving table from (A,B) = (p items, q items) to the
/// swapped orientation.
fn swap_table(table: &[f64], p: usize, q: usize) -> Vec<f64> {
    let mut out = vec![0.0; table.len()];
    for (idx, &v) in table.iter().enumerate() {
        let tau = Interleaving::from_index(idx as u64, p, q).expect("index below count");
        out[tau.swapped().index().expect("valid interleaving") as usize] = v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use riffle_core::rng::seeded;

    fn random_model(n: usize, seed: u64) -> RiffleModel {
        let h = Hierarchy::parse("(([0,1] [2,3]) [4,5])", &ItemSet::numbered(n).unwrap()).unwrap();
        let items = Arc::new(ItemSet::new(["a", "b", "c", "d", "e", "f"]).unwrap());
        RiffleModel::random(items, Arc::new(h), &mut seeded(seed), 1.0).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for seed in 0..5 {
            let m = random_model(6, seed);
            let text = format_model(&m);
            let back = parse_model(&text).unwrap();
            assert_eq!(back.hierarchy(), m.hierarchy());
            for (x, y) in back.tables().iter().zip(m.tables()) {
                let xb: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
                let yb: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
                assert_eq!(xb, yb);
            }
            assert_eq!(format_model(&back), text);
        }
    }

    #[test]
    fn hand_written_leaf_loads() {
        let m = parse_model("LEAF items=[0,1] table=[0.5,0.5]\n").unwrap();
        assert_eq!(m.n_items(), 2);
        assert_eq!(m.table(0), &[0.5, 0.5]);
        let m = parse_model("items: x,y\nLEAF items=[x,y] table=[0.5,0.5]\n").unwrap();
        assert_eq!(m.items().name(1), "y");
    }

    #[test]
    fn unnormalized_table_is_rejected() {
        let err = parse_model("LEAF items=[0,1] table=[0.5,0.4]\n").unwrap_err();
        assert!(matches!(err, CliError::Data(_)), "{err}");
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(parse_model("LEAF items=[0,1] table=[1.0]\n").is_err());
        let text = "NODE A=[0] B=[1] m=[0.5,0.25,0.25]\n  LEAF items=[0] table=[1]\n  LEAF items=[1] table=[1]\n";
        assert!(parse_model(text).unwrap_err().to_string().contains("expected 2"));
    }

    #[test]
    fn structural_errors() {
        // bad indentation
        assert!(parse_model("NODE A=[0] B=[1] m=[0.5,0.5]\nLEAF items=[0] table=[1]\nLEAF items=[1] table=[1]\n").is_err());
        // missing child
        assert!(parse_model("NODE A=[0] B=[1] m=[0.5,0.5]\n  LEAF items=[0] table=[1]\n").is_err());
        // A list disagrees with child
        assert!(parse_model("NODE A=[1] B=[0] m=[0.5,0.5]\n  LEAF items=[0] table=[1]\n  LEAF items=[1] table=[1]\n").is_err());
        assert!(parse_model("").is_err());
    }

    #[test]
    fn b_side_first_is_reoriented() {
        // A = {1,2}, B = {0}; m over interleavings of 2 A's and 1 B
        // AAB=0, ABA=1, BAA=2
        let text = "NODE A=[1,2] B=[0] m=[0.5,0.3,0.2]\n  \
                    LEAF items=[1,2] table=[0.9,0.1]\n  \
                    LEAF items=[0] table=[1]\n";
        let m = parse_model(text).unwrap();
        let h = m.hierarchy();
        let NodeKind::Split { a, b } = h.node(0).kind() else { panic!() };
        assert_eq!(h.node(a).items(), &[0]);
        assert_eq!(h.node(b).items(), &[1, 2]);
        // swapped: BBA, BAB, ABB carry 0.5, 0.3, 0.2
        for (pattern, p) in [("BBA", 0.5), ("BAB", 0.3), ("ABB", 0.2)] {
            let idx = Interleaving::parse(pattern).unwrap().index().unwrap() as usize;
            assert_eq!(m.table(0)[idx], p);
        }
        assert_eq!(m.table(b), &[0.9, 0.1]);
    }
}
