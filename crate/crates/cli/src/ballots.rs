//! Ballot files.
//!
//! ```text
//! # comment
//! items: Artichoke,Broccoli,Cherry,Date
//! 3x Artichoke>Broccoli
//! Artichoke,Cherry>Broccoli,Date
//! ```
//!
//! The first non-comment line names the catalog. Each later line is one
//! record: an optional `<count>x ` prefix, then blocks separated by `>`,
//! each block a comma-separated list of names. Items a record leaves out
//! form one implicit final block, so `A>B` over four items is a top-2
//! ballot.

use std::fmt::Write as _;
use std::sync::Arc;

use riffle_core::learning::RankingDataset;
use riffle_core::{Item, ItemSet, PartialRanking, Ranking};

use crate::error::{CliError, CliResult};

const RESERVED: &[char] = &[',', '>', '#', '[', ']', '(', ')', '='];

/// Parses a whole ballot file.
pub fn parse_ballots(text: &str) -> CliResult<RankingDataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !is_blank_or_comment(l));
    let Some((header_no, header)) = lines.next() else {
        return Err(CliError::Data("ballot file has no 'items:' header".into()));
    };
    let items = Arc::new(parse_header(header).map_err(|m| at_line(header_no, m))?);
    let mut data = RankingDataset::empty(items.clone());
    for (no, line) in lines {
        let (count, pr) = parse_record(line, &items).map_err(|m| at_line(no, m))?;
        data.push(pr, count).map_err(|e| at_line(no, e.to_string()))?;
    }
    Ok(data)
}

fn at_line(index: usize, msg: String) -> CliError {
    CliError::Data(format!("line {}: {msg}", index + 1))
}

fn is_blank_or_comment(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

/// `items: a,b,c`.
pub fn parse_header(line: &str) -> Result<ItemSet, String> {
    let rest = line
        .trim()
        .strip_prefix("items:")
        .ok_or_else(|| "expected 'items: name,name,...' header".to_string())?;
    let names: Vec<&str> = rest.split(',').map(str::trim).collect();
    for name in &names {
        if name.is_empty() {
            return Err("empty item name in header".into());
        }
        if name.contains(RESERVED) {
            return Err(format!("item name '{name}' contains a reserved character"));
        }
    }
    ItemSet::new(names).map_err(|e| e.to_string())
}

pub fn header_line(items: &ItemSet) -> String {
    format!("items: {}", items.names().join(","))
}

/// One record: `[<count>x ]block(>block)*`.
pub fn parse_record(line: &str, items: &ItemSet) -> Result<(u64, PartialRanking), String> {
    let line = line.trim();
    let (count, body) = split_count(line)?;
    let mut seen = vec![false; items.len()];
    let mut blocks: Vec<Vec<Item>> = Vec::new();
    for block in body.split('>') {
        let mut members = Vec::new();
        for name in block.split(',') {
            let name = name.trim();
            if name.is_empty() {
                return Err("empty block or item name".into());
            }
            let item = items.index_of(name).ok_or_else(|| format!("unknown item '{name}'"))?;
            if std::mem::replace(&mut seen[item], true) {
                return Err(format!("item '{name}' listed twice"));
            }
            members.push(item);
        }
        blocks.push(members);
    }
    let rest: Vec<Item> = (0..items.len()).filter(|&x| !seen[x]).collect();
    if !rest.is_empty() {
        blocks.push(rest);
    }
    let pr = PartialRanking::new(blocks).map_err(|e| e.to_string())?;
    Ok((count, pr))
}

fn split_count(line: &str) -> Result<(u64, &str), String> {
    if let Some((first, rest)) = line.split_once(char::is_whitespace) {
        if let Some(digits) = first.strip_suffix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let count: u64 = digits.parse().map_err(|_| format!("count '{digits}' is too large"))?;
                if count < 1 {
                    return Err("count must be at least 1".into());
                }
                return Ok((count, rest.trim()));
            }
        }
    }
    Ok((1, line))
}

/// An observation string on the command line: one record without a count.
pub fn parse_observation(text: &str, items: &ItemSet) -> CliResult<PartialRanking> {
    match parse_record(text, items) {
        Ok((1, pr)) if split_count(text.trim()).map(|(_, b)| b.len()) == Ok(text.trim().len()) => Ok(pr),
        Ok(_) => Err(CliError::Data("an observation takes no count prefix".into())),
        Err(m) => Err(CliError::Data(format!("observation: {m}"))),
    }
}

/// `a>b>c` for a full ranking.
pub fn ranking_line(sigma: &Ranking, items: &ItemSet) -> String {
    let names: Vec<&str> = sigma.items().iter().map(|&x| items.name(x)).collect();
    names.join(">")
}

/// Record line for a partial ranking, omitting a trailing block that the
/// implicit-final-block rule restores.
pub fn record_line(count: u64, pr: &PartialRanking, items: &ItemSet) -> String {
    let mut out = String::new();
    if count != 1 {
        let _ = write!(out, "{count}x ");
    }
    let blocks = pr.blocks();
    let shown = if blocks.len() > 1 { &blocks[..blocks.len() - 1] } else { blocks };
    let parts: Vec<String> =
        shown.iter().map(|b| b.iter().map(|&x| items.name(x)).collect::<Vec<_>>().join(",")).collect();
    out.push_str(&parts.join(">"));
    out
}
