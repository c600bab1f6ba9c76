use std::sync::Arc;

use crate::error::{domain, Result};
use crate::rankings::{ItemSet, PartialRanking, Ranking};

/// One observed partial ranking and how many times it occurred.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub ranking: PartialRanking,
    pub count: u64,
}

/// Partially ranked observations over a shared item set.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingDataset {
    items: Arc<ItemSet>,
    records: Vec<Record>,
}

impl RankingDataset {
    pub fn new(items: Arc<ItemSet>, records: Vec<Record>) -> Result<Self> {
        let mut data = RankingDataset { items, records: Vec::with_capacity(records.len()) };
        for r in records {
            data.push(r.ranking, r.count)?;
        }
        Ok(data)
    }

    pub fn empty(items: Arc<ItemSet>) -> Self {
        RankingDataset { items, records: Vec::new() }
    }

    /// Each ranking as a full-ranking record of multiplicity one.
    pub fn from_rankings(items: Arc<ItemSet>, rankings: impl IntoIterator<Item = Ranking>) -> Result<Self> {
        let mut data = Self::empty(items);
        for r in rankings {
            data.push(PartialRanking::full(&r), 1)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, ranking: PartialRanking, count: u64) -> Result<()> {
        let n = self.items.len();
        if count == 0 {
            return domain("record multiplicity must be at least 1");
        }
        if ranking.len() != n || ranking.items().iter().enumerate().any(|(i, &x)| i != x) {
            return domain(format!("record does not cover the {n} catalog items"));
        }
        self.records.push(Record { ranking, count });
        Ok(())
    }

    pub fn items(&self) -> &Arc<ItemSet> {
        &self.items
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sum of multiplicities.
    pub fn total_count(&self) -> u64 {
        self.records.iter().map(|r| r.count).sum()
    }

    pub fn all_full(&self) -> bool {
        self.records.iter().all(|r| r.ranking.is_full())
    }

    /// Only the full-ranking records.
    pub fn full_only(&self) -> RankingDataset {
        RankingDataset {
            items: self.items.clone(),
            records: self.records.iter().filter(|r| r.ranking.is_full()).cloned().collect(),
        }
    }

    /// Records of this dataset followed by those of `other`.
    pub fn concat(&self, other: &RankingDataset) -> Result<RankingDataset> {
        if self.items != other.items {
            return domain("datasets are over different item sets");
        }
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Ok(RankingDataset { items: self.items.clone(), records })
    }

    /// The first `count` records.
    pub fn prefix(&self, count: usize) -> RankingDataset {
        RankingDataset {
            items: self.items.clone(),
            records: self.records[..count.min(self.records.len())].to_vec(),
        }
    }
}
