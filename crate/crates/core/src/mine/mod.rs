//! Frequent itemset mining (FP-Growth, Apriori, brute-force oracle) and
//! class-consequent association rule generation.

mod apriori;
mod brute;
mod fptree;
mod rules;

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use apriori::{apriori, apriori_tracked};
pub use brute::{brute_force_frequent, MAX_BRUTE_FORCE_ITEMS};
pub use fptree::{build_fptree, fpgrowth, fpgrowth_tracked, FpNode, FpTree, HeaderEntry};
pub use rules::{generate_rules, AssociationRule, RuleRecord, RulesFile, RULES_SCHEMA};

use crate::error::{Error, Result};
pub use crate::fuzzify::ItemId;

/// A transaction database of item sets.
///
/// Every transaction is stored sorted and free of duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Database {
    transactions: Vec<Vec<ItemId>>,
}

impl Database {
    pub fn new<I, T>(transactions: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = ItemId>,
    {
        let transactions = transactions
            .into_iter()
            .map(|t| {
                let mut items: Vec<ItemId> = t.into_iter().collect();
                items.sort_unstable();
                items.dedup();
                items
            })
            .collect();
        Database { transactions }
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn transactions(&self) -> &[Vec<ItemId>] {
        &self.transactions
    }

    pub fn distinct_items(&self) -> Vec<ItemId> {
        let mut items: Vec<ItemId> = self.transactions.iter().flatten().copied().collect();
        items.sort_unstable();
        items.dedup();
        items
    }

    /// Bytes of transaction storage counted by the memory accounting.
    pub fn tracked_bytes(&self) -> usize {
        self.transactions.len() * std::mem::size_of::<Vec<ItemId>>()
            + self.transactions.iter().map(Vec::len).sum::<usize>() * std::mem::size_of::<ItemId>()
    }

    /// Number of transactions containing every item of the sorted `itemset`.
    pub fn count(&self, itemset: &[ItemId]) -> u64 {
        self.transactions
            .iter()
            .filter(|t| is_subset(itemset, t))
            .count() as u64
    }
}

/// Sorted-slice inclusion test.
pub fn is_subset(needle: &[ItemId], haystack: &[ItemId]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|x| it.any(|y| y == x))
}

/// One full pass over the transactions.
pub trait TransactionScan {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn scan(&self, f: &mut dyn FnMut(&[ItemId]));
}

impl TransactionScan for Database {
    fn len(&self) -> usize {
        self.transactions.len()
    }

    fn scan(&self, f: &mut dyn FnMut(&[ItemId])) {
        for t in &self.transactions {
            f(t);
        }
    }
}

/// Wraps a scan source and counts the passes made over it.
pub struct ScanCounter<'a, S: ?Sized> {
    inner: &'a S,
    passes: Cell<usize>,
}

impl<'a, S: TransactionScan + ?Sized> ScanCounter<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        ScanCounter {
            inner,
            passes: Cell::new(0),
        }
    }

    pub fn passes(&self) -> usize {
        self.passes.get()
    }
}

impl<S: TransactionScan + ?Sized> TransactionScan for ScanCounter<'_, S> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn scan(&self, f: &mut dyn FnMut(&[ItemId])) {
        self.passes.set(self.passes.get() + 1);
        self.inner.scan(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrequentItemSet {
    /// Sorted ascending.
    pub items: Vec<ItemId>,
    pub support_count: u64,
}

impl FrequentItemSet {
    pub fn support(&self, n_transactions: usize) -> f64 {
        self.support_count as f64 / n_transactions as f64
    }
}

/// Smallest integer count meeting `min_support` on `n` transactions.
pub fn min_count(min_support: f64, n: usize) -> Result<u64> {
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(Error::invalid(format!(
            "min_support {min_support} outside (0, 1]"
        )));
    }
    // guard against 0.3 * 10 = 3.0000000000000004
    let raw = min_support * n as f64;
    Ok(((raw - 1e-9 * raw.max(1.0)).ceil() as u64).max(1))
}

/// Orders itemsets lexicographically by their item lists.
pub fn canonical_sort(itemsets: &mut [FrequentItemSet]) {
    itemsets.sort_unstable_by(|a, b| a.items.cmp(&b.items));
}

/// Running and peak byte counter for the deterministic memory proxy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MemTracker {
    live: usize,
    peak: usize,
}

impl MemTracker {
    pub fn alloc(&mut self, bytes: usize) {
        self.live += bytes;
        self.peak = self.peak.max(self.live);
    }

    pub fn free(&mut self, bytes: usize) {
        self.live = self.live.saturating_sub(bytes);
    }

    pub fn live(&self) -> usize {
        self.live
    }

    pub fn peak(&self) -> usize {
        self.peak
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Miner {
    FpGrowth,
    Apriori,
    BruteForce,
}

impl Miner {
    pub fn name(self) -> &'static str {
        match self {
            Miner::FpGrowth => "fpgrowth",
            Miner::Apriori => "apriori",
            Miner::BruteForce => "bruteforce",
        }
    }

    pub fn mine(self, db: &Database, min_support: f64) -> Result<MineOutput> {
        match self {
            Miner::FpGrowth => {
                let mut tracker = MemTracker::default();
                tracker.alloc(db.tracked_bytes());
                let tree = build_fptree(db, min_support)?;
                tracker.alloc(tree.tracked_bytes());
                let mut itemsets = fpgrowth_tracked(&tree, &[], tree.min_count(), &mut tracker);
                canonical_sort(&mut itemsets);
                Ok(MineOutput {
                    itemsets,
                    tracked_bytes_peak: tracker.peak(),
                })
            }
            Miner::Apriori => {
                let (itemsets, tracked_bytes_peak) = apriori_tracked(db, min_support)?;
                Ok(MineOutput {
                    itemsets,
                    tracked_bytes_peak,
                })
            }
            Miner::BruteForce => {
                let itemsets = brute_force_frequent(db, min_support)?;
                Ok(MineOutput {
                    itemsets,
                    tracked_bytes_peak: db.tracked_bytes(),
                })
            }
        }
    }
}

impl fmt::Display for Miner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Miner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fpgrowth" => Ok(Miner::FpGrowth),
            "apriori" => Ok(Miner::Apriori),
            "bruteforce" => Ok(Miner::BruteForce),
            other => Err(Error::invalid(format!(
                "unknown algorithm {other:?} (expected fpgrowth, apriori or bruteforce)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MineOutput {
    /// Canonically sorted.
    pub itemsets: Vec<FrequentItemSet>,
    pub tracked_bytes_peak: usize,
}
