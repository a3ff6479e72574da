use std::collections::HashMap;

use super::{min_count, FrequentItemSet, ItemId, MemTracker, TransactionScan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpNode {
    /// `None` only for the root.
    pub item: Option<ItemId>,
    pub count: u64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Next node carrying the same item.
    pub next_same_item: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderEntry {
    pub item: ItemId,
    pub support: u64,
    pub head: Option<usize>,
    tail: Option<usize>,
}

/// Prefix tree of transactions whose items are ordered by descending
/// support (ascending id on ties), with a header table of node-link chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpTree {
    nodes: Vec<FpNode>,
    header: Vec<HeaderEntry>,
    rank: HashMap<ItemId, usize>,
    n_transactions: usize,
    min_count: u64,
}

/// Recorded size of one node: the node itself plus its slot in the parent's child list.
const NODE_BYTES: usize = std::mem::size_of::<FpNode>() + std::mem::size_of::<usize>();
const HEADER_BYTES: usize =
    std::mem::size_of::<HeaderEntry>() + std::mem::size_of::<(ItemId, usize)>();

impl FpTree {
    fn with_counts(counts: HashMap<ItemId, u64>, n_transactions: usize, min_count: u64) -> Self {
        let mut frequent: Vec<(ItemId, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        frequent.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let rank = frequent
            .iter()
            .enumerate()
            .map(|(r, &(item, _))| (item, r))
            .collect();
        let header = frequent
            .into_iter()
            .map(|(item, support)| HeaderEntry {
                item,
                support,
                head: None,
                tail: None,
            })
            .collect();
        FpTree {
            nodes: vec![FpNode {
                item: None,
                count: 0,
                parent: None,
                children: Vec::new(),
                next_same_item: None,
            }],
            header,
            rank,
            n_transactions,
            min_count,
        }
    }

    /// Keeps the frequent items of `items` and orders them by header rank.
    fn ordered(&self, items: &[ItemId], buf: &mut Vec<(usize, ItemId)>) {
        buf.clear();
        buf.extend(
            items
                .iter()
                .filter_map(|i| self.rank.get(i).map(|&r| (r, *i))),
        );
        buf.sort_unstable();
    }

    fn insert(&mut self, path: &[(usize, ItemId)], count: u64) {
        let mut cur = 0;
        self.nodes[0].count += count;
        for &(rank, item) in path {
            let existing = self.nodes[cur]
                .children
                .iter()
                .copied()
                .find(|&c| self.nodes[c].item == Some(item));
            cur = match existing {
                Some(child) => {
                    self.nodes[child].count += count;
                    child
                }
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(FpNode {
                        item: Some(item),
                        count,
                        parent: Some(cur),
                        children: Vec::new(),
                        next_same_item: None,
                    });
                    self.nodes[cur].children.push(idx);
                    let entry = &mut self.header[rank];
                    match entry.tail {
                        Some(t) => self.nodes[t].next_same_item = Some(idx),
                        None => entry.head = Some(idx),
                    }
                    entry.tail = Some(idx);
                    idx
                }
            };
        }
    }

    /// Builds a conditional tree from weighted prefix paths.
    fn from_pattern_base(
        base: &[(Vec<ItemId>, u64)],
        n_transactions: usize,
        min_count: u64,
    ) -> Self {
        let mut counts: HashMap<ItemId, u64> = HashMap::new();
        for (path, w) in base {
            for &i in path {
                *counts.entry(i).or_insert(0) += w;
            }
        }
        let mut tree = FpTree::with_counts(counts, n_transactions, min_count);
        let mut buf = Vec::new();
        for (path, w) in base {
            tree.ordered(path, &mut buf);
            if !buf.is_empty() {
                tree.insert(&buf, *w);
            }
        }
        tree
    }

    pub fn root(&self) -> &FpNode {
        &self.nodes[0]
    }

    pub fn node(&self, idx: usize) -> &FpNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[FpNode] {
        &self.nodes
    }

    /// Header entries, descending support.
    pub fn header(&self) -> &[HeaderEntry] {
        &self.header
    }

    pub fn is_empty(&self) -> bool {
        self.header.is_empty()
    }

    pub fn n_transactions(&self) -> usize {
        self.n_transactions
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn tracked_bytes(&self) -> usize {
        self.nodes.len() * NODE_BYTES + self.header.len() * HEADER_BYTES
    }

    /// Node indices on the node-link chain of header entry `h`.
    pub fn chain(&self, h: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.header[h].head, move |&i| self.nodes[i].next_same_item)
    }

    /// Prefix paths (root side first) leading to each node of header entry
    /// `h`, weighted by that node's count.
    pub fn pattern_base(&self, h: usize) -> Vec<(Vec<ItemId>, u64)> {
        self.chain(h)
            .filter_map(|idx| {
                let mut path = Vec::new();
                let mut cur = self.nodes[idx].parent;
                while let Some(p) = cur {
                    if let Some(item) = self.nodes[p].item {
                        path.push(item);
                    }
                    cur = self.nodes[p].parent;
                }
                path.reverse();
                (!path.is_empty()).then(|| (path, self.nodes[idx].count))
            })
            .collect()
    }
}

/// Builds the FP-tree in exactly two passes: item frequencies first, then
/// insertion of each transaction's frequent items in header order.
pub fn build_fptree<S: TransactionScan + ?Sized>(db: &S, min_support: f64) -> Result<FpTree> {
    if db.is_empty() {
        return Err(Error::invalid(
            "cannot build an FP-tree from an empty database",
        ));
    }
    let n = db.len();
    let min_count = min_count(min_support, n)?;
    let mut counts: HashMap<ItemId, u64> = HashMap::new();
    db.scan(&mut |t| {
        for &i in t {
            *counts.entry(i).or_insert(0) += 1;
        }
    });
    let mut tree = FpTree::with_counts(counts, n, min_count);
    let mut buf = Vec::new();
    db.scan(&mut |t| {
        tree.ordered(t, &mut buf);
        tree.insert(&buf, 1);
    });
    Ok(tree)
}

/// All frequent itemsets of `tree` extended by `suffix`, canonically sorted.
pub fn fpgrowth(tree: &FpTree, suffix: &[ItemId], min_count: u64) -> Vec<FrequentItemSet> {
    let mut tracker = MemTracker::default();
    let mut out = fpgrowth_tracked(tree, suffix, min_count, &mut tracker);
    super::canonical_sort(&mut out);
    out
}

/// [`fpgrowth`] that charges every conditional tree to `tracker` while it is alive.
/// Output order is unspecified.
pub fn fpgrowth_tracked(
    tree: &FpTree,
    suffix: &[ItemId],
    min_count: u64,
    tracker: &mut MemTracker,
) -> Vec<FrequentItemSet> {
    let mut out = Vec::new();
    let mut suffix = suffix.to_vec();
    grow(tree, &mut suffix, min_count, tracker, &mut out);
    out
}

fn grow(
    tree: &FpTree,
    suffix: &mut Vec<ItemId>,
    min_count: u64,
    tracker: &mut MemTracker,
    out: &mut Vec<FrequentItemSet>,
) {
    for h in (0..tree.header.len()).rev() {
        let entry = &tree.header[h];
        if entry.support < min_count {
            continue;
        }
        suffix.push(entry.item);
        let mut items = suffix.clone();
        items.sort_unstable();
        out.push(FrequentItemSet {
            items,
            support_count: entry.support,
        });

        let base = tree.pattern_base(h);
        if !base.is_empty() {
            let cond = FpTree::from_pattern_base(&base, tree.n_transactions, min_count);
            let bytes = cond.tracked_bytes();
            tracker.alloc(bytes);
            if !cond.is_empty() {
                grow(&cond, suffix, min_count, tracker, out);
            }
            tracker.free(bytes);
        }
        suffix.pop();
    }
}
