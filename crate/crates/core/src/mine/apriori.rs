use std::collections::{HashMap, HashSet};

use super::{canonical_sort, is_subset, min_count, Database, FrequentItemSet, ItemId, MemTracker};
use crate::error::{Error, Result};

fn itemset_bytes(k: usize) -> usize {
    std::mem::size_of::<Vec<ItemId>>()
        + k * std::mem::size_of::<ItemId>()
        + std::mem::size_of::<u64>()
}

/// Joins sorted k-itemsets sharing their first k-1 items and drops every
/// candidate with an infrequent k-subset.
fn candidates(level: &[Vec<ItemId>]) -> Vec<Vec<ItemId>> {
    let known: HashSet<&[ItemId]> = level.iter().map(Vec::as_slice).collect();
    let mut out = Vec::new();
    for (i, a) in level.iter().enumerate() {
        let prefix = &a[..a.len() - 1];
        for b in &level[i + 1..] {
            if &b[..b.len() - 1] != prefix {
                // level is sorted, so no later itemset shares the prefix either
                break;
            }
            let mut cand = a.clone();
            cand.push(*b.last().unwrap());
            let mut sub = Vec::with_capacity(cand.len() - 1);
            let all_frequent = (0..cand.len() - 2).all(|skip| {
                sub.clear();
                sub.extend(
                    cand.iter()
                        .enumerate()
                        .filter(|&(j, _)| j != skip)
                        .map(|(_, &x)| x),
                );
                known.contains(sub.as_slice())
            });
            if all_frequent {
                out.push(cand);
            }
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Counts every candidate of size `k` in one pass over the database.
///
/// Short transactions enumerate their own k-subsets and look them up;
/// long ones test each candidate for inclusion.
fn count_candidates(db: &Database, cands: &[Vec<ItemId>], k: usize) -> Vec<u64> {
    let index: HashMap<&[ItemId], usize> = cands
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_slice(), i))
        .collect();
    let mut counts = vec![0u64; cands.len()];
    let mut combo = vec![0usize; k];
    let mut key = vec![0 as ItemId; k];
    for t in db.transactions() {
        if t.len() < k {
            continue;
        }
        if binomial(t.len(), k) <= cands.len() {
            // lexicographic k-combinations of positions in t
            for (i, c) in combo.iter_mut().enumerate() {
                *c = i;
            }
            loop {
                for (dst, &pos) in key.iter_mut().zip(&combo) {
                    *dst = t[pos];
                }
                if let Some(&i) = index.get(key.as_slice()) {
                    counts[i] += 1;
                }
                let Some(p) = (0..k).rev().find(|&p| combo[p] != p + t.len() - k) else {
                    break;
                };
                combo[p] += 1;
                for q in p + 1..k {
                    combo[q] = combo[q - 1] + 1;
                }
            }
        } else {
            for (i, c) in cands.iter().enumerate() {
                if is_subset(c, t) {
                    counts[i] += 1;
                }
            }
        }
    }
    counts
}

/// Level-wise Apriori mining, canonically sorted.
pub fn apriori(db: &Database, min_support: f64) -> Result<Vec<FrequentItemSet>> {
    apriori_tracked(db, min_support).map(|(sets, _)| sets)
}

/// [`apriori`] plus the peak tracked bytes: transaction storage, the
/// current frequent level and the candidate set being counted.
pub fn apriori_tracked(db: &Database, min_support: f64) -> Result<(Vec<FrequentItemSet>, usize)> {
    if db.is_empty() {
        return Err(Error::invalid("cannot mine an empty database"));
    }
    let min_count = min_count(min_support, db.len())?;
    let mut tracker = MemTracker::default();
    tracker.alloc(db.tracked_bytes());

    let mut singles: HashMap<ItemId, u64> = HashMap::new();
    for t in db.transactions() {
        for &i in t {
            *singles.entry(i).or_insert(0) += 1;
        }
    }
    tracker.alloc(singles.len() * itemset_bytes(1));
    let mut level: Vec<(Vec<ItemId>, u64)> = singles
        .iter()
        .filter(|&(_, &c)| c >= min_count)
        .map(|(&i, &c)| (vec![i], c))
        .collect();
    tracker.free(singles.len() * itemset_bytes(1));
    level.sort_unstable();
    tracker.alloc(level.len() * itemset_bytes(1));

    let mut out: Vec<FrequentItemSet> = Vec::new();
    let mut k = 1;
    while !level.is_empty() {
        let sets: Vec<Vec<ItemId>> = level.iter().map(|(s, _)| s.clone()).collect();
        out.extend(
            level
                .drain(..)
                .map(|(items, support_count)| FrequentItemSet {
                    items,
                    support_count,
                }),
        );

        let cands = candidates(&sets);
        let cand_bytes = cands.len() * itemset_bytes(k + 1);
        tracker.alloc(cand_bytes);
        let counts = count_candidates(db, &cands, k + 1);
        level = cands
            .into_iter()
            .zip(counts)
            .filter(|&(_, c)| c >= min_count)
            .collect();
        tracker.free(sets.len() * itemset_bytes(k));
        tracker.free(cand_bytes);
        k += 1;
        tracker.alloc(level.len() * itemset_bytes(k));
    }
    canonical_sort(&mut out);
    Ok((out, tracker.peak()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_and_prune() {
        // {1,2,3} survives; {1,2,4} is pruned because {2,4} is not frequent
        let level = vec![vec![1, 2], vec![1, 3], vec![1, 4], vec![2, 3]];
        assert_eq!(candidates(&level), vec![vec![1, 2, 3]]);
        let singles = vec![vec![1], vec![2], vec![5]];
        assert_eq!(
            candidates(&singles),
            vec![vec![1, 2], vec![1, 5], vec![2, 5]]
        );
    }

    #[test]
    fn counting_strategies_agree() {
        let db = Database::new([vec![1, 2, 3, 4], vec![1, 2], vec![2, 3, 4], vec![1, 3, 4]]);
        let cands = vec![vec![1, 2], vec![3, 4], vec![1, 4]];
        // few candidates: containment test; many: subset enumeration
        assert_eq!(count_candidates(&db, &cands, 2), vec![2, 3, 2]);
        let all: Vec<Vec<ItemId>> = (1..=4)
            .flat_map(|a| (a + 1..=4).map(move |b| vec![a, b]))
            .collect();
        let counts = count_candidates(&db, &all, 2);
        for (c, n) in all.iter().zip(counts) {
            assert_eq!(n, db.count(c), "{c:?}");
        }
    }

    #[test]
    fn four_transaction_example() {
        let db = Database::new([vec![0, 1], vec![1, 2], vec![0, 1, 2], vec![1]]);
        let got: Vec<(Vec<ItemId>, u64)> = apriori(&db, 0.5)
            .unwrap()
            .into_iter()
            .map(|s| (s.items, s.support_count))
            .collect();
        assert_eq!(
            got,
            vec![
                (vec![0], 2),
                (vec![0, 1], 2),
                (vec![1], 4),
                (vec![1, 2], 2),
                (vec![2], 2)
            ]
        );
    }

    #[test]
    fn full_support_threshold() {
        let db = Database::new([vec![0, 1], vec![1, 2]]);
        let got = apriori(&db, 1.0).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].items, vec![1]);
        let db = Database::new([vec![0], vec![1]]);
        assert!(apriori(&db, 1.0).unwrap().is_empty());
        let db = Database::new(vec![vec![0, 1, 2]; 4]);
        let got = apriori(&db, 1.0).unwrap();
        assert_eq!(got.len(), 7);
        assert!(got.iter().all(|s| s.support_count == 4));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(13, 6), 1716);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
    }
}
