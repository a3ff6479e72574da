use super::{min_count, Database, FrequentItemSet, ItemId};
use crate::error::{Error, Result};

pub const MAX_BRUTE_FORCE_ITEMS: usize = 20;

/// Enumerates every nonempty subset of the distinct items and counts it
/// directly. Test oracle for the real miners.
pub fn brute_force_frequent(db: &Database, min_support: f64) -> Result<Vec<FrequentItemSet>> {
    if db.is_empty() {
        return Err(Error::invalid("cannot mine an empty database"));
    }
    let items = db.distinct_items();
    if items.len() > MAX_BRUTE_FORCE_ITEMS {
        return Err(Error::TooManyItems {
            found: items.len(),
            max: MAX_BRUTE_FORCE_ITEMS,
        });
    }
    let min_count = min_count(min_support, db.len())?;
    let masks: Vec<u32> = db
        .transactions()
        .iter()
        .map(|t| {
            t.iter()
                .map(|i| 1u32 << items.binary_search(i).expect("item collected above"))
                .fold(0, |m, b| m | b)
        })
        .collect();
    let mut out = Vec::new();
    for subset in 1u32..(1u32 << items.len()) {
        let count = masks.iter().filter(|&&m| m & subset == subset).count() as u64;
        if count >= min_count {
            let members: Vec<ItemId> = (0..items.len())
                .filter(|b| subset & (1 << b) != 0)
                .map(|b| items[b])
                .collect();
            out.push(FrequentItemSet {
                items: members,
                support_count: count,
            });
        }
    }
    super::canonical_sort(&mut out);
    Ok(out)
}
