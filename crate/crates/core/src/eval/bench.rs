use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fuzzify::ItemId;
use crate::mine::{Database, Miner};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub algorithm: Miner,
    pub min_support: f64,
    pub n_transactions: usize,
    /// Seconds per timed repetition (warm-up excluded).
    pub wall_time: Vec<f64>,
    pub tracked_bytes_peak: usize,
    /// Process peak resident set size in bytes, when the OS exposes it.
    pub rss_peak: Option<u64>,
    pub itemset_count: usize,
    pub dataset_fingerprint: String,
}

impl BenchReport {
    pub fn mean_time(&self) -> f64 {
        self.wall_time.iter().sum::<f64>() / self.wall_time.len() as f64
    }
}

/// SHA-256 over the length-prefixed little-endian item ids.
pub fn dataset_fingerprint(db: &Database) -> String {
    let mut h = Sha256::new();
    h.update((db.len() as u64).to_le_bytes());
    for t in db.transactions() {
        h.update((t.len() as u32).to_le_bytes());
        for i in t {
            h.update(i.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[cfg(target_os = "linux")]
fn reset_peak_rss() {
    // "5" resets VmHWM to the current RSS (Linux >= 4.0); ignore failures
    let _ = std::fs::write("/proc/self/clear_refs", "5");
}

#[cfg(not(target_os = "linux"))]
fn reset_peak_rss() {}

fn peak_rss() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Times `repetitions` runs of `miner` after one discarded warm-up run.
pub fn benchmark(
    miner: Miner,
    db: &Database,
    min_support: f64,
    repetitions: usize,
) -> Result<BenchReport> {
    benchmark_with(miner, db, min_support, repetitions, 1)
}

pub fn benchmark_with(
    miner: Miner,
    db: &Database,
    min_support: f64,
    repetitions: usize,
    warmup: usize,
) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::invalid("benchmark needs at least one repetition"));
    }
    reset_peak_rss();
    for _ in 0..warmup {
        miner.mine(db, min_support)?;
    }
    let mut wall_time = Vec::with_capacity(repetitions);
    let mut last = None;
    for _ in 0..repetitions {
        let start = Instant::now();
        let out = miner.mine(db, min_support)?;
        // floor at the clock's resolution so every entry is positive
        wall_time.push(start.elapsed().as_secs_f64().max(1e-9));
        if let Some((count, bytes)) = last {
            if (count, bytes) != (out.itemsets.len(), out.tracked_bytes_peak) {
                return Err(Error::Consistency(format!(
                    "{miner} is not deterministic across repetitions"
                )));
            }
        }
        last = Some((out.itemsets.len(), out.tracked_bytes_peak));
    }
    let (itemset_count, tracked_bytes_peak) = last.expect("at least one repetition");
    Ok(BenchReport {
        algorithm: miner,
        min_support,
        n_transactions: db.len(),
        wall_time,
        tracked_bytes_peak,
        rss_peak: peak_rss(),
        itemset_count,
        dataset_fingerprint: dataset_fingerprint(db),
    })
}

/// Fails unless all reports describe the same dataset, threshold and itemset count.
pub fn cross_check(reports: &[BenchReport]) -> Result<()> {
    let Some(first) = reports.first() else {
        return Ok(());
    };
    for r in &reports[1..] {
        if r.dataset_fingerprint != first.dataset_fingerprint || r.min_support != first.min_support
        {
            return Err(Error::Consistency(format!(
                "{} and {} were benchmarked on different inputs",
                first.algorithm, r.algorithm
            )));
        }
        if r.itemset_count != first.itemset_count {
            return Err(Error::Consistency(format!(
                "{} found {} itemsets but {} found {}",
                first.algorithm, first.itemset_count, r.algorithm, r.itemset_count
            )));
        }
    }
    Ok(())
}

/// Shape of the bundled synthetic benchmark database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub seed: u64,
    pub transactions: usize,
    pub features: usize,
    pub labels: usize,
    /// Number of latent weather regimes transactions are drawn from.
    pub regimes: usize,
    /// Per-feature probability of drifting one label away from the regime.
    pub noise: f64,
    pub min_support: f64,
    pub repetitions: usize,
}

impl Default for BenchConfig {
    /// 10,000 transactions over 12 four-label features plus the two class
    /// items: 50 items in total.
    fn default() -> Self {
        BenchConfig {
            seed: 1,
            transactions: 10_000,
            features: 12,
            labels: 4,
            regimes: 6,
            noise: 0.1,
            min_support: 0.05,
            repetitions: 10,
        }
    }
}

impl BenchConfig {
    pub fn item_count(&self) -> usize {
        2 + self.features * self.labels
    }
}

/// Fuzzified-style transactions: one label per feature plus a class item.
/// Each transaction follows one of a few regime prototypes, with each
/// feature label drifting to a neighbour with probability `noise`.
pub fn synth_bench_db(config: &BenchConfig) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let labels = config.labels.max(1);
    let regimes = config.regimes.max(1);
    let prototypes: Vec<(ItemId, Vec<usize>)> = (0..regimes)
        .map(|r| {
            let class = if r % 3 == 0 { 0 } else { 1 };
            (
                class,
                (0..config.features)
                    .map(|_| rng.random_range(0..labels))
                    .collect(),
            )
        })
        .collect();
    let transactions = (0..config.transactions).map(|_| {
        let (class, proto) = &prototypes[rng.random_range(0..regimes)];
        let mut items: Vec<ItemId> = Vec::with_capacity(config.features + 1);
        items.push(*class);
        for (j, &base) in proto.iter().enumerate() {
            let mut label = base;
            if labels > 1 && rng.random_bool(config.noise) {
                label = if base == 0 || (base + 1 < labels && rng.random_bool(0.5)) {
                    base + 1
                } else {
                    base - 1
                };
            }
            items.push((2 + j * labels + label) as ItemId);
        }
        items
    });
    Database::new(transactions.collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_composition() {
        let db = Database::new([vec![0, 1], vec![1, 2], vec![0, 1, 2], vec![1]]);
        let r = benchmark(Miner::BruteForce, &db, 0.5, 1).unwrap();
        assert_eq!(r.itemset_count, 5);
        assert_eq!(r.wall_time.len(), 1);
        assert!(r.wall_time[0] > 0.0);
    }

    #[test]
    fn miners_report_equal_counts() {
        let cfg = BenchConfig {
            transactions: 500,
            features: 5,
            ..BenchConfig::default()
        };
        let db = synth_bench_db(&cfg);
        let reports: Vec<BenchReport> = [Miner::FpGrowth, Miner::Apriori]
            .into_iter()
            .map(|m| benchmark(m, &db, 0.1, 2).unwrap())
            .collect();
        cross_check(&reports).unwrap();
        assert_eq!(reports[0].itemset_count, reports[1].itemset_count);
        assert!(reports[0].itemset_count > 20);
    }

    #[test]
    fn cross_check_rejects_mismatch() {
        let db = Database::new([vec![0, 1], vec![1, 2]]);
        let a = benchmark(Miner::FpGrowth, &db, 0.5, 1).unwrap();
        let mut b = a.clone();
        b.itemset_count += 1;
        assert!(matches!(
            cross_check(&[a.clone(), b]),
            Err(Error::Consistency(_))
        ));
        let mut c = a.clone();
        c.dataset_fingerprint = "x".into();
        assert!(cross_check(&[a, c]).is_err());
    }

    #[test]
    fn tracked_bytes_deterministic() {
        let db = synth_bench_db(&BenchConfig {
            transactions: 300,
            ..BenchConfig::default()
        });
        for m in [Miner::FpGrowth, Miner::Apriori] {
            let a = benchmark_with(m, &db, 0.1, 1, 0).unwrap();
            let b = benchmark_with(m, &db, 0.1, 1, 0).unwrap();
            assert_eq!(a.tracked_bytes_peak, b.tracked_bytes_peak);
        }
    }

    #[test]
    fn bench_db_shape() {
        let cfg = BenchConfig {
            transactions: 1000,
            ..BenchConfig::default()
        };
        let db = synth_bench_db(&cfg);
        assert_eq!(db.len(), 1000);
        assert!(db.transactions().iter().all(|t| t.len() == 13));
        assert_eq!(db.distinct_items().len(), cfg.item_count());
        assert_eq!(
            dataset_fingerprint(&db),
            dataset_fingerprint(&synth_bench_db(&cfg))
        );
    }

    #[test]
    fn zero_repetitions_rejected() {
        let db = Database::new([vec![0]]);
        assert!(benchmark(Miner::FpGrowth, &db, 0.5, 0).is_err());
    }
}
