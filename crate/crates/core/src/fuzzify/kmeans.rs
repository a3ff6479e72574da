use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted cluster centers for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroids {
    pub feature: String,
    pub centers: Vec<f64>,
}

impl Centroids {
    pub fn fit(feature: impl Into<String>, points: &[f64], k: usize, seed: u64) -> Result<Self> {
        Ok(Centroids {
            feature: feature.into(),
            centers: kmeans(points, k, seed)?.centers,
        })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

/// One-dimensional Lloyd k-means.
///
/// Initial centers are `k` distinct data points chosen by k-means++ (D²)
/// sampling from a ChaCha8 stream seeded with `seed`. Each restart runs
/// assign/update rounds until no point changes cluster; the restart with
/// the lowest within-cluster sum of squares wins (first one on ties).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeans {
    pub k: usize,
    pub seed: u64,
    pub n_init: usize,
    pub max_iter: usize,
}

impl KMeans {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeans {
            k,
            seed,
            n_init: 10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Ascending.
    pub centers: Vec<f64>,
    /// Cluster index per input point, relative to `centers`.
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Within-cluster sum of squares after every assignment step of the winning run.
    pub inertia_trace: Vec<f64>,
}

pub fn kmeans(points: &[f64], k: usize, seed: u64) -> Result<KMeansFit> {
    KMeans::new(k, seed).fit(points)
}

fn nearest(centers: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = (x - centers[0]).abs();
    for (j, &c) in centers.iter().enumerate().skip(1) {
        let d = (x - c).abs();
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn sum_squares(points: &[f64], centers: &[f64], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(&x, &l)| (x - centers[l]).powi(2))
        .sum()
}

fn plus_plus_init(points: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            pick = Some(i);
            if target < w {
                break;
            }
            target -= w;
        }
        // at least k distinct values exist, so some weight is positive
        let c = points[pick.expect("positive D² weight")];
        centers.push(c);
        for (w, &x) in d2.iter_mut().zip(points) {
            *w = w.min((x - c).powi(2));
        }
    }
    centers
}

impl KMeans {
    pub fn fit(&self, points: &[f64]) -> Result<KMeansFit> {
        if self.k == 0 {
            return Err(Error::invalid("k-means needs k >= 1"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("k-means input contains non-finite values"));
        }
        let mut sorted = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() < self.k {
            return Err(Error::TooFewDistinct {
                k: self.k,
                distinct: sorted.len(),
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut best: Option<KMeansFit> = None;
        for _ in 0..self.n_init.max(1) {
            let init = plus_plus_init(points, self.k, &mut rng);
            let fit = self.lloyd(points, init);
            if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
                best = Some(fit);
            }
        }
        Ok(best.expect("n_init >= 1"))
    }

    fn lloyd(&self, points: &[f64], mut centers: Vec<f64>) -> KMeansFit {
        let k = self.k;
        let mut labels = vec![usize::MAX; points.len()];
        let mut trace = Vec::new();
        for _ in 0..self.max_iter {
            let mut changed = false;
            for (label, &x) in labels.iter_mut().zip(points) {
                let j = nearest(&centers, x);
                if *label != j {
                    *label = j;
                    changed = true;
                }
            }
            trace.push(sum_squares(points, &centers, &labels));
            if !changed {
                break;
            }

            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for (&x, &l) in points.iter().zip(&labels) {
                sums[l] += x;
                counts[l] += 1;
            }
            for j in 0..k {
                if counts[j] > 0 {
                    centers[j] = sums[j] / counts[j] as f64;
                }
            }
            // empty clusters take the point currently farthest from its center
            for j in 0..k {
                if counts[j] > 0 {
                    continue;
                }
                let (far, _) = points
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| counts[labels[i]] > 1)
                    .map(|(i, &x)| (i, (x - centers[labels[i]]).abs()))
                    .fold(
                        (usize::MAX, -1.0),
                        |acc, cur| if cur.1 > acc.1 { cur } else { acc },
                    );
                if far == usize::MAX {
                    continue;
                }
                counts[labels[far]] -= 1;
                labels[far] = j;
                counts[j] = 1;
                centers[j] = points[far];
            }
        }

        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
        let mut rank = vec![0; k];
        for (r, &j) in order.iter().enumerate() {
            rank[j] = r;
        }
        let sorted_centers: Vec<f64> = order.iter().map(|&j| centers[j]).collect();
        let labels: Vec<usize> = labels.iter().map(|&l| rank[l]).collect();
        KMeansFit {
            inertia: sum_squares(points, &sorted_centers, &labels),
            centers: sorted_centers,
            labels,
            inertia_trace: trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    /// Exhaustive optimum: in one dimension optimal clusters are contiguous
    /// runs of the sorted points, so enumerate every split into k runs.
    fn brute_force_centers(points: &[f64], k: usize) -> (Vec<f64>, f64) {
        let mut xs = points.to_vec();
        xs.sort_by(f64::total_cmp);
        fn cost(run: &[f64]) -> (f64, f64) {
            let mean = run.iter().sum::<f64>() / run.len() as f64;
            (mean, run.iter().map(|x| (x - mean).powi(2)).sum())
        }
        fn go(xs: &[f64], k: usize) -> Option<(Vec<f64>, f64)> {
            if k == 1 {
                return (!xs.is_empty()).then(|| {
                    let (m, c) = cost(xs);
                    (vec![m], c)
                });
            }
            let mut best: Option<(Vec<f64>, f64)> = None;
            for cut in 1..xs.len() {
                let (m, c) = cost(&xs[..cut]);
                if let Some((mut rest, rc)) = go(&xs[cut..], k - 1) {
                    if best.as_ref().is_none_or(|b| c + rc < b.1) {
                        rest.insert(0, m);
                        best = Some((rest, c + rc));
                    }
                }
            }
            best
        }
        go(&xs, k).unwrap()
    }

    #[test]
    fn two_tight_groups() {
        let fit = kmeans(&[1.0, 1.0, 1.0, 9.0, 9.0, 9.0], 2, 0).unwrap();
        assert_eq!(fit.centers, vec![1.0, 9.0]);
        assert_eq!(fit.labels, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn single_cluster_is_mean() {
        assert_eq!(kmeans(&[5.0], 1, 0).unwrap().centers, vec![5.0]);
        assert_eq!(kmeans(&[1.0, 2.0, 6.0], 1, 3).unwrap().centers, vec![3.0]);
    }

    #[test]
    fn three_groups_match_exhaustive_optimum() {
        let pts = [0.0, 1.0, 2.0, 10.0, 11.0, 12.0, 20.0, 21.0, 22.0];
        let (oracle, _) = brute_force_centers(&pts, 3);
        assert_eq!(oracle, vec![1.0, 11.0, 21.0]);
        assert_eq!(kmeans(&pts, 3, 0).unwrap().centers, oracle);
    }

    #[test]
    fn too_few_distinct_points() {
        assert!(matches!(
            kmeans(&[1.0, 1.0, 2.0], 3, 0),
            Err(Error::TooFewDistinct { k: 3, distinct: 2 })
        ));
        assert!(kmeans(&[1.0], 0, 0).is_err());
    }

    #[test]
    fn empty_cluster_repair_keeps_k_clusters() {
        // a single Lloyd run from a degenerate start: the outlying center
        // captures nothing and must be reseeded
        let km = KMeans::new(3, 0);
        let pts = [0.0, 0.1, 0.2, 5.0, 5.1, 9.0];
        let fit = km.lloyd(&pts, vec![0.0, 100.0, 200.0]);
        assert_eq!(fit.centers.len(), 3);
        let mut used: Vec<usize> = fit.labels.clone();
        used.sort_unstable();
        used.dedup();
        assert_eq!(used, vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn deterministic_and_monotone(
            pts in prop::collection::vec(0.0f64..1.0, 8..60),
            k in 1usize..5,
            seed in 0u64..1000,
        ) {
            let a = kmeans(&pts, k, seed).unwrap();
            let b = kmeans(&pts, k, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.centers.windows(2).all(|w| w[0] < w[1]));
            for w in a.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0));
            }
        }

        #[test]
        fn near_the_exhaustive_optimum(pts in prop::collection::vec(0.0f64..1.0, 6..14), k in 2usize..4) {
            let (_, best) = brute_force_centers(&pts, k);
            let fit = kmeans(&pts, k, 0).unwrap();
            // Lloyd may stop in a local optimum; it must never beat the global one
            prop_assert!(fit.inertia >= best - 1e-12);
        }
    }
}
