use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::matrix::{MatrixRow, ObservationMatrix};
use super::series::YearMonth;
use crate::error::{Error, Result};

const FEATURE_NAMES: &[&str] = &[
    "rainfall",
    "temperature",
    "ndvi",
    "evi",
    "soi",
    "sst_anomaly",
    "population",
    "poverty",
    "political_stability",
    "typhoon_distance",
];

/// Dimensions of a synthetic per-region monthly dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub regions: usize,
    pub months: usize,
    pub features: usize,
    /// Long-run fraction of high-incidence months.
    pub outbreak_rate: f64,
    pub start: YearMonth,
}

impl Default for SynthConfig {
    fn default() -> Self {
        // 13 regions, 2001-2006
        SynthConfig {
            regions: 13,
            months: 72,
            features: 6,
            outbreak_rate: 0.2,
            start: YearMonth {
                year: 2001,
                month: 1,
            },
        }
    }
}

fn feature_name(j: usize) -> String {
    FEATURE_NAMES
        .get(j)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("feature_{j}"))
}

/// Generates a raw (unnormalized) observation matrix.
///
/// Each region follows a two-state Markov chain of high/low incidence
/// months with stationary high rate `outbreak_rate`. Dengue counts are
/// drawn well apart per state. The first half of the features (rounded up)
/// shift with the *next* month's state so rules learned from month `m`
/// predict month `m + 1`; the rest are seasonal noise.
pub fn synth_generate(seed: u64, config: &SynthConfig) -> Result<ObservationMatrix> {
    if config.regions == 0 || config.months == 0 || config.features == 0 {
        return Err(Error::invalid("synthetic dimensions must be positive"));
    }
    if !(config.outbreak_rate > 0.0 && config.outbreak_rate < 1.0) {
        return Err(Error::invalid("outbreak rate must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.35).expect("valid sigma");

    let stay_high = 0.6;
    let rate = config.outbreak_rate;
    let enter_high = (rate * (1.0 - stay_high) / (1.0 - rate)).min(1.0);

    let informative = config.features.div_ceil(2);
    let scales: Vec<(f64, f64)> = (0..config.features)
        .map(|j| (10.0 * (j + 1) as f64, 1.0 + j as f64))
        .collect();
    let phases: Vec<f64> = (0..config.features).map(|j| j as f64 * 0.7).collect();

    let mut rows = Vec::with_capacity(config.regions * config.months);
    for r in 0..config.regions {
        let region = format!("R{:02}", r + 1);
        let mut high = Vec::with_capacity(config.months + 1);
        let mut state = rng.random_bool(rate);
        for _ in 0..=config.months {
            high.push(state);
            let p = if state { stay_high } else { enter_high };
            state = rng.random_bool(p);
        }
        let region_scale = 1.0 + 0.5 * rng.random::<f64>();
        for t in 0..config.months {
            let month = YearMonth::from_index(config.start.index() + t as i64);
            let signal = if high[t + 1] { 1.0 } else { 0.0 };
            let season = 2.0 * std::f64::consts::PI * (month.month as f64 - 1.0) / 12.0;
            let features = (0..config.features)
                .map(|j| {
                    let (offset, scale) = scales[j];
                    let weight = if j < informative {
                        2.0 - j as f64 * 0.2
                    } else {
                        0.0
                    };
                    let x =
                        0.3 * (season + phases[j]).sin() + weight * signal + noise.sample(&mut rng);
                    offset + scale * x
                })
                .collect();
            let dengue = if high[t] {
                (region_scale * (150.0 + 150.0 * rng.random::<f64>())).round()
            } else {
                (region_scale * (5.0 + 40.0 * rng.random::<f64>())).round()
            };
            rows.push(MatrixRow {
                region: region.clone(),
                month,
                features,
                dengue,
            });
        }
    }
    ObservationMatrix::new((0..config.features).map(feature_name).collect(), rows)
}
