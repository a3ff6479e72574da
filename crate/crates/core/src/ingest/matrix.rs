use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::series::{FeatureSeries, YearMonth};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub min: f64,
    pub max: f64,
}

impl NormParams {
    pub fn apply(&self, x: f64) -> f64 {
        if self.max > self.min {
            (x - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    /// Inverse of [`apply`](Self::apply); a constant column maps back to its value.
    pub fn invert(&self, y: f64) -> f64 {
        self.min + y * (self.max - self.min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub region: String,
    pub month: YearMonth,
    pub features: Vec<f64>,
    pub dengue: f64,
}

/// Rectangular per-(region, month) table of feature values plus the raw
/// dengue case count. Rows are ordered by region, then month.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub features: Vec<String>,
    pub rows: Vec<MatrixRow>,
    /// Per-feature (min, max) recorded by [`normalize`].
    pub norm_params: Option<Vec<NormParams>>,
}

impl ObservationMatrix {
    pub fn new(features: Vec<String>, rows: Vec<MatrixRow>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.features.len() != features.len()) {
            return Err(Error::invalid(format!(
                "row {}/{} has {} feature values, expected {}",
                r.region,
                r.month,
                r.features.len(),
                features.len()
            )));
        }
        if let Some(w) = rows
            .windows(2)
            .find(|w| (&w[0].region, w[0].month) >= (&w[1].region, w[1].month))
        {
            return Err(Error::invalid(format!(
                "rows not ordered by (region, month) at {}/{}",
                w[1].region, w[1].month
            )));
        }
        Ok(ObservationMatrix {
            features,
            rows,
            norm_params: None,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn regions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.region.as_str()) {
                out.push(&r.region);
            }
        }
        out
    }

    pub fn column(&self, feature: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r.features[feature])
    }

    /// True when every region's months are consecutive.
    pub fn months_contiguous(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[0].region != w[1].region || w[0].month.succ() == w[1].month)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        ObservationMatrix {
            features: self.features.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            norm_params: self.norm_params.clone(),
        }
    }
}

/// Joins monthly, gap-free feature and dengue series into one matrix.
///
/// Each region contributes the months covered by every one of its feature
/// series and its dengue series.
pub fn assemble_matrix(
    all_series: &[FeatureSeries],
    dengue: &[FeatureSeries],
) -> Result<ObservationMatrix> {
    for s in all_series.iter().chain(dengue) {
        if !s.is_monthly() || s.samples().iter().any(|x| x.value.is_none()) {
            return Err(Error::invalid(format!(
                "series {}/{} is not a gap-free monthly series",
                s.region(),
                s.feature()
            )));
        }
    }

    let mut features: Vec<String> = Vec::new();
    let mut by_region: BTreeMap<&str, BTreeMap<&str, &FeatureSeries>> = BTreeMap::new();
    for s in all_series {
        if !features.iter().any(|f| f == s.feature()) {
            features.push(s.feature().to_string());
        }
        if by_region
            .entry(s.region())
            .or_default()
            .insert(s.feature(), s)
            .is_some()
        {
            return Err(Error::invalid(format!(
                "duplicate series {}/{}",
                s.region(),
                s.feature()
            )));
        }
    }
    let mut dengue_by_region: BTreeMap<&str, &FeatureSeries> = BTreeMap::new();
    for s in dengue {
        if dengue_by_region.insert(s.region(), s).is_some() {
            return Err(Error::invalid(format!(
                "duplicate dengue series for {}",
                s.region()
            )));
        }
    }

    let feature_regions: BTreeSet<&str> = by_region.keys().copied().collect();
    let dengue_regions: BTreeSet<&str> = dengue_by_region.keys().copied().collect();
    let unmatched: Vec<String> = feature_regions
        .symmetric_difference(&dengue_regions)
        .map(|r| r.to_string())
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::RegionMismatch(unmatched));
    }

    let mut rows = Vec::new();
    for (region, series) in &by_region {
        let mut parts: Vec<&FeatureSeries> = Vec::with_capacity(features.len() + 1);
        for f in &features {
            let s = series.get(f.as_str()).ok_or_else(|| {
                Error::invalid(format!("region {region} has no series for feature {f}"))
            })?;
            parts.push(s);
        }
        parts.push(dengue_by_region[region]);

        let start = parts.iter().filter_map(|s| s.first_month()).max();
        let end = parts.iter().filter_map(|s| s.last_month()).min();
        let (Some(start), Some(end)) = (start, end) else {
            return Err(Error::invalid(format!(
                "region {region} has an empty series"
            )));
        };
        if start > end {
            return Err(Error::invalid(format!(
                "region {region}: series have no common months"
            )));
        }
        let value_at = |s: &FeatureSeries, ym: YearMonth| -> f64 {
            let offset = (ym.index() - s.first_month().unwrap().index()) as usize;
            s.samples()[offset].value.unwrap()
        };
        for idx in start.index()..=end.index() {
            let ym = YearMonth::from_index(idx);
            let (dengue_series, feature_series) = parts.split_last().unwrap();
            rows.push(MatrixRow {
                region: region.to_string(),
                month: ym,
                features: feature_series.iter().map(|s| value_at(s, ym)).collect(),
                dengue: value_at(dengue_series, ym),
            });
        }
    }
    ObservationMatrix::new(features, rows)
}

/// Global min-max scaling of every feature column to [0, 1].
///
/// The dengue column is left untouched. A constant column maps to 0.
pub fn normalize(matrix: &ObservationMatrix) -> ObservationMatrix {
    let params: Vec<NormParams> = (0..matrix.features.len())
        .map(|j| {
            let (min, max) = matrix
                .column(j)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                    (lo.min(x), hi.max(x))
                });
            if max <= min {
                log::warn!(
                    "feature {} is constant; normalized to 0.0",
                    matrix.features[j]
                );
            }
            NormParams { min, max }
        })
        .collect();
    let rows = matrix
        .rows
        .iter()
        .map(|r| MatrixRow {
            features: r
                .features
                .iter()
                .zip(&params)
                .map(|(&x, p)| p.apply(x))
                .collect(),
            ..r.clone()
        })
        .collect();
    ObservationMatrix {
        features: matrix.features.clone(),
        rows,
        norm_params: Some(params),
    }
}

/// Splits a matrix back into per-region feature series and dengue series,
/// the inverse of [`assemble_matrix`] for a matrix with contiguous months.
pub fn matrix_series(
    matrix: &ObservationMatrix,
    dengue_name: &str,
) -> Result<(Vec<FeatureSeries>, Vec<FeatureSeries>)> {
    if !matrix.months_contiguous() {
        return Err(Error::invalid(
            "matrix months are not contiguous per region",
        ));
    }
    let mut features = Vec::new();
    let mut dengue = Vec::new();
    let mut start = 0;
    while start < matrix.rows.len() {
        let region = &matrix.rows[start].region;
        let end = start
            + matrix.rows[start..]
                .iter()
                .take_while(|r| &r.region == region)
                .count();
        let rows = &matrix.rows[start..end];
        let first = rows[0].month;
        for (j, name) in matrix.features.iter().enumerate() {
            features.push(FeatureSeries::monthly(
                region.clone(),
                name.clone(),
                first,
                rows.iter().map(|r| Some(r.features[j])),
            )?);
        }
        dengue.push(FeatureSeries::monthly(
            region.clone(),
            dengue_name,
            first,
            rows.iter().map(|r| Some(r.dengue)),
        )?);
        start = end;
    }
    Ok((features, dengue))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stride_offset: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            stride_offset: 0,
        }
    }
}

impl SplitSpec {
    /// Sampling stride `k = 1 / (1 - train_fraction)`.
    pub fn stride(&self) -> Result<usize> {
        let p = self.train_fraction;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("train fraction {p} outside (0, 1)")));
        }
        let k = 1.0 / (1.0 - p);
        let rounded = k.round();
        if (k - rounded).abs() > 1e-9 * k || rounded < 2.0 {
            return Err(Error::invalid(format!(
                "train fraction {p} does not give an integer sampling stride (1/(1-p) = {k})"
            )));
        }
        let k = rounded as usize;
        if self.stride_offset >= k {
            return Err(Error::invalid(format!(
                "stride offset {} must be below the stride {k}",
                self.stride_offset
            )));
        }
        Ok(k)
    }
}

/// Systematic sampling: index `i` is a test row iff `i mod k == offset`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = spec.stride()?;
    Ok((0..n).partition(|i| i % k != spec.stride_offset))
}

pub fn systematic_split(
    matrix: &ObservationMatrix,
    spec: &SplitSpec,
) -> Result<(ObservationMatrix, ObservationMatrix)> {
    let (train, test) = split_indices(matrix.len(), spec)?;
    Ok((matrix.subset(&train), matrix.subset(&test)))
}
