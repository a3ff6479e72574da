use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12)
            .contains(&month)
            .then_some(YearMonth { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        YearMonth {
            year: date.year(),
            month: date.month(),
        }
    }

    /// Months since year 0, used for month arithmetic.
    pub fn index(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_index(index: i64) -> Self {
        YearMonth {
            year: index.div_euclid(12) as i32,
            month: index.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn succ(self) -> Self {
        Self::from_index(self.index() + 1)
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("month validated at construction")
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub date: NaiveDate,
    pub value: Option<f64>,
}

impl Sample {
    pub fn new(date: NaiveDate, value: Option<f64>) -> Self {
        Sample { date, value }
    }
}

/// One region's time-stamped values for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    region: String,
    feature: String,
    samples: Vec<Sample>,
}

impl FeatureSeries {
    pub fn new(
        region: impl Into<String>,
        feature: impl Into<String>,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        let region = region.into();
        let feature = feature.into();
        if region.is_empty() || feature.is_empty() {
            return Err(Error::invalid(
                "series region and feature must be non-empty",
            ));
        }
        if let Some(w) = samples.windows(2).find(|w| w[0].date >= w[1].date) {
            return Err(Error::invalid(format!(
                "series {region}/{feature}: timestamps not strictly increasing at {}",
                w[1].date
            )));
        }
        Ok(FeatureSeries {
            region,
            feature,
            samples,
        })
    }

    /// Builds a monthly series starting at `start` from consecutive values.
    pub fn monthly(
        region: impl Into<String>,
        feature: impl Into<String>,
        start: YearMonth,
        values: impl IntoIterator<Item = Option<f64>>,
    ) -> Result<Self> {
        let base = start.index();
        let samples = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| Sample::new(YearMonth::from_index(base + i as i64).first_day(), v))
            .collect();
        Self::new(region, feature, samples)
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn feature(&self) -> &str {
        &self.feature
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.samples.iter().map(|s| s.value).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_month(&self) -> Option<YearMonth> {
        self.samples.first().map(|s| YearMonth::of(s.date))
    }

    pub fn last_month(&self) -> Option<YearMonth> {
        self.samples.last().map(|s| YearMonth::of(s.date))
    }

    /// True when there is exactly one first-of-month sample per consecutive month.
    pub fn is_monthly(&self) -> bool {
        self.samples.iter().all(|s| s.date.day() == 1)
            && self
                .samples
                .windows(2)
                .all(|w| YearMonth::of(w[0].date).succ() == YearMonth::of(w[1].date))
    }

    fn with_samples(&self, samples: Vec<Sample>) -> Self {
        FeatureSeries {
            region: self.region.clone(),
            feature: self.feature.clone(),
            samples,
        }
    }
}

/// Aggregates a series to one sample per calendar month.
///
/// Months with at least one present value take the arithmetic mean of that
/// month's values; months without any are materialized as missing. The
/// output spans the first to the last input month and is dated on the 1st.
pub fn resample_monthly(series: &FeatureSeries) -> FeatureSeries {
    let mut buckets: BTreeMap<YearMonth, (f64, usize)> = BTreeMap::new();
    for s in &series.samples {
        let slot = buckets.entry(YearMonth::of(s.date)).or_insert((0.0, 0));
        if let Some(v) = s.value {
            slot.0 += v;
            slot.1 += 1;
        }
    }
    let (Some(first), Some(last)) = (series.first_month(), series.last_month()) else {
        return series.with_samples(Vec::new());
    };
    let samples = (first.index()..=last.index())
        .map(YearMonth::from_index)
        .map(|ym| {
            let value = match buckets.get(&ym) {
                Some(&(sum, n)) if n > 0 => Some(sum / n as f64),
                _ => None,
            };
            Sample::new(ym.first_day(), value)
        })
        .collect();
    series.with_samples(samples)
}

/// Fills missing values of a monthly series.
///
/// Interior gaps are linearly interpolated in month index between the
/// nearest present neighbours; leading and trailing gaps take the nearest
/// present value.
pub fn interpolate_missing(series: &FeatureSeries) -> Result<FeatureSeries> {
    let present: Vec<(usize, f64)> = series
        .samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.value.map(|v| (i, v)))
        .collect();
    if present.len() < 2 {
        return Err(Error::TooFewSamples {
            region: series.region.clone(),
            feature: series.feature.clone(),
            found: present.len(),
        });
    }
    let mut samples = series.samples.clone();
    let (first_i, first_v) = present[0];
    let (last_i, last_v) = present[present.len() - 1];
    for s in &mut samples[..first_i] {
        s.value = Some(first_v);
    }
    for s in &mut samples[last_i + 1..] {
        s.value = Some(last_v);
    }
    for pair in present.windows(2) {
        let (i0, v0) = pair[0];
        let (i1, v1) = pair[1];
        let span = (i1 - i0) as f64;
        for (i, s) in samples.iter_mut().enumerate().take(i1).skip(i0 + 1) {
            let t = (i - i0) as f64 / span;
            s.value = Some(v0 + (v1 - v0) * t);
        }
    }
    Ok(series.with_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn monthly(values: &[Option<f64>]) -> FeatureSeries {
        FeatureSeries::monthly(
            "NCR",
            "rainfall",
            YearMonth::new(2001, 1).unwrap(),
            values.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn year_month_arithmetic() {
        let dec = YearMonth::new(2001, 12).unwrap();
        assert_eq!(dec.succ(), YearMonth::new(2002, 1).unwrap());
        assert_eq!(YearMonth::from_index(dec.index()), dec);
        assert!(YearMonth::new(2001, 13).is_none());
        assert_eq!(dec.to_string(), "2001-12");
    }

    #[test]
    fn rejects_unordered_samples() {
        let samples = vec![
            Sample::new(date(2001, 2, 1), Some(1.0)),
            Sample::new(date(2001, 1, 1), Some(1.0)),
        ];
        assert!(FeatureSeries::new("r", "f", samples).is_err());
        assert!(FeatureSeries::new("", "f", vec![]).is_err());
    }

    #[test]
    fn resample_means_within_month() {
        let s = FeatureSeries::new(
            "r",
            "f",
            vec![
                Sample::new(date(2001, 1, 3), Some(1.0)),
                Sample::new(date(2001, 1, 20), Some(3.0)),
            ],
        )
        .unwrap();
        let m = resample_monthly(&s);
        assert_eq!(m.values(), vec![Some(2.0)]);
        assert_eq!(m.samples()[0].date, date(2001, 1, 1));
    }

    #[test]
    fn resample_materializes_gaps() {
        let s = FeatureSeries::new(
            "r",
            "f",
            vec![
                Sample::new(date(2001, 1, 15), Some(4.0)),
                Sample::new(date(2001, 3, 2), Some(6.0)),
            ],
        )
        .unwrap();
        let m = resample_monthly(&s);
        assert_eq!(m.values(), vec![Some(4.0), None, Some(6.0)]);
        assert!(m.is_monthly());
    }

    #[test]
    fn resample_single_sample() {
        let s =
            FeatureSeries::new("r", "f", vec![Sample::new(date(2003, 7, 9), Some(5.0))]).unwrap();
        assert_eq!(resample_monthly(&s).values(), vec![Some(5.0)]);
    }

    #[test]
    fn resample_ignores_missing_in_mean() {
        let s = FeatureSeries::new(
            "r",
            "f",
            vec![
                Sample::new(date(2001, 1, 1), None),
                Sample::new(date(2001, 1, 2), Some(8.0)),
                Sample::new(date(2001, 2, 2), None),
            ],
        )
        .unwrap();
        assert_eq!(resample_monthly(&s).values(), vec![Some(8.0), None]);
    }

    #[test]
    fn interpolates_midpoint() {
        let s = interpolate_missing(&monthly(&[Some(10.0), None, Some(20.0)])).unwrap();
        assert_eq!(s.values(), vec![Some(10.0), Some(15.0), Some(20.0)]);
    }

    #[test]
    fn flat_leading_and_trailing() {
        let s = interpolate_missing(&monthly(&[None, Some(5.0), Some(7.0)])).unwrap();
        assert_eq!(s.values(), vec![Some(5.0), Some(5.0), Some(7.0)]);
        let s = interpolate_missing(&monthly(&[Some(1.0), Some(2.0), None, None])).unwrap();
        assert_eq!(s.values(), vec![Some(1.0), Some(2.0), Some(2.0), Some(2.0)]);
    }

    #[test]
    fn interpolates_longer_run() {
        // line through (0, 0) and (3, 9): 3 per month
        let s = interpolate_missing(&monthly(&[Some(0.0), None, None, Some(9.0)])).unwrap();
        assert_eq!(s.values(), vec![Some(0.0), Some(3.0), Some(6.0), Some(9.0)]);
    }

    #[test]
    fn interpolation_needs_two_points() {
        let err = interpolate_missing(&monthly(&[None, Some(1.0), None])).unwrap_err();
        assert!(err.to_string().contains("NCR/rainfall"), "{err}");
    }
}
