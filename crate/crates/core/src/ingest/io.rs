use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::matrix::{MatrixRow, ObservationMatrix};
use super::series::{FeatureSeries, Sample, YearMonth};
use crate::error::{Error, Result};

/// Which CSV columns carry the region, the date and the values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub region_column: String,
    pub date_column: String,
    /// `None` takes every remaining column as a value column.
    pub value_columns: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            region_column: "region".into(),
            date_column: "date".into(),
            value_columns: None,
        }
    }
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .or_else(|| NaiveDate::parse_from_str(&format!("{raw}-01"), "%Y-%m-%d").ok())
}

fn parse_value(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads `region,date,<values...>` rows into one series per (region, value column).
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<FeatureSeries>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_series(file, schema, path)
}

pub fn read_series<R: Read>(
    reader: R,
    schema: &CsvSchema,
    origin: &Path,
) -> Result<Vec<FeatureSeries>> {
    let csv_err = |source| Error::Csv {
        path: origin.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::Headers)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format {
                path: origin.to_path_buf(),
                message: format!("missing column {name:?}"),
            })
    };
    let region_idx = find(&schema.region_column)?;
    let date_idx = find(&schema.date_column)?;
    let value_cols: Vec<(usize, String)> = match &schema.value_columns {
        Some(names) => names
            .iter()
            .map(|n| find(n).map(|i| (i, n.clone())))
            .collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != region_idx && i != date_idx)
            .map(|(i, h)| (i, h.to_string()))
            .collect(),
    };
    if value_cols.is_empty() {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            message: "no value columns".into(),
        });
    }

    let mut rows: BTreeMap<String, BTreeMap<NaiveDate, Vec<Option<f64>>>> = BTreeMap::new();
    let mut parsed = 0usize;
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let region = record.get(region_idx).unwrap_or("").trim();
        let date = record.get(date_idx).and_then(parse_date);
        let (false, Some(date)) = (region.is_empty(), date) else {
            log::warn!(
                "{}: skipping line {line} (no region or unparseable date)",
                origin.display()
            );
            continue;
        };
        let values = value_cols
            .iter()
            .map(|&(i, _)| record.get(i).and_then(parse_value))
            .collect();
        let per_region = rows.entry(region.to_string()).or_default();
        if per_region.insert(date, values).is_some() {
            return Err(Error::DuplicateRow {
                region: region.to_string(),
                date: date.to_string(),
                line,
            });
        }
        parsed += 1;
    }
    if parsed == 0 {
        return Err(Error::NoRows(origin.to_path_buf()));
    }

    let mut out = Vec::with_capacity(rows.len() * value_cols.len());
    for (region, by_date) in &rows {
        for (col, (_, name)) in value_cols.iter().enumerate() {
            let samples = by_date
                .iter()
                .map(|(&date, values)| Sample::new(date, values[col]))
                .collect();
            out.push(FeatureSeries::new(region.clone(), name.clone(), samples)?);
        }
    }
    Ok(out)
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes series sharing a feature layout back out as `region,date,<features...>`.
///
/// Series are grouped by region; every region must carry the same feature
/// names and timestamps.
pub fn write_series_csv<W: Write>(writer: W, series: &[FeatureSeries]) -> Result<()> {
    let mut features: Vec<&str> = Vec::new();
    let mut by_region: BTreeMap<&str, Vec<&FeatureSeries>> = BTreeMap::new();
    for s in series {
        if !features.contains(&s.feature()) {
            features.push(s.feature());
        }
        by_region.entry(s.region()).or_default().push(s);
    }
    let io_err = |e: csv::Error| Error::Csv {
        path: "<output>".into(),
        source: e,
    };
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["region", "date"];
    header.extend(&features);
    w.write_record(&header).map_err(io_err)?;
    for (region, group) in by_region {
        if group.len() != features.len() {
            return Err(Error::invalid(format!(
                "region {region} lacks some features"
            )));
        }
        let dates: Vec<NaiveDate> = group[0].samples().iter().map(|s| s.date).collect();
        for (i, date) in dates.iter().enumerate() {
            let mut record = vec![region.to_string(), date.to_string()];
            for f in &features {
                let s = group.iter().find(|s| s.feature() == *f).unwrap();
                let sample = s
                    .samples()
                    .get(i)
                    .filter(|x| x.date == *date)
                    .ok_or_else(|| {
                        Error::invalid(format!("series {region}/{f} not aligned with its region"))
                    })?;
                record.push(fmt_value(sample.value));
            }
            w.write_record(&record).map_err(io_err)?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

const DENGUE_COLUMN: &str = "dengue_cases";

/// Writes `region,year,month,<features...>,dengue_cases`.
pub fn write_matrix_csv(path: &Path, matrix: &ObservationMatrix) -> Result<()> {
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header = vec!["region", "year", "month"];
    header.extend(matrix.features.iter().map(String::as_str));
    header.push(DENGUE_COLUMN);
    w.write_record(&header).map_err(err)?;
    for row in &matrix.rows {
        let mut record = vec![
            row.region.clone(),
            row.month.year.to_string(),
            row.month.month.to_string(),
        ];
        record.extend(row.features.iter().map(|v| v.to_string()));
        record.push(row.dengue.to_string());
        w.write_record(&record).map_err(err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_matrix_csv(path: &Path) -> Result<ObservationMatrix> {
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(err)?;
    let headers = rdr.headers().map_err(err)?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 5
        || cols[..3] != ["region", "year", "month"]
        || cols[cols.len() - 1] != DENGUE_COLUMN
    {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            expected: format!("region,year,month,<features...>,{DENGUE_COLUMN}"),
            found: cols.join(","),
        });
    }
    let features: Vec<String> = cols[3..cols.len() - 1]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(err)?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("line {line}: bad number {:?}", &record[i])))
        };
        let year: i32 = record[1]
            .parse()
            .map_err(|_| bad(format!("line {line}: bad year")))?;
        let month = record[2]
            .parse()
            .ok()
            .and_then(|m| YearMonth::new(year, m))
            .ok_or_else(|| bad(format!("line {line}: bad month")))?;
        rows.push(MatrixRow {
            region: record[0].to_string(),
            month,
            features: (3..cols.len() - 1).map(num).collect::<Result<_>>()?,
            dengue: num(cols.len() - 1)?,
        });
    }
    ObservationMatrix::new(features, rows)
}
