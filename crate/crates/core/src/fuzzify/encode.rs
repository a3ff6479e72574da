use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kmeans::Centroids;
use super::sets::FuzzySetDef;
use crate::error::{Error, Result};
use crate::ingest::{ObservationMatrix, YearMonth};

pub type ItemId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DengueClass {
    High,
    Low,
}

impl DengueClass {
    /// Class of a case count: High iff strictly nearer the top centroid than
    /// to every other centroid.
    pub fn of_count(count: f64, centers: &[f64]) -> Self {
        let Some((&top, rest)) = centers.split_last() else {
            return DengueClass::Low;
        };
        let d_top = (count - top).abs();
        if rest.iter().all(|&c| d_top < (count - c).abs()) {
            DengueClass::High
        } else {
            DengueClass::Low
        }
    }

    pub fn item(self) -> ItemId {
        match self {
            DengueClass::High => 0,
            DengueClass::Low => 1,
        }
    }

    pub fn from_item(id: ItemId) -> Option<Self> {
        match id {
            0 => Some(DengueClass::High),
            1 => Some(DengueClass::Low),
            _ => None,
        }
    }
}

impl fmt::Display for DengueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DengueClass::High => "High",
            DengueClass::Low => "Low",
        })
    }
}

impl FromStr for DengueClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "High" => Ok(DengueClass::High),
            "Low" => Ok(DengueClass::Low),
            other => Err(Error::invalid(format!("unknown dengue class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Item {
    pub id: ItemId,
    pub feature: String,
    pub label: String,
}

impl Item {
    pub fn token(&self) -> String {
        format!("{}={}", self.feature, self.label)
    }
}

pub const CLASS_FEATURE: &str = "dengue_next";

/// Dense bijection between (feature, label) pairs and item ids.
///
/// Ids 0 and 1 are the High and Low next-month classes; feature items
/// follow in feature order, labels ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemCatalog {
    items: Vec<Item>,
    offsets: Vec<ItemId>,
    by_token: HashMap<String, ItemId>,
}

impl ItemCatalog {
    pub fn new<'a>(families: impl IntoIterator<Item = (&'a str, &'a [String])>) -> Result<Self> {
        let mut items = vec![
            Item {
                id: 0,
                feature: CLASS_FEATURE.into(),
                label: DengueClass::High.to_string(),
            },
            Item {
                id: 1,
                feature: CLASS_FEATURE.into(),
                label: DengueClass::Low.to_string(),
            },
        ];
        let mut offsets = Vec::new();
        for (feature, labels) in families {
            if feature.is_empty() || feature.contains([' ', ',', '=']) || feature == CLASS_FEATURE {
                return Err(Error::invalid(format!(
                    "feature name {feature:?} cannot be used in item tokens"
                )));
            }
            offsets.push(items.len() as ItemId);
            for label in labels {
                items.push(Item {
                    id: items.len() as ItemId,
                    feature: feature.to_string(),
                    label: label.clone(),
                });
            }
        }
        let mut by_token = HashMap::with_capacity(items.len());
        for item in &items {
            if by_token.insert(item.token(), item.id).is_some() {
                return Err(Error::invalid(format!("duplicate item {}", item.token())));
            }
        }
        Ok(ItemCatalog {
            items,
            offsets,
            by_token,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: ItemId) -> &Item {
        &self.items[id as usize]
    }

    pub fn token(&self, id: ItemId) -> String {
        self.item(id).token()
    }

    pub fn id(&self, token: &str) -> Option<ItemId> {
        self.by_token.get(token).copied()
    }

    pub fn feature_item(&self, feature: usize, label: usize) -> ItemId {
        self.offsets[feature] + label as ItemId
    }

    pub fn class_items(&self) -> [ItemId; 2] {
        [DengueClass::High.item(), DengueClass::Low.item()]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Encoding {
    /// One item per feature: the set with the highest membership, lower label on ties.
    #[default]
    Argmax,
    /// Every set whose membership is at least `alpha`.
    AlphaCut { alpha: f64 },
}

/// Items for one row of normalized feature values, sorted by id.
pub fn fuzzify_row(
    values: &[f64],
    families: &[Vec<FuzzySetDef>],
    catalog: &ItemCatalog,
    mode: Encoding,
) -> Result<Vec<ItemId>> {
    if values.len() != families.len() {
        return Err(Error::invalid(format!(
            "row has {} values for {} fuzzy families",
            values.len(),
            families.len()
        )));
    }
    let mut items = Vec::with_capacity(values.len());
    for (j, (&x, sets)) in values.iter().zip(families).enumerate() {
        match mode {
            Encoding::Argmax => {
                let mut best = 0;
                let mut best_m = f64::NEG_INFINITY;
                for (i, s) in sets.iter().enumerate() {
                    let m = s.membership(x);
                    if m > best_m {
                        best = i;
                        best_m = m;
                    }
                }
                items.push(catalog.feature_item(j, best));
            }
            Encoding::AlphaCut { alpha } => {
                items.extend(
                    sets.iter()
                        .enumerate()
                        .filter(|(_, s)| s.membership(x) >= alpha)
                        .map(|(i, _)| catalog.feature_item(j, i)),
                );
            }
        }
    }
    items.sort_unstable();
    Ok(items)
}

/// Fuzzy items of one (region, month) and the class of the month after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub region: String,
    pub month: YearMonth,
    pub items: Vec<ItemId>,
    pub truth: DengueClass,
}

/// Encodes every row that has a successor month in the same region.
///
/// `matrix` must already be normalized. The last month of each region has
/// no successor and is dropped.
pub fn encode_transactions(
    matrix: &ObservationMatrix,
    families: &[Vec<FuzzySetDef>],
    dengue: &Centroids,
    catalog: &ItemCatalog,
    mode: Encoding,
) -> Result<Vec<Transaction>> {
    if dengue.k() < 2 {
        return Err(Error::invalid("dengue classes need at least 2 centroids"));
    }
    let rows = &matrix.rows;
    let mut out = Vec::with_capacity(rows.len());
    let mut run = 1usize;
    for (i, row) in rows.iter().enumerate() {
        let next = rows.get(i + 1).filter(|n| n.region == row.region);
        let Some(next) = next else {
            if run < 2 {
                log::warn!("region {} has fewer than 2 months; skipped", row.region);
            }
            run = 1;
            continue;
        };
        run += 1;
        if next.month != row.month.succ() {
            log::warn!("region {}: no successor for {}", row.region, row.month);
            continue;
        }
        let items = fuzzify_row(&row.features, families, catalog, mode)?;
        if items.is_empty() {
            log::warn!(
                "{}/{} produced no items at this alpha-cut; skipped",
                row.region,
                row.month
            );
            continue;
        }
        out.push(Transaction {
            region: row.region.clone(),
            month: row.month,
            items,
            truth: DengueClass::of_count(next.dengue, &dengue.centers),
        });
    }
    Ok(out)
}

const TRANSACTION_HEADER: [&str; 5] = ["region", "year", "month", "items", "truth"];

pub fn write_transactions(
    path: &Path,
    transactions: &[Transaction],
    catalog: &ItemCatalog,
) -> Result<()> {
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(TRANSACTION_HEADER).map_err(err)?;
    for t in transactions {
        let tokens: Vec<String> = t.items.iter().map(|&id| catalog.token(id)).collect();
        w.write_record([
            t.region.clone(),
            t.month.year.to_string(),
            t.month.month.to_string(),
            tokens.join(" "),
            t.truth.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_transactions(path: &Path, catalog: &ItemCatalog) -> Result<Vec<Transaction>> {
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
    if headers.iter().ne(TRANSACTION_HEADER) {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            expected: TRANSACTION_HEADER.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(err)?;
        let line = record.position().map_or(0, |p| p.line());
        let year: i32 = record[1]
            .parse()
            .map_err(|_| bad(format!("line {line}: bad year")))?;
        let month = record[2]
            .parse()
            .ok()
            .and_then(|m| YearMonth::new(year, m))
            .ok_or_else(|| bad(format!("line {line}: bad month")))?;
        let mut items = record[3]
            .split_whitespace()
            .map(|tok| {
                catalog
                    .id(tok)
                    .ok_or_else(|| bad(format!("line {line}: unknown item {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        items.sort_unstable();
        out.push(Transaction {
            region: record[0].to_string(),
            month,
            items,
            truth: record[4]
                .parse()
                .map_err(|e: Error| bad(format!("line {line}: {e}")))?,
        });
    }
    Ok(out)
}
