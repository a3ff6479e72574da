//! First-match rule-based classification of next-month dengue class.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzify::{DengueClass, ItemCatalog, ItemId, Transaction};
use crate::ingest::YearMonth;
use crate::mine::{is_subset, AssociationRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortKey {
    /// Higher confidence first.
    Confidence,
    /// More antecedent items first.
    Antecedents,
    /// Higher lift first.
    Lift,
    /// High-consequent rules before Low.
    Consequent,
}

pub const DEFAULT_SORT_KEYS: [SortKey; 4] = [
    SortKey::Confidence,
    SortKey::Antecedents,
    SortKey::Lift,
    SortKey::Consequent,
];

impl SortKey {
    pub fn name(self) -> &'static str {
        match self {
            SortKey::Confidence => "confidence",
            SortKey::Antecedents => "antecedents",
            SortKey::Lift => "lift",
            SortKey::Consequent => "consequent",
        }
    }

    fn compare(self, a: &ClassRule, b: &ClassRule) -> Ordering {
        match self {
            SortKey::Confidence => b.confidence.total_cmp(&a.confidence),
            SortKey::Antecedents => b.antecedent.len().cmp(&a.antecedent.len()),
            SortKey::Lift => b.lift.total_cmp(&a.lift),
            SortKey::Consequent => a.class.cmp(&b.class),
        }
    }
}

impl fmt::Display for SortKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SortKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "confidence" => Ok(SortKey::Confidence),
            "antecedents" => Ok(SortKey::Antecedents),
            "lift" => Ok(SortKey::Lift),
            "consequent" => Ok(SortKey::Consequent),
            other => Err(Error::invalid(format!("unknown sort key {other:?}"))),
        }
    }
}

/// Parses a comma-separated key list such as `confidence,antecedents,lift`.
pub fn parse_sort_keys(s: &str) -> Result<Vec<SortKey>> {
    let keys = s
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<SortKey>>>()?;
    for (i, k) in keys.iter().enumerate() {
        if keys[..i].contains(k) {
            return Err(Error::invalid(format!("sort key {k} repeated")));
        }
    }
    Ok(keys)
}

/// A rule whose consequent is resolved to a dengue class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRule {
    pub antecedent: Vec<ItemId>,
    /// Antecedent tokens, sorted; the final tiebreak.
    pub tokens: Vec<String>,
    pub class: DengueClass,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleBook {
    rules: Vec<ClassRule>,
    default_class: DengueClass,
    sort_keys: Vec<SortKey>,
}

/// Sorts rules by `keys` (then antecedent tokens) into a rule book that
/// falls back to Low.
pub fn sort_rules(
    rules: &[AssociationRule],
    catalog: &ItemCatalog,
    keys: &[SortKey],
) -> Result<RuleBook> {
    let mut out = rules
        .iter()
        .map(|r| {
            let class = DengueClass::from_item(r.consequent).ok_or_else(|| {
                Error::invalid(format!(
                    "rule consequent {} is not a class item",
                    catalog.token(r.consequent)
                ))
            })?;
            let mut tokens: Vec<String> = r.antecedent.iter().map(|&i| catalog.token(i)).collect();
            tokens.sort();
            Ok(ClassRule {
                antecedent: r.antecedent.clone(),
                tokens,
                class,
                support: r.support,
                confidence: r.confidence,
                lift: r.lift,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| {
        keys.iter()
            .map(|k| k.compare(a, b))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| a.tokens.cmp(&b.tokens).then(a.class.cmp(&b.class)))
    });
    Ok(RuleBook {
        rules: out,
        default_class: DengueClass::Low,
        sort_keys: keys.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub class: DengueClass,
    /// Index of the first matching rule; `None` means the default class was used.
    pub fired: Option<usize>,
}

impl RuleBook {
    pub fn from_sorted(
        rules: Vec<ClassRule>,
        default_class: DengueClass,
        sort_keys: Vec<SortKey>,
    ) -> Self {
        RuleBook {
            rules,
            default_class,
            sort_keys,
        }
    }

    pub fn rules(&self) -> &[ClassRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn default_class(&self) -> DengueClass {
        self.default_class
    }

    pub fn sort_keys(&self) -> &[SortKey] {
        &self.sort_keys
    }

    /// First rule whose antecedent is contained in the sorted `items`.
    pub fn predict(&self, items: &[ItemId]) -> Prediction {
        match self
            .rules
            .iter()
            .position(|r| is_subset(&r.antecedent, items))
        {
            Some(i) => Prediction {
                class: self.rules[i].class,
                fired: Some(i),
            },
            None => Prediction {
                class: self.default_class,
                fired: None,
            },
        }
    }
}

pub fn predict(book: &RuleBook, items: &[ItemId]) -> DengueClass {
    book.predict(items).class
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted: DengueClass, truth: DengueClass) {
        use DengueClass::*;
        match (predicted, truth) {
            (High, High) => self.tp += 1,
            (High, Low) => self.fp += 1,
            (Low, Low) => self.tn += 1,
            (Low, High) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// One line of the prediction log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub region: String,
    pub month: YearMonth,
    pub predicted: DengueClass,
    pub truth: DengueClass,
    pub fired_rule_index: Option<usize>,
}

impl PredictionRecord {
    pub fn defaulted(&self) -> bool {
        self.fired_rule_index.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub matrix: ConfusionMatrix,
    pub defaulted: u64,
    pub predictions: Vec<PredictionRecord>,
}

impl Evaluation {
    pub fn from_predictions(predictions: Vec<PredictionRecord>) -> Self {
        let mut matrix = ConfusionMatrix::default();
        let mut defaulted = 0;
        for p in &predictions {
            matrix.record(p.predicted, p.truth);
            defaulted += p.defaulted() as u64;
        }
        Evaluation {
            matrix,
            defaulted,
            predictions,
        }
    }
}

/// Classifies every test transaction and tallies the confusion matrix.
pub fn evaluate(book: &RuleBook, test: &[Transaction]) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty test set"));
    }
    let mut predictions = Vec::with_capacity(test.len());
    for t in test {
        let p = book.predict(&t.items);
        if let Some(i) = p.fired {
            if !is_subset(&book.rules[i].antecedent, &t.items) {
                return Err(Error::Consistency(format!(
                    "rule {i} fired on {}/{} without matching",
                    t.region, t.month
                )));
            }
        }
        predictions.push(PredictionRecord {
            region: t.region.clone(),
            month: t.month,
            predicted: p.class,
            truth: t.truth,
            fired_rule_index: p.fired,
        });
    }
    Ok(Evaluation::from_predictions(predictions))
}

const LOG_HEADER: [&str; 7] = [
    "region",
    "year",
    "month",
    "predicted",
    "truth",
    "fired_rule_index",
    "defaulted",
];

pub fn write_prediction_log(path: &Path, predictions: &[PredictionRecord]) -> Result<()> {
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(LOG_HEADER).map_err(err)?;
    for p in predictions {
        w.write_record([
            p.region.clone(),
            p.month.year.to_string(),
            p.month.month.to_string(),
            p.predicted.to_string(),
            p.truth.to_string(),
            p.fired_rule_index
                .map(|i| i.to_string())
                .unwrap_or_default(),
            p.defaulted().to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_prediction_log(path: &Path) -> Result<Vec<PredictionRecord>> {
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
    if headers.iter().ne(LOG_HEADER) {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            expected: LOG_HEADER.join(","),
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
        let class = |i: usize| {
            record[i]
                .parse::<DengueClass>()
                .map_err(|e| bad(format!("line {line}: {e}")))
        };
        let fired_rule_index = match &record[5] {
            "" => None,
            s => Some(
                s.parse()
                    .map_err(|_| bad(format!("line {line}: bad rule index")))?,
            ),
        };
        let defaulted: bool = record[6]
            .parse()
            .map_err(|_| bad(format!("line {line}: bad flag")))?;
        if defaulted != fired_rule_index.is_none() {
            return Err(bad(format!(
                "line {line}: defaulted flag disagrees with rule index"
            )));
        }
        out.push(PredictionRecord {
            region: record[0].to_string(),
            month,
            predicted: class(3)?,
            truth: class(4)?,
            fired_rule_index,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzify::ItemCatalog;

    fn catalog() -> ItemCatalog {
        let labels: Vec<String> = vec!["L1".into(), "L2".into()];
        ItemCatalog::new([
            ("a", labels.as_slice()),
            ("b", labels.as_slice()),
            ("c", labels.as_slice()),
        ])
        .unwrap()
    }

    fn rule(ante: &[ItemId], class: DengueClass, conf: f64, lift: f64) -> AssociationRule {
        AssociationRule {
            antecedent: ante.to_vec(),
            consequent: class.item(),
            support: 0.1,
            confidence: conf,
            lift,
        }
    }

    use DengueClass::{High, Low};

    #[test]
    fn confidence_first() {
        let cat = catalog();
        let book = sort_rules(
            &[rule(&[2], Low, 0.8, 1.0), rule(&[3], High, 0.9, 1.0)],
            &cat,
            &DEFAULT_SORT_KEYS,
        )
        .unwrap();
        assert_eq!(book.rules()[0].confidence, 0.9);
    }

    #[test]
    fn specificity_second() {
        let cat = catalog();
        let book = sort_rules(
            &[rule(&[2], Low, 0.9, 1.0), rule(&[2, 4, 6], Low, 0.9, 1.0)],
            &cat,
            &DEFAULT_SORT_KEYS,
        )
        .unwrap();
        assert_eq!(book.rules()[0].antecedent.len(), 3);
    }

    #[test]
    fn high_before_low_on_full_tie() {
        let cat = catalog();
        let book = sort_rules(
            &[rule(&[2], Low, 0.9, 1.2), rule(&[2], High, 0.9, 1.2)],
            &cat,
            &DEFAULT_SORT_KEYS,
        )
        .unwrap();
        assert_eq!(book.rules()[0].class, High);
    }

    #[test]
    fn configurable_key_order() {
        let cat = catalog();
        let keys = parse_sort_keys("consequent,confidence").unwrap();
        let book = sort_rules(
            &[rule(&[2], Low, 0.99, 1.0), rule(&[3], High, 0.5, 1.0)],
            &cat,
            &keys,
        )
        .unwrap();
        assert_eq!(book.rules()[0].class, High);
        assert!(parse_sort_keys("lift,lift").is_err());
        assert!(parse_sort_keys("support").is_err());
    }

    #[test]
    fn non_class_consequent_rejected() {
        let cat = catalog();
        let mut r = rule(&[2], High, 0.9, 1.0);
        r.consequent = 4;
        assert!(sort_rules(&[r], &cat, &DEFAULT_SORT_KEYS).is_err());
    }

    #[test]
    fn first_match_and_default() {
        let cat = catalog();
        let book = sort_rules(
            &[rule(&[2, 4], High, 0.95, 2.0), rule(&[5], Low, 0.9, 1.0)],
            &cat,
            &DEFAULT_SORT_KEYS,
        )
        .unwrap();
        assert_eq!(
            book.predict(&[2, 4, 6]),
            Prediction {
                class: High,
                fired: Some(0)
            }
        );
        assert_eq!(
            book.predict(&[3, 5, 6]),
            Prediction {
                class: Low,
                fired: Some(1)
            }
        );
        assert_eq!(
            book.predict(&[3, 4, 6]),
            Prediction {
                class: Low,
                fired: None
            }
        );
        assert_eq!(predict(&book, &[2, 4]), High);
    }

    fn tx(items: &[ItemId], truth: DengueClass) -> Transaction {
        Transaction {
            region: "A".into(),
            month: YearMonth::new(2001, 1).unwrap(),
            items: items.to_vec(),
            truth,
        }
    }

    #[test]
    fn perfect_classifier_matrix() {
        let cat = catalog();
        let book = sort_rules(&[rule(&[2], High, 1.0, 2.0)], &cat, &DEFAULT_SORT_KEYS).unwrap();
        let mut test: Vec<Transaction> = (0..3).map(|_| tx(&[2, 4], High)).collect();
        test.extend((0..7).map(|_| tx(&[3, 4], Low)));
        let ev = evaluate(&book, &test).unwrap();
        assert_eq!(
            ev.matrix,
            ConfusionMatrix {
                tp: 3,
                fp: 0,
                tn: 7,
                fn_: 0
            }
        );
        assert_eq!(ev.defaulted, 7);
        assert_eq!(ev.matrix.total(), 10);
    }

    #[test]
    fn empty_test_set_is_error() {
        let book = sort_rules(&[], &catalog(), &DEFAULT_SORT_KEYS).unwrap();
        assert!(evaluate(&book, &[]).is_err());
    }

    #[test]
    fn adding_items_never_unfires_a_rule() {
        let cat = catalog();
        let book = sort_rules(
            &[rule(&[2, 4], High, 0.95, 2.0), rule(&[5], Low, 0.9, 1.0)],
            &cat,
            &DEFAULT_SORT_KEYS,
        )
        .unwrap();
        let base = [2, 4];
        let before = book.predict(&base).fired.unwrap();
        for extra in [3, 5, 6, 7] {
            let mut items = base.to_vec();
            items.push(extra);
            items.sort_unstable();
            assert!(book.predict(&items).fired.unwrap() <= before);
        }
    }

    #[test]
    fn prediction_log_round_trip() {
        let cat = catalog();
        let book = sort_rules(&[rule(&[2], High, 1.0, 2.0)], &cat, &DEFAULT_SORT_KEYS).unwrap();
        let ev = evaluate(&book, &[tx(&[2, 4], High), tx(&[3, 4], Low)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_prediction_log(&path, &ev.predictions).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "region,year,month,predicted,truth,fired_rule_index,defaulted\n\
             A,2001,1,High,High,0,false\nA,2001,1,Low,Low,,true\n"
        );
        assert_eq!(read_prediction_log(&path).unwrap(), ev.predictions);
    }
}
