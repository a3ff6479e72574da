use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FrequentItemSet, ItemId};
use crate::error::{Error, Result};
use crate::fuzzify::ItemCatalog;

/// `antecedent -> consequent` with a single class-item consequent.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationRule {
    /// Sorted; never contains a consequent item.
    pub antecedent: Vec<ItemId>,
    pub consequent: ItemId,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
}

/// Derives rules from a subset-closed collection of frequent itemsets.
///
/// Every itemset holding exactly one of `consequents` yields
/// `itemset - {c} -> c` when its confidence reaches `min_confidence`.
pub fn generate_rules(
    itemsets: &[FrequentItemSet],
    n_transactions: usize,
    min_confidence: f64,
    consequents: &[ItemId],
    allow_empty_antecedent: bool,
) -> Result<Vec<AssociationRule>> {
    if n_transactions == 0 {
        return Err(Error::invalid(
            "rule generation needs at least one transaction",
        ));
    }
    let counts: HashMap<&[ItemId], u64> = itemsets
        .iter()
        .map(|s| (s.items.as_slice(), s.support_count))
        .collect();
    let lookup = |items: &[ItemId]| -> Result<u64> {
        if items.is_empty() {
            return Ok(n_transactions as u64);
        }
        counts.get(items).copied().ok_or_else(|| {
            Error::Consistency(format!(
                "support of subset {items:?} missing from mined itemsets"
            ))
        })
    };
    let n = n_transactions as f64;
    let mut rules = Vec::new();
    for set in itemsets {
        let mut found = set.items.iter().filter(|i| consequents.contains(i));
        let (Some(&c), None) = (found.next(), found.next()) else {
            continue;
        };
        let antecedent: Vec<ItemId> = set.items.iter().copied().filter(|&i| i != c).collect();
        if antecedent.is_empty() && !allow_empty_antecedent {
            continue;
        }
        let confidence = set.support_count as f64 / lookup(&antecedent)? as f64;
        if confidence < min_confidence {
            continue;
        }
        let consequent_support = lookup(&[c])? as f64 / n;
        rules.push(AssociationRule {
            antecedent,
            consequent: c,
            support: set.support_count as f64 / n,
            confidence,
            lift: confidence / consequent_support,
        });
    }
    Ok(rules)
}

pub const RULES_SCHEMA: &str = "farm.rules/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub antecedent: Vec<String>,
    pub consequent: String,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
}

/// On-disk rule list, ordered by consequent token then antecedent tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulesFile {
    pub schema: String,
    pub algorithm: String,
    pub n_transactions: usize,
    pub min_support: f64,
    pub min_confidence: f64,
    pub itemset_count: usize,
    pub rules: Vec<RuleRecord>,
}

impl RulesFile {
    pub fn new(
        algorithm: &str,
        n_transactions: usize,
        min_support: f64,
        min_confidence: f64,
        itemset_count: usize,
        rules: &[AssociationRule],
        catalog: &ItemCatalog,
    ) -> Self {
        let mut records: Vec<RuleRecord> = rules
            .iter()
            .map(|r| {
                let mut antecedent: Vec<String> =
                    r.antecedent.iter().map(|&i| catalog.token(i)).collect();
                antecedent.sort();
                RuleRecord {
                    antecedent,
                    consequent: catalog.token(r.consequent),
                    support: r.support,
                    confidence: r.confidence,
                    lift: r.lift,
                }
            })
            .collect();
        records.sort_by(|a, b| (&a.consequent, &a.antecedent).cmp(&(&b.consequent, &b.antecedent)));
        RulesFile {
            schema: RULES_SCHEMA.into(),
            algorithm: algorithm.into(),
            n_transactions,
            min_support,
            min_confidence,
            itemset_count,
            rules: records,
        }
    }

    pub fn to_rules(&self, catalog: &ItemCatalog) -> Result<Vec<AssociationRule>> {
        let id = |tok: &str| {
            catalog
                .id(tok)
                .ok_or_else(|| Error::invalid(format!("rule references unknown item {tok:?}")))
        };
        self.rules
            .iter()
            .map(|r| {
                let mut antecedent = r
                    .antecedent
                    .iter()
                    .map(|t| id(t))
                    .collect::<Result<Vec<_>>>()?;
                antecedent.sort_unstable();
                Ok(AssociationRule {
                    antecedent,
                    consequent: id(&r.consequent)?,
                    support: r.support,
                    confidence: r.confidence,
                    lift: r.lift,
                })
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        crate::fuzzify::check_schema(path, &text, RULES_SCHEMA)?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}
