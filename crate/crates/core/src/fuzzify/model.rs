use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encode::{encode_transactions, Encoding, ItemCatalog, Transaction};
use super::kmeans::Centroids;
use super::sets::{build_fuzzy_sets, FuzzySetDef};
use crate::error::{Error, Result};
use crate::ingest::{NormParams, ObservationMatrix};

pub const FUZZY_MODEL_SCHEMA: &str = "farm.fuzzy-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub feature: String,
    pub norm: NormParams,
    pub centers: Vec<f64>,
    pub sets: Vec<FuzzySetDef>,
}

/// Everything needed to turn a raw observation row into items: per-feature
/// normalization and fuzzy sets, plus the dengue class centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyModel {
    pub schema: String,
    pub features: Vec<FeatureModel>,
    pub dengue_centers: Vec<f64>,
    pub encoding: Encoding,
}

impl FuzzyModel {
    /// Clusters each normalized feature column of `train` into `k_features`
    /// sets and the raw dengue counts into `k_dengue` classes.
    pub fn fit(
        train: &ObservationMatrix,
        k_features: usize,
        k_dengue: usize,
        seed: u64,
        encoding: Encoding,
    ) -> Result<Self> {
        let norm = train
            .norm_params
            .as_ref()
            .ok_or_else(|| Error::invalid("fuzzy model must be fit on a normalized matrix"))?;
        if let Encoding::AlphaCut { alpha } = encoding {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::invalid(format!("alpha-cut {alpha} outside (0, 1]")));
            }
        }
        let mut features = Vec::with_capacity(train.features.len());
        for (j, name) in train.features.iter().enumerate() {
            let column: Vec<f64> = train.column(j).collect();
            let centroids = Centroids::fit(name.clone(), &column, k_features, seed)?;
            features.push(FeatureModel {
                feature: name.clone(),
                norm: norm[j],
                sets: build_fuzzy_sets(&centroids)?,
                centers: centroids.centers,
            });
        }
        let counts: Vec<f64> = train.rows.iter().map(|r| r.dengue).collect();
        let dengue = Centroids::fit("dengue", &counts, k_dengue, seed)?;
        Ok(FuzzyModel {
            schema: FUZZY_MODEL_SCHEMA.into(),
            features,
            dengue_centers: dengue.centers,
            encoding,
        })
    }

    pub fn families(&self) -> Vec<Vec<FuzzySetDef>> {
        self.features.iter().map(|f| f.sets.clone()).collect()
    }

    pub fn catalog(&self) -> Result<ItemCatalog> {
        let labels: Vec<Vec<String>> = self
            .features
            .iter()
            .map(|f| f.sets.iter().map(|s| s.label.clone()).collect())
            .collect();
        ItemCatalog::new(
            self.features
                .iter()
                .zip(&labels)
                .map(|(f, l)| (f.feature.as_str(), l.as_slice())),
        )
    }

    pub fn dengue_centroids(&self) -> Centroids {
        Centroids {
            feature: "dengue".into(),
            centers: self.dengue_centers.clone(),
        }
    }

    /// Encodes a matrix that was normalized with this model's parameters.
    pub fn encode(&self, normalized: &ObservationMatrix) -> Result<Vec<Transaction>> {
        let names: Vec<&str> = self.features.iter().map(|f| f.feature.as_str()).collect();
        if normalized
            .features
            .iter()
            .map(String::as_str)
            .ne(names.iter().copied())
        {
            return Err(Error::invalid(format!(
                "matrix features {:?} do not match model features {names:?}",
                normalized.features
            )));
        }
        encode_transactions(
            normalized,
            &self.families(),
            &self.dengue_centroids(),
            &self.catalog()?,
            self.encoding,
        )
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
        check_schema(path, &text, FUZZY_MODEL_SCHEMA)?;
        let model: FuzzyModel = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        for f in &model.features {
            f.sets.iter().try_for_each(FuzzySetDef::validate)?;
        }
        Ok(model)
    }
}

/// Compares the `schema` field of a JSON artifact before full decoding.
pub(crate) fn check_schema(path: &Path, text: &str, expected: &str) -> Result<()> {
    #[derive(Deserialize)]
    struct Header {
        schema: Option<String>,
    }
    let header: Header = serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    match header.schema {
        Some(s) if s == expected => Ok(()),
        found => Err(Error::Schema {
            path: path.to_path_buf(),
            expected: expected.into(),
            found: found.unwrap_or_else(|| "<none>".into()),
        }),
    }
}
