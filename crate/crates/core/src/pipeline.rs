//! End-to-end orchestration. Every stage reads the previous stage's files
//! from the output directory and writes its own, so running the stages one
//! by one gives the same artifacts as [`run_pipeline`].

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{
    evaluate, read_prediction_log, sort_rules, write_prediction_log, Evaluation, SortKey,
    DEFAULT_SORT_KEYS,
};
use crate::error::{Error, Result};
use crate::eval::{
    benchmark, cross_check, metrics, time_significance, two_proportion_ztest, BenchReport,
    MetricsReport, TestResult,
};
use crate::fuzzify::check_schema;
use crate::fuzzify::{read_transactions, write_transactions, Encoding, FuzzyModel, Transaction};
use crate::ingest::{
    assemble_matrix, interpolate_missing, load_csv, normalize, read_matrix_csv, resample_monthly,
    split_indices, synth_generate, write_matrix_csv, CsvSchema, FeatureSeries, ObservationMatrix,
    SplitSpec, SynthConfig, YearMonth,
};
use crate::mine::{generate_rules, Database, Miner, RulesFile};

pub const REPORT_SCHEMA: &str = "farm.report/1";
pub const BENCH_SCHEMA: &str = "farm.bench/1";

pub const MATRIX_FILE: &str = "matrix.csv";
pub const MODEL_FILE: &str = "fuzzy_model.json";
pub const TRAIN_FILE: &str = "transactions_train.csv";
pub const TEST_FILE: &str = "transactions_test.csv";
pub const BENCH_FILE: &str = "bench.json";
pub const REPORT_FILE: &str = "report.json";

pub fn rules_file(algorithm: Miner) -> String {
    format!("rules_{algorithm}.json")
}

pub fn predictions_file(algorithm: Miner) -> String {
    format!("predictions_{algorithm}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// `region,date,<feature...>` CSV.
    pub features_csv: Option<PathBuf>,
    /// `region,date,<dengue_column>` CSV.
    pub dengue_csv: Option<PathBuf>,
    pub dengue_column: String,
    /// Generate synthetic input instead of reading CSVs.
    pub synth_seed: Option<u64>,
    pub synth: SynthConfig,
    pub k_features: usize,
    pub k_dengue: usize,
    pub kmeans_seed: u64,
    pub split: SplitSpec,
    pub min_support: f64,
    pub min_confidence: f64,
    pub encoding: Encoding,
    pub sort_keys: Vec<SortKey>,
    pub algorithms: Vec<Miner>,
    pub repetitions: usize,
    pub alpha: f64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            features_csv: None,
            dengue_csv: None,
            dengue_column: "dengue_cases".into(),
            synth_seed: None,
            synth: SynthConfig::default(),
            k_features: 4,
            k_dengue: 2,
            kmeans_seed: 0,
            split: SplitSpec::default(),
            min_support: 0.05,
            min_confidence: 0.8,
            encoding: Encoding::default(),
            sort_keys: DEFAULT_SORT_KEYS.to_vec(),
            algorithms: vec![Miner::FpGrowth, Miner::Apriori],
            repetitions: 10,
            alpha: 0.05,
            out_dir: PathBuf::from("farm-out"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Checks that exactly one input source is configured.
    pub fn validate_source(&self) -> Result<()> {
        let has_csv = self.features_csv.is_some() || self.dengue_csv.is_some();
        match (self.synth_seed, has_csv) {
            (Some(_), true) => Err(Error::invalid(
                "give either a synth seed or input CSVs, not both",
            )),
            (None, false) => Err(Error::invalid(
                "no input: give a synth seed or features and dengue CSVs",
            )),
            (None, true) if self.features_csv.is_none() || self.dengue_csv.is_none() => Err(
                Error::invalid("both a features CSV and a dengue CSV are required"),
            ),
            _ => Ok(()),
        }
    }

    /// Checks every parameter except the input source.
    pub fn validate(&self) -> Result<()> {
        if self.k_features < 2 || self.k_dengue < 2 {
            return Err(Error::invalid("k_features and k_dengue must be at least 2"));
        }
        self.split.stride()?;
        if !(self.min_support > 0.0 && self.min_support <= 1.0) {
            return Err(Error::invalid(format!(
                "min_support {} outside (0, 1]",
                self.min_support
            )));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::invalid(format!(
                "min_confidence {} outside [0, 1]",
                self.min_confidence
            )));
        }
        if let Encoding::AlphaCut { alpha } = self.encoding {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::invalid(format!("alpha-cut {alpha} outside (0, 1]")));
            }
        }
        if self.sort_keys.is_empty() {
            return Err(Error::invalid("at least one sort key is required"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("select at least one algorithm"));
        }
        let mut seen = self.algorithms.clone();
        seen.sort_by_key(|m| m.name());
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(Error::invalid("algorithms listed more than once"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, schema: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    check_schema(path, &text, schema)?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare_series(series: Vec<FeatureSeries>) -> Result<Vec<FeatureSeries>> {
    series
        .iter()
        .map(|s| interpolate_missing(&resample_monthly(s)))
        .collect()
}

/// Loads or generates the raw observation matrix and writes `matrix.csv`.
pub fn stage_ingest(config: &PipelineConfig) -> Result<ObservationMatrix> {
    let run = || -> Result<ObservationMatrix> {
        config.validate_source()?;
        config.validate()?;
        let matrix = match (config.synth_seed, &config.features_csv, &config.dengue_csv) {
            (Some(seed), _, _) => synth_generate(seed, &config.synth)?,
            (None, Some(features), Some(dengue)) => {
                let features = prepare_series(load_csv(features, &CsvSchema::default())?)?;
                let dengue_schema = CsvSchema {
                    value_columns: Some(vec![config.dengue_column.clone()]),
                    ..CsvSchema::default()
                };
                let dengue = prepare_series(load_csv(dengue, &dengue_schema)?)?;
                assemble_matrix(&features, &dengue)?
            }
            _ => unreachable!("validated above"),
        };
        std::fs::create_dir_all(&config.out_dir).map_err(io_err(&config.out_dir))?;
        write_matrix_csv(&config.path(MATRIX_FILE), &matrix)?;
        Ok(matrix)
    };
    run().map_err(|e| e.in_stage("ingest"))
}

/// Normalizes the matrix, fits the fuzzy model on the training rows and
/// writes the model plus the train and test transactions.
///
/// Transactions are encoded over the whole normalized matrix and then
/// assigned to train or test by the split of the row they come from.
pub fn stage_fuzzify(
    config: &PipelineConfig,
) -> Result<(FuzzyModel, Vec<Transaction>, Vec<Transaction>)> {
    let run = || -> Result<_> {
        let matrix = read_matrix_csv(&config.path(MATRIX_FILE))?;
        let normalized = normalize(&matrix);
        let (train_idx, _) = split_indices(normalized.len(), &config.split)?;
        let train_rows = normalized.subset(&train_idx);
        let model = FuzzyModel::fit(
            &train_rows,
            config.k_features,
            config.k_dengue,
            config.kmeans_seed,
            config.encoding,
        )?;
        let in_train: HashMap<(&str, YearMonth), bool> = {
            let mut m: HashMap<(&str, YearMonth), bool> = normalized
                .rows
                .iter()
                .map(|r| ((r.region.as_str(), r.month), false))
                .collect();
            for &i in &train_idx {
                let r = &normalized.rows[i];
                m.insert((r.region.as_str(), r.month), true);
            }
            m
        };
        let (train, test): (Vec<Transaction>, Vec<Transaction>) = model
            .encode(&normalized)?
            .into_iter()
            .partition(|t| in_train[&(t.region.as_str(), t.month)]);
        if train.is_empty() || test.is_empty() {
            return Err(Error::invalid(format!(
                "split left {} training and {} test transactions",
                train.len(),
                test.len()
            )));
        }
        let catalog = model.catalog()?;
        model.save(&config.path(MODEL_FILE))?;
        write_transactions(&config.path(TRAIN_FILE), &train, &catalog)?;
        write_transactions(&config.path(TEST_FILE), &test, &catalog)?;
        Ok((model, train, test))
    };
    run().map_err(|e| e.in_stage("fuzzify"))
}

/// Training transactions as a mining database: feature items plus the
/// next-month class item.
pub fn mining_database(train: &[Transaction]) -> Database {
    Database::new(train.iter().map(|t| {
        let mut items = t.items.clone();
        items.push(t.truth.item());
        items
    }))
}

fn load_train(config: &PipelineConfig) -> Result<(FuzzyModel, Database)> {
    let model = FuzzyModel::load(&config.path(MODEL_FILE))?;
    let train = read_transactions(&config.path(TRAIN_FILE), &model.catalog()?)?;
    Ok((model, mining_database(&train)))
}

/// Mines frequent itemsets from the training transactions and writes the
/// class rules to `rules_<algorithm>.json`.
pub fn stage_mine(config: &PipelineConfig, algorithm: Miner) -> Result<RulesFile> {
    let run = || -> Result<_> {
        let (model, db) = load_train(config)?;
        let catalog = model.catalog()?;
        let mined = algorithm.mine(&db, config.min_support)?;
        let rules = generate_rules(
            &mined.itemsets,
            db.len(),
            config.min_confidence,
            &catalog.class_items(),
            false,
        )?;
        log::info!(
            "{algorithm}: {} frequent itemsets, {} rules",
            mined.itemsets.len(),
            rules.len()
        );
        let file = RulesFile::new(
            algorithm.name(),
            db.len(),
            config.min_support,
            config.min_confidence,
            mined.itemsets.len(),
            &rules,
            &catalog,
        );
        file.save(&config.path(&rules_file(algorithm)))?;
        Ok(file)
    };
    run().map_err(|e| e.in_stage("mine"))
}

/// Sorts the mined rules into a rule book, classifies the test
/// transactions and writes `predictions_<algorithm>.csv`.
pub fn stage_classify(config: &PipelineConfig, algorithm: Miner) -> Result<Evaluation> {
    let run = || -> Result<_> {
        let model = FuzzyModel::load(&config.path(MODEL_FILE))?;
        let catalog = model.catalog()?;
        let rules = RulesFile::load(&config.path(&rules_file(algorithm)))?;
        if rules.algorithm != algorithm.name() {
            return Err(Error::invalid(format!(
                "{} holds {} rules, expected {algorithm}",
                rules_file(algorithm),
                rules.algorithm
            )));
        }
        let book = sort_rules(&rules.to_rules(&catalog)?, &catalog, &config.sort_keys)?;
        let test = read_transactions(&config.path(TEST_FILE), &catalog)?;
        let evaluation = evaluate(&book, &test)?;
        write_prediction_log(
            &config.path(&predictions_file(algorithm)),
            &evaluation.predictions,
        )?;
        Ok(evaluation)
    };
    run().map_err(|e| e.in_stage("classify"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchFile {
    pub schema: String,
    pub min_support: f64,
    pub repetitions: usize,
    pub reports: Vec<BenchReport>,
}

/// Times every selected miner on the training transactions and writes
/// `bench.json`.
pub fn stage_bench(config: &PipelineConfig) -> Result<BenchFile> {
    let run = || -> Result<_> {
        let (_, db) = load_train(config)?;
        let reports = config
            .algorithms
            .iter()
            .map(|&m| benchmark(m, &db, config.min_support, config.repetitions))
            .collect::<Result<Vec<_>>>()?;
        cross_check(&reports)?;
        let file = BenchFile {
            schema: BENCH_SCHEMA.into(),
            min_support: config.min_support,
            repetitions: config.repetitions,
            reports,
        };
        write_json(&config.path(BENCH_FILE), &file)?;
        Ok(file)
    };
    run().map_err(|e| e.in_stage("bench"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: Miner,
    pub itemset_count: usize,
    pub rule_count: usize,
    pub test_transactions: u64,
    pub defaulted: u64,
    pub confusion: crate::classify::ConfusionMatrix,
    pub metrics: MetricsReport,
}

/// z-tests between the first two algorithms, one per proportion metric.
/// A metric whose denominator is zero on either side is left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub first: Miner,
    pub second: Miner,
    pub sensitivity: Option<TestResult>,
    pub specificity: Option<TestResult>,
    pub ppv: Option<TestResult>,
    pub npv: Option<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub config: PipelineConfig,
    pub algorithms: Vec<AlgorithmReport>,
    pub comparison: Option<Comparison>,
    /// Welch test on the first two algorithms' repetition timings.
    pub time_test: Option<TestResult>,
    pub bench: Option<BenchFile>,
}

fn ztest(a: (u64, u64), b: (u64, u64), alpha: f64) -> Result<Option<TestResult>> {
    if a.1 == 0 || b.1 == 0 {
        return Ok(None);
    }
    two_proportion_ztest(a.0, a.1, b.0, b.1, alpha).map(Some)
}

fn compare(a: &AlgorithmReport, b: &AlgorithmReport, alpha: f64) -> Result<Comparison> {
    let (x, y) = (&a.confusion, &b.confusion);
    Ok(Comparison {
        first: a.algorithm,
        second: b.algorithm,
        sensitivity: ztest((x.tp, x.tp + x.fn_), (y.tp, y.tp + y.fn_), alpha)?,
        specificity: ztest((x.tn, x.tn + x.fp), (y.tn, y.tn + y.fp), alpha)?,
        ppv: ztest((x.tp, x.tp + x.fp), (y.tp, y.tp + y.fp), alpha)?,
        npv: ztest((x.tn, x.tn + x.fn_), (y.tn, y.tn + y.fn_), alpha)?,
    })
}

/// Builds `report.json` from the rules, prediction logs and, when present,
/// `bench.json`.
pub fn stage_eval(config: &PipelineConfig) -> Result<Report> {
    let run = || -> Result<_> {
        let mut algorithms = Vec::with_capacity(config.algorithms.len());
        for &m in &config.algorithms {
            let rules = RulesFile::load(&config.path(&rules_file(m)))?;
            let evaluation = Evaluation::from_predictions(read_prediction_log(
                &config.path(&predictions_file(m)),
            )?);
            algorithms.push(AlgorithmReport {
                algorithm: m,
                itemset_count: rules.itemset_count,
                rule_count: rules.rules.len(),
                test_transactions: evaluation.matrix.total(),
                defaulted: evaluation.defaulted,
                metrics: metrics(&evaluation.matrix)?,
                confusion: evaluation.matrix,
            });
        }
        let comparison = match algorithms.as_slice() {
            [a, b, ..] => Some(compare(a, b, config.alpha)?),
            _ => None,
        };
        let bench_path = config.path(BENCH_FILE);
        let bench: Option<BenchFile> = if bench_path.exists() {
            Some(read_json(&bench_path, BENCH_SCHEMA)?)
        } else {
            None
        };
        let time_test = match bench.as_ref().map(|b| b.reports.as_slice()) {
            Some([a, b, ..]) if a.wall_time.len() >= 5 && b.wall_time.len() >= 5 => {
                Some(time_significance(&a.wall_time, &b.wall_time, config.alpha)?)
            }
            _ => None,
        };
        let report = Report {
            schema: REPORT_SCHEMA.into(),
            config: config.clone(),
            algorithms,
            comparison,
            time_test,
            bench,
        };
        write_json(&config.path(REPORT_FILE), &report)?;
        Ok(report)
    };
    run().map_err(|e| e.in_stage("eval"))
}

/// Runs ingest, fuzzify, mine and classify per algorithm, bench and eval.
/// Artifacts of completed stages are left in place when a later stage fails.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Report> {
    stage_ingest(config)?;
    stage_fuzzify(config)?;
    for &m in &config.algorithms {
        stage_mine(config, m)?;
        stage_classify(config, m)?;
    }
    stage_bench(config)?;
    stage_eval(config)
}

/// Reads a report file written by [`stage_eval`].
pub fn load_report(path: &Path) -> Result<Report> {
    read_json(path, REPORT_SCHEMA)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_config(dir: &Path) -> PipelineConfig {
        PipelineConfig {
            synth_seed: Some(7),
            synth: SynthConfig {
                regions: 4,
                months: 40,
                ..SynthConfig::default()
            },
            repetitions: 5,
            out_dir: dir.to_path_buf(),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!((c.k_features, c.k_dengue, c.kmeans_seed), (4, 2, 0));
        assert_eq!(c.split.train_fraction, 0.8);
        assert_eq!((c.min_support, c.min_confidence), (0.05, 0.8));
        assert_eq!(c.repetitions, 10);
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        PipelineConfig::default().validate().unwrap();
        assert!(PipelineConfig::default().validate_source().is_err());
        let ok = synth_config(dir.path());
        ok.validate_source().unwrap();
        ok.validate().unwrap();
        let both = PipelineConfig {
            features_csv: Some("f.csv".into()),
            ..ok.clone()
        };
        assert!(both.validate_source().is_err());
        let only_features = PipelineConfig {
            synth_seed: None,
            features_csv: Some("f.csv".into()),
            ..ok.clone()
        };
        assert!(only_features.validate_source().is_err());
        for bad in [
            PipelineConfig {
                k_dengue: 1,
                ..ok.clone()
            },
            PipelineConfig {
                min_support: 0.0,
                ..ok.clone()
            },
            PipelineConfig {
                algorithms: vec![],
                ..ok.clone()
            },
            PipelineConfig {
                algorithms: vec![Miner::Apriori, Miner::Apriori],
                ..ok.clone()
            },
            PipelineConfig {
                repetitions: 0,
                ..ok.clone()
            },
            PipelineConfig {
                alpha: 1.0,
                ..ok.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn config_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = synth_config(dir.path());
        let path = dir.path().join("c.json");
        write_json(&path, &c).unwrap();
        assert_eq!(PipelineConfig::load(&path).unwrap(), c);
        std::fs::write(&path, r#"{"synth_seed": 3, "bogus": 1}"#).unwrap();
        assert!(PipelineConfig::load(&path).is_err());
    }

    #[test]
    fn small_run() {
        let dir = tempfile::tempdir().unwrap();
        let c = synth_config(dir.path());
        let report = run_pipeline(&c).unwrap();
        assert_eq!(report.algorithms.len(), 2);
        assert_eq!(
            report.algorithms[0].itemset_count,
            report.algorithms[1].itemset_count
        );
        assert!(report.algorithms.iter().all(|a| a.rule_count > 0));
        assert!(report.comparison.is_some());
        assert!(report.time_test.is_some());
        for name in [
            MATRIX_FILE,
            MODEL_FILE,
            TRAIN_FILE,
            TEST_FILE,
            BENCH_FILE,
            REPORT_FILE,
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        assert_eq!(load_report(&dir.path().join(REPORT_FILE)).unwrap(), report);
    }

    #[test]
    fn failures_name_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let c = PipelineConfig {
            synth_seed: None,
            features_csv: Some(dir.path().join("missing_features.csv")),
            dengue_csv: Some(dir.path().join("missing_dengue.csv")),
            out_dir: dir.path().to_path_buf(),
            ..PipelineConfig::default()
        };
        assert_eq!(run_pipeline(&c).unwrap_err().stage(), Some("ingest"));
        let c = synth_config(dir.path());
        assert_eq!(
            stage_mine(&c, Miner::Apriori).unwrap_err().stage(),
            Some("mine")
        );
    }

    #[test]
    fn eval_rejects_wrong_bench_schema() {
        let dir = tempfile::tempdir().unwrap();
        let c = synth_config(dir.path());
        run_pipeline(&c).unwrap();
        let path = dir.path().join(BENCH_FILE);
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace(BENCH_SCHEMA, "farm.bench/0");
        std::fs::write(&path, text).unwrap();
        let err = stage_eval(&c).unwrap_err();
        assert_eq!(err.stage(), Some("eval"));
        assert!(err.to_string().contains("schema"), "{err}");
    }
}
