use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use farm_core::classify::{parse_sort_keys, SortKey};
use farm_core::eval::{benchmark, cross_check, synth_bench_db, time_significance, BenchConfig};
use farm_core::fuzzify::Encoding;
use farm_core::ingest::{matrix_series, synth_generate, write_series_csv, SynthConfig};
use farm_core::mine::Miner;
use farm_core::pipeline::{
    run_pipeline, stage_bench, stage_classify, stage_eval, stage_fuzzify, stage_ingest, stage_mine,
    write_json, BenchFile, PipelineConfig, Report, BENCH_SCHEMA, REPORT_FILE,
};

const DEFAULT_CUT_ALPHA: f64 = 0.5;

#[derive(Parser)]
#[command(
    name = "farm",
    version,
    about = "Fuzzy association rule mining for next-month dengue incidence"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage: ingest, fuzzify, mine, classify, bench, eval.
    Run(ConfigArgs),
    /// Build matrix.csv from input CSVs or synthetic data.
    Ingest(ConfigArgs),
    /// Fit the fuzzy model and write train/test transactions.
    Fuzzify(ConfigArgs),
    /// Mine rules for each selected algorithm.
    Mine(ConfigArgs),
    /// Classify test transactions with each algorithm's rules.
    Classify(ConfigArgs),
    /// Time the selected miners.
    Bench(BenchArgs),
    /// Compute metrics and significance tests into report.json.
    Eval(ConfigArgs),
    /// Write synthetic features.csv and dengue.csv input files.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Argmax,
    AlphaCut,
}

/// Flags that override values from `--config`.
#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON pipeline config; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for synthetic input data.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    features_csv: Option<PathBuf>,
    #[arg(long)]
    dengue_csv: Option<PathBuf>,
    /// Comma-separated: fpgrowth, apriori, bruteforce.
    #[arg(long, value_delimiter = ',', value_parser = parse_miner)]
    algorithm: Option<Vec<Miner>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    min_support: Option<f64>,
    #[arg(long)]
    min_confidence: Option<f64>,
    /// Comma-separated rule order, e.g. confidence,antecedents,lift,consequent.
    #[arg(long, value_parser = parse_keys)]
    sort_keys: Option<SortKeys>,
    #[arg(long, value_enum)]
    encoding: Option<EncodingArg>,
    /// Membership threshold for alpha-cut encoding (default 0.5).
    #[arg(long)]
    cut_alpha: Option<f64>,
    #[arg(long)]
    k_features: Option<usize>,
    #[arg(long)]
    k_dengue: Option<usize>,
    #[arg(long)]
    kmeans_seed: Option<u64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    stride_offset: Option<usize>,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Benchmark the bundled synthetic database instead of the training
    /// transactions; `--seed` then seeds that database.
    #[arg(long)]
    synthetic: bool,
    /// Transactions in the synthetic benchmark database.
    #[arg(long, requires = "synthetic")]
    transactions: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    regions: Option<usize>,
    #[arg(long)]
    months: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
}

fn parse_miner(s: &str) -> Result<Miner, String> {
    s.parse().map_err(|e: farm_core::Error| e.to_string())
}

#[derive(Clone)]
struct SortKeys(Vec<SortKey>);

fn parse_keys(s: &str) -> Result<SortKeys, String> {
    parse_sort_keys(s).map(SortKeys).map_err(|e| e.to_string())
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            c.synth_seed = Some(seed);
            c.features_csv = None;
            c.dengue_csv = None;
        }
        if self.features_csv.is_some() || self.dengue_csv.is_some() {
            if self.seed.is_some() {
                bail!("--seed cannot be combined with input CSVs");
            }
            c.synth_seed = None;
            c.features_csv = self.features_csv.clone().or(c.features_csv);
            c.dengue_csv = self.dengue_csv.clone().or(c.dengue_csv);
        }
        if let Some(a) = &self.algorithm {
            c.algorithms = a.clone();
        }
        if let Some(k) = &self.sort_keys {
            c.sort_keys = k.0.clone();
        }
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.repetitions = self.reps.unwrap_or(c.repetitions);
        c.min_support = self.min_support.unwrap_or(c.min_support);
        c.min_confidence = self.min_confidence.unwrap_or(c.min_confidence);
        c.k_features = self.k_features.unwrap_or(c.k_features);
        c.k_dengue = self.k_dengue.unwrap_or(c.k_dengue);
        c.kmeans_seed = self.kmeans_seed.unwrap_or(c.kmeans_seed);
        c.split.train_fraction = self.train_fraction.unwrap_or(c.split.train_fraction);
        c.split.stride_offset = self.stride_offset.unwrap_or(c.split.stride_offset);
        if let Some(out) = &self.out {
            c.out_dir = out.clone();
        }
        let current_cut = match c.encoding {
            Encoding::AlphaCut { alpha } => Some(alpha),
            Encoding::Argmax => None,
        };
        c.encoding = match (self.encoding, self.cut_alpha.or(current_cut)) {
            (Some(EncodingArg::Argmax), _) => Encoding::Argmax,
            (Some(EncodingArg::AlphaCut), alpha) => Encoding::AlphaCut {
                alpha: alpha.unwrap_or(DEFAULT_CUT_ALPHA),
            },
            (None, Some(alpha)) => Encoding::AlphaCut { alpha },
            (None, None) => c.encoding,
        };
        Ok(c)
    }
}

fn print_report(report: &Report, out_dir: &Path) {
    for a in &report.algorithms {
        let pct =
            |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{:.2}%", 100.0 * v));
        let m = &a.metrics;
        println!(
            "{:<10} rules {:>5}  sensitivity {}  specificity {}  ppv {}  npv {}  f1 {}",
            a.algorithm.name(),
            a.rule_count,
            pct(m.sensitivity),
            pct(m.specificity),
            pct(m.ppv),
            pct(m.npv),
            pct(m.f1)
        );
    }
    if let Some(bench) = &report.bench {
        for r in &bench.reports {
            println!(
                "{:<10} mean time {:.6} s  tracked peak {} bytes",
                r.algorithm.name(),
                r.mean_time(),
                r.tracked_bytes_peak
            );
        }
    }
    if let Some(t) = &report.time_test {
        println!(
            "time test p = {:.4e}, reject = {}",
            t.p_value, t.reject_null
        );
    }
    println!("report: {}", out_dir.join(REPORT_FILE).display());
}

fn bench_synthetic(args: &BenchArgs) -> anyhow::Result<()> {
    let c = args.config.resolve()?;
    let defaults = BenchConfig::default();
    let cfg = BenchConfig {
        seed: args.config.seed.unwrap_or(defaults.seed),
        transactions: args.transactions.unwrap_or(defaults.transactions),
        min_support: args.config.min_support.unwrap_or(defaults.min_support),
        repetitions: args.config.reps.unwrap_or(defaults.repetitions),
        ..defaults
    };
    let db = synth_bench_db(&cfg);
    let reports = c
        .algorithms
        .iter()
        .map(|&m| {
            log::info!("benchmarking {m}");
            benchmark(m, &db, cfg.min_support, cfg.repetitions)
        })
        .collect::<Result<Vec<_>, _>>()?;
    cross_check(&reports)?;
    for r in &reports {
        println!(
            "{:<10} itemsets {}  mean time {:.6} s  tracked peak {} bytes",
            r.algorithm.name(),
            r.itemset_count,
            r.mean_time(),
            r.tracked_bytes_peak
        );
    }
    if let [a, b, ..] = reports.as_slice() {
        if cfg.repetitions >= 5 {
            let t = time_significance(&a.wall_time, &b.wall_time, c.alpha)?;
            println!(
                "time test p = {:.4e}, reject = {}",
                t.p_value, t.reject_null
            );
        }
    }
    std::fs::create_dir_all(&c.out_dir)
        .with_context(|| format!("creating {}", c.out_dir.display()))?;
    let path = c.out_dir.join("bench_synthetic.json");
    write_json(
        &path,
        &BenchFile {
            schema: BENCH_SCHEMA.into(),
            min_support: cfg.min_support,
            repetitions: cfg.repetitions,
            reports,
        },
    )?;
    println!("bench: {}", path.display());
    Ok(())
}

fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        regions: args.regions.unwrap_or(defaults.regions),
        months: args.months.unwrap_or(defaults.months),
        features: args.features.unwrap_or(defaults.features),
        ..defaults
    };
    let matrix = synth_generate(args.seed, &cfg)?;
    let (features, dengue) = matrix_series(&matrix, "dengue_cases")?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for (name, series) in [("features.csv", &features), ("dengue.csv", &dengue)] {
        let path = args.out.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_series_csv(BufWriter::new(file), series)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn each_algorithm(
    args: &ConfigArgs,
    f: impl Fn(&PipelineConfig, Miner) -> farm_core::Result<()>,
) -> anyhow::Result<()> {
    let c = args.resolve()?;
    c.validate()?;
    for &m in &c.algorithms {
        f(&c, m)?;
    }
    Ok(())
}

fn execute(command: &Command) -> anyhow::Result<()> {
    match command {
        Command::Run(args) => {
            let c = args.resolve()?;
            let report = run_pipeline(&c)?;
            print_report(&report, &c.out_dir);
        }
        Command::Ingest(args) => {
            let c = args.resolve()?;
            let m = stage_ingest(&c)?;
            println!("{} rows, {} features", m.len(), m.features.len());
        }
        Command::Fuzzify(args) => {
            let c = args.resolve()?;
            c.validate()?;
            let (_, train, test) = stage_fuzzify(&c)?;
            println!(
                "{} training and {} test transactions",
                train.len(),
                test.len()
            );
        }
        Command::Mine(args) => each_algorithm(args, |c, m| {
            let rules = stage_mine(c, m)?;
            println!(
                "{m}: {} itemsets, {} rules",
                rules.itemset_count,
                rules.rules.len()
            );
            Ok(())
        })?,
        Command::Classify(args) => each_algorithm(args, |c, m| {
            let e = stage_classify(c, m)?;
            println!(
                "{m}: {} predictions, {} defaulted",
                e.predictions.len(),
                e.defaulted
            );
            Ok(())
        })?,
        Command::Bench(args) if args.synthetic => bench_synthetic(args)?,
        Command::Bench(args) => {
            let c = args.config.resolve()?;
            c.validate()?;
            for r in stage_bench(&c)?.reports {
                println!("{}: mean time {:.6} s", r.algorithm, r.mean_time());
            }
        }
        Command::Eval(args) => {
            let c = args.resolve()?;
            c.validate()?;
            let report = stage_eval(&c)?;
            print_report(&report, &c.out_dir);
        }
        Command::Synth(args) => synth(args)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // core errors already spell out their sources
            let mut message = e.to_string();
            for cause in e.chain().skip(1) {
                let cause = cause.to_string();
                if !message.contains(&cause) {
                    message = format!("{message}: {cause}");
                }
            }
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
