//! Fuzzy association rule mining for next-month dengue incidence prediction.
//!
//! The crate is organised as a pipeline of stages:
//!
//! * [`ingest`] loads per-region CSV series, resamples them to monthly
//!   resolution, fills gaps, normalizes and splits the observation matrix.
//! * [`fuzzify`] clusters each feature with k-means and encodes every
//!   (region, month) row as a transaction of fuzzy items.
//! * [`mine`] finds frequent itemsets with FP-Growth, Apriori or a
//!   brute-force oracle and derives class-consequent association rules.
//! * [`classify`] sorts the rules into a first-match rule book and scores
//!   test transactions.
//! * [`eval`] computes accuracy metrics, significance tests and miner
//!   benchmarks.
//! * [`pipeline`] wires the stages together and owns the artifact formats.

pub mod classify;
pub mod error;
pub mod eval;
pub mod fuzzify;
pub mod ingest;
pub mod mine;
pub mod pipeline;

pub use error::{Error, Result};
