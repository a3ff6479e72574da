//! Tabular ingestion: per-region CSV series, monthly resampling, gap
//! filling, min-max normalization and systematic train/test splitting.

mod io;
mod matrix;
mod series;
mod synth;

pub use io::{
    load_csv, read_matrix_csv, read_series, write_matrix_csv, write_series_csv, CsvSchema,
};
pub use matrix::{
    assemble_matrix, matrix_series, normalize, split_indices, systematic_split, MatrixRow,
    NormParams, ObservationMatrix, SplitSpec,
};
pub use series::{interpolate_missing, resample_monthly, FeatureSeries, Sample, YearMonth};
pub use synth::{synth_generate, SynthConfig};
