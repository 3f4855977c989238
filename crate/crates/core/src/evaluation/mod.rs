// SPDX-License-Identifier: Apache-2.0

//! Success rate and relative improvement, K-sweeps, reports, and the
//! dataset file format.

mod dataset;
mod experiment;
mod report;
mod summary;
mod sweep;

pub use dataset::{emit_dataset, ingest_dataset, DatasetSample, DatasetSkip};
pub use experiment::{CellError, CellOutput, Experiment};
pub use report::{categories_by_sr, report, Report, ReportOptions, CATEGORY_CSV_HEADER, HEADLINE_CSV_HEADER};
pub use summary::{summarize, CategoryStats, EvaluationError, EvaluationSummary, RunLabel};
pub use sweep::{sweep_k, KSeries, SweepCell, SweepError, SweepTable, SUMMARY_CSV_HEADER};
