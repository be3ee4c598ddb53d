//! Benchmark harness: uniformly Z-scored KNN against importance-weighted
//! KNN on UCI datasets described by manifests.

pub mod error;
pub mod load;
pub mod manifest;
pub mod report;
pub mod run;

pub use error::{BenchError, Result};
pub use manifest::{Manifest, BENCHMARK_DATASETS};
pub use run::{run_benchmark, run_detailed, run_single, BenchReport, Cap, ReportRow, RunConfig};
