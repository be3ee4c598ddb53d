//! One baseline-versus-FIDS comparison per dataset.

use std::path::PathBuf;
use std::time::Instant;

use fids::{
    accuracy, baseline_predict, fit_fids, split_indices, subsample, Dataset, FidsConfig,
    FidsModel, SplitIndices,
};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};
use crate::load::load;
use crate::manifest::Manifest;

pub const TOOL_VERSION: &str = concat!("fids-bench ", env!("CARGO_PKG_VERSION"));

/// How many rows a dataset is cut down to before splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cap {
    /// The manifest's `default_subsample`, if any.
    ManifestDefault,
    Full,
    Rows(usize),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifests: Vec<Manifest>,
    pub data_dir: PathBuf,
    pub fids: FidsConfig,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub cap: Cap,
    pub allow_checksum_mismatch: bool,
    pub parallel_datasets: bool,
}

impl RunConfig {
    pub fn new(manifests: Vec<Manifest>, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifests,
            data_dir: data_dir.into(),
            fids: FidsConfig::default(),
            test_fraction: 0.25,
            split_seed: 7,
            cap: Cap::ManifestDefault,
            allow_checksum_mismatch: false,
            parallel_datasets: false,
        }
    }

    pub fn manifest(&self, name: &str) -> Result<&Manifest> {
        self.manifests.iter().find(|m| m.name == name).ok_or_else(|| {
            let known: Vec<&str> = self.manifests.iter().map(|m| m.name.as_str()).collect();
            BenchError::Usage(format!("unknown dataset `{name}`; known: {}", known.join(", ")))
        })
    }

    fn cap_for(&self, manifest: &Manifest) -> Option<usize> {
        match self.cap {
            Cap::ManifestDefault => manifest.default_subsample,
            Cap::Full => None,
            Cap::Rows(n) => Some(n),
        }
    }
}

/// Every setting a report number depends on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub tool_version: String,
    pub k: usize,
    pub metric: String,
    pub minkowski_p: Option<f64>,
    pub scaler: String,
    pub n_trees: usize,
    pub forest_seed: u64,
    pub mtry: Option<usize>,
    pub importance_floor: f64,
    pub index: String,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub stratified: bool,
    pub cap: Cap,
}

impl ConfigEcho {
    pub fn new(config: &RunConfig) -> Self {
        let f = &config.fids;
        Self {
            tool_version: TOOL_VERSION.to_string(),
            k: f.k,
            metric: f.metric.family().name().to_string(),
            minkowski_p: match f.metric {
                fids::MetricChoice::Minkowski(p) => Some(p),
                _ => None,
            },
            scaler: f.scaler.name().to_string(),
            n_trees: f.forest.n_trees,
            forest_seed: f.forest.seed,
            mtry: f.forest.tree.mtry,
            importance_floor: f.importance_floor,
            index: if f.use_index { "kdtree" } else { "none" }.to_string(),
            test_fraction: config.test_fraction,
            split_seed: config.split_seed,
            stratified: true,
            cap: config.cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub dataset: String,
    pub n_used: usize,
    pub d: usize,
    pub n_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub baseline_accuracy: f64,
    pub fids_accuracy: f64,
    pub delta: f64,
    /// sha256 over the train and test row indices, shared by both arms.
    pub split_hash: String,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config: ConfigEcho,
    pub rows: Vec<ReportRow>,
    /// Wall-clock seconds per row, kept apart from the reproducible fields.
    pub seconds: Vec<f64>,
}

/// Everything a single comparison produced, for callers that want more
/// than the report row.
pub struct Outcome {
    pub row: ReportRow,
    pub seconds: f64,
    pub train: Dataset,
    pub test: Dataset,
    pub split: SplitIndices,
    pub baseline: Vec<usize>,
    pub fids: Vec<usize>,
    pub model: FidsModel,
}

pub fn split_hash(split: &SplitIndices) -> String {
    let mut h = Sha256::new();
    for (tag, idx) in [(b"train", &split.train), (b"test\0", &split.test)] {
        h.update(tag);
        h.update((idx.len() as u64).to_le_bytes());
        for &i in idx {
            h.update((i as u64).to_le_bytes());
        }
    }
    format!("{:x}", h.finalize())
}

/// Loads, caps and splits a dataset exactly as a benchmark run would.
pub fn prepare(manifest: &Manifest, config: &RunConfig) -> Result<(Dataset, SplitIndices)> {
    let loaded = load(manifest, &config.data_dir, config.allow_checksum_mismatch)?;
    let data = match config.cap_for(manifest) {
        Some(cap) => subsample(&loaded.data, cap, config.split_seed),
        None => loaded.data,
    };
    let split = split_indices(&data, config.test_fraction, config.split_seed, true)?;
    Ok((data, split))
}

pub fn run_detailed(name: &str, config: &RunConfig) -> Result<Outcome> {
    let manifest = config.manifest(name)?;
    let (data, split) = prepare(manifest, config)?;
    let start = Instant::now();
    let train = data.subset(&split.train);
    let test = data.subset(&split.test);
    let truth = test.labels().expect("manifests declare class targets");
    let baseline = baseline_predict(&train, &test, &config.fids)?;
    let model = fit_fids(&train, &config.fids)?;
    let fids = model.predict_batch(&test)?;
    let baseline_accuracy = accuracy(&baseline, truth)?;
    let fids_accuracy = accuracy(&fids, truth)?;
    let row = ReportRow {
        dataset: manifest.name.clone(),
        n_used: data.n(),
        d: data.d(),
        n_classes: data.n_classes(),
        n_train: train.n(),
        n_test: test.n(),
        baseline_accuracy,
        fids_accuracy,
        delta: fids_accuracy - baseline_accuracy,
        split_hash: split_hash(&split),
        weights: model.weights().as_slice().to_vec(),
    };
    check_row(&row)?;
    Ok(Outcome {
        row,
        seconds: start.elapsed().as_secs_f64(),
        train,
        test,
        split,
        baseline,
        fids,
        model,
    })
}

fn check_row(row: &ReportRow) -> Result<()> {
    let in_unit = |a: f64| (0.0..=1.0).contains(&a);
    if !in_unit(row.baseline_accuracy) || !in_unit(row.fids_accuracy) {
        return Err(BenchError::Invariant(format!("{}: accuracy outside [0, 1]", row.dataset)));
    }
    if (row.delta - (row.fids_accuracy - row.baseline_accuracy)).abs() > 1e-12 {
        return Err(BenchError::Invariant(format!("{}: delta disagrees with accuracies", row.dataset)));
    }
    if row.n_train + row.n_test != row.n_used {
        return Err(BenchError::Invariant(format!("{}: split does not cover the data", row.dataset)));
    }
    Ok(())
}

pub fn run_single(name: &str, config: &RunConfig) -> Result<(ReportRow, f64)> {
    run_detailed(name, config).map(|o| (o.row, o.seconds))
}

/// Runs the named datasets in order (interleaved on the rayon pool with
/// `parallel_datasets`; row order is the same either way).
pub fn run_benchmark(names: &[&str], config: &RunConfig) -> Result<BenchReport> {
    for name in names {
        config.manifest(name)?;
    }
    let results: Vec<Result<(ReportRow, f64)>> = if config.parallel_datasets {
        names.par_iter().map(|n| run_single(n, config)).collect()
    } else {
        names.iter().map(|n| run_single(n, config)).collect()
    };
    let mut rows = Vec::with_capacity(names.len());
    let mut seconds = Vec::with_capacity(names.len());
    for r in results {
        let (row, s) = r?;
        rows.push(row);
        seconds.push(s);
    }
    Ok(BenchReport {
        config: ConfigEcho::new(config),
        rows,
        seconds,
    })
}
