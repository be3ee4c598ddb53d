//! Feature-importance dynamic scaling: scale the features, learn per-feature
//! importances from a random forest, multiply each scaled column by its
//! importance, and classify with KNN in the weighted space.
//!
//! The KNN runs on unscaled rows with effective weights `w_j / spread_j`.
//! In exact arithmetic that is the same as weighting scaled coordinates,
//! and the centers cancel in differences. Done this way, two training rows
//! at equal offsets from a query stay exactly tied. Their order is then
//! decided by index, whatever the weights' scale.

use std::fmt::Write as _;

use crate::dataset::Dataset;
use crate::error::{arg_err, FidsError, Result};
use crate::forest::{train_forest, ForestParams, ImportanceVector};
use crate::metrics::{fit_mahalanobis, MetricFamily, MetricSpec, WeightVector};
use crate::neighbors::{fit_knn, KnnModel};
use crate::preprocess::{fit_scaler, transform, ScalerKind, ScalerParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Metric selection before it is bound to data. Data-dependent families
/// (standardized Euclidean, Mahalanobis) are fitted on the scaled training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricChoice {
    Euclidean,
    Manhattan,
    Minkowski(f64),
    Chebyshev,
    StdEuclidean,
    Mahalanobis,
}

impl MetricChoice {
    pub fn from_family(family: MetricFamily, p: f64) -> Self {
        match family {
            MetricFamily::Euclidean => Self::Euclidean,
            MetricFamily::Manhattan => Self::Manhattan,
            MetricFamily::Minkowski => Self::Minkowski(p),
            MetricFamily::Chebyshev => Self::Chebyshev,
            MetricFamily::StdEuclidean => Self::StdEuclidean,
            MetricFamily::Mahalanobis => Self::Mahalanobis,
        }
    }

    pub fn family(&self) -> MetricFamily {
        match self {
            Self::Euclidean => MetricFamily::Euclidean,
            Self::Manhattan => MetricFamily::Manhattan,
            Self::Minkowski(_) => MetricFamily::Minkowski,
            Self::Chebyshev => MetricFamily::Chebyshev,
            Self::StdEuclidean => MetricFamily::StdEuclidean,
            Self::Mahalanobis => MetricFamily::Mahalanobis,
        }
    }

    /// Binds the choice to scaled training data.
    pub fn resolve(&self, scaled_train: &Dataset) -> Result<MetricSpec> {
        match *self {
            Self::Euclidean => Ok(MetricSpec::Euclidean),
            Self::Manhattan => Ok(MetricSpec::Manhattan),
            Self::Minkowski(p) => MetricSpec::minkowski(p),
            Self::Chebyshev => Ok(MetricSpec::Chebyshev),
            Self::StdEuclidean => {
                let params = fit_scaler(scaled_train, ScalerKind::ZScore)?;
                let n = scaled_train.n() as f64;
                // Sample variances; constant columns fall back to 1.
                let variances = params
                    .spread()
                    .iter()
                    .map(|s| {
                        let v = s * s * n / (n - 1.0).max(1.0);
                        if v > 0.0 {
                            v
                        } else {
                            1.0
                        }
                    })
                    .collect();
                MetricSpec::std_euclidean(variances)
            }
            Self::Mahalanobis => fit_mahalanobis(scaled_train, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidsConfig {
    pub k: usize,
    pub metric: MetricChoice,
    pub forest: ForestParams,
    pub scaler: ScalerKind,
    /// Importances below this are raised to it before use as weights.
    pub importance_floor: f64,
    pub use_index: bool,
}

impl Default for FidsConfig {
    fn default() -> Self {
        Self {
            k: 5,
            metric: MetricChoice::Euclidean,
            forest: ForestParams::default(),
            scaler: ScalerKind::ZScore,
            importance_floor: 0.0,
            use_index: false,
        }
    }
}

impl FidsConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return arg_err("k must be at least 1");
        }
        if !(self.importance_floor.is_finite() && self.importance_floor >= 0.0) {
            return arg_err("importance floor must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidsModel {
    scaler: ScalerParams,
    importance: ImportanceVector,
    weights: WeightVector,
    knn: KnnModel,
    feature_names: Vec<String>,
    class_labels: Vec<String>,
}

/// Weights for a KNN on unscaled rows that reproduces `weights` applied to
/// scaled rows. Constant columns scale to 0 and get weight 0.
fn unscaled_weights(scaler: &ScalerParams, weights: &WeightVector) -> Result<WeightVector> {
    let w = weights
        .as_slice()
        .iter()
        .zip(scaler.spread())
        .map(|(w, s)| if *s == 0.0 { 0.0 } else { w / s })
        .collect();
    WeightVector::new(w)
}

/// `max(importance_i, floor)` for every feature.
pub fn clamp_weights(importance: &ImportanceVector, floor: f64) -> Result<WeightVector> {
    let w: Vec<f64> = importance
        .average_error
        .iter()
        .map(|&e| e.max(floor))
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        return Err(FidsError::DegenerateWeights);
    }
    WeightVector::new(w)
}

pub fn fit_fids(train: &Dataset, config: &FidsConfig) -> Result<FidsModel> {
    config.validate()?;
    if train.n() < 2 {
        return arg_err("FIDS needs at least two training rows");
    }
    let scaler = fit_scaler(train, config.scaler)?;
    let scaled = transform(&scaler, train)?;
    let forest = train_forest(&scaled, &config.forest)?;
    let importance = forest.permutation_importance(&scaled, config.forest.seed)?;
    let weights = clamp_weights(&importance, config.importance_floor)?;
    let spec = config.metric.resolve(&scaled)?;
    let knn = fit_knn(
        train,
        config.k,
        spec,
        unscaled_weights(&scaler, &weights)?,
        config.use_index,
    )?;
    Ok(FidsModel {
        scaler,
        importance,
        weights,
        knn,
        feature_names: train.feature_names().to_vec(),
        class_labels: train.class_labels().to_vec(),
    })
}

/// The uniform-weight baseline: scaler fitted on `train`, KNN with all
/// weights 1, predictions for every `test` row in order.
pub fn baseline_predict(train: &Dataset, test: &Dataset, config: &FidsConfig) -> Result<Vec<usize>> {
    config.validate()?;
    if train.d() != test.d() {
        return arg_err("train and test have different feature counts");
    }
    let scaler = fit_scaler(train, config.scaler)?;
    let scaled = transform(&scaler, train)?;
    let spec = config.metric.resolve(&scaled)?;
    let weights = unscaled_weights(&scaler, &WeightVector::ones(train.d()))?;
    let knn = fit_knn(train, config.k, spec, weights, config.use_index)?;
    knn.predict_classes(test)
}

impl FidsModel {
    pub fn scaler(&self) -> &ScalerParams {
        &self.scaler
    }

    pub fn importance(&self) -> &ImportanceVector {
        &self.importance
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// The underlying KNN over unscaled training rows. Its weights are the
    /// model weights divided by the scaler spreads.
    pub fn knn(&self) -> &KnnModel {
        &self.knn
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Same scaler and metric with replacement weights. `train` must be the
    /// data the model was fitted on.
    pub fn with_weights(&self, train: &Dataset, weights: WeightVector) -> Result<FidsModel> {
        if weights.len() != self.scaler.d() {
            return arg_err(format!("{} weights for {} features", weights.len(), self.scaler.d()));
        }
        let knn = fit_knn(
            train,
            self.knn.k(),
            self.knn.spec().clone(),
            unscaled_weights(&self.scaler, &weights)?,
            self.knn.index().is_some(),
        )?;
        Ok(FidsModel {
            weights,
            knn,
            ..self.clone()
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.knn.predict_class(x)
    }

    /// Predictions for every row of `data`, in order.
    pub fn predict_batch(&self, data: &Dataset) -> Result<Vec<usize>> {
        self.knn.predict_classes(data)
    }

    /// Text form of the fitted model. `training_ref` identifies the training
    /// matrix (the rows themselves are not written).
    pub fn to_text(&self, training_ref: &str) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join("\t")
        };
        let mut out = String::new();
        let _ = writeln!(out, "fids-model\t{MODEL_FORMAT_VERSION}");
        let _ = writeln!(out, "training\t{}", training_ref.replace(['\t', '\n'], " "));
        let _ = writeln!(out, "k\t{}", self.knn.k());
        let _ = writeln!(out, "d\t{}", self.knn.d());
        let _ = writeln!(out, "scaler\t{}", self.scaler.kind().name());
        let spec = self.knn.spec();
        let _ = writeln!(out, "metric\t{}", spec.family().name());
        match spec {
            MetricSpec::Minkowski { p } => {
                let _ = writeln!(out, "minkowski_p\t{p:?}");
            }
            MetricSpec::StdEuclidean { variances } => {
                let _ = writeln!(out, "variances\t{}", join(variances));
            }
            MetricSpec::Mahalanobis { inv_covariance, d } => {
                for row in inv_covariance.chunks(*d) {
                    let _ = writeln!(out, "inv_covariance\t{}", join(row));
                }
            }
            _ => {}
        }
        let names: Vec<String> = self
            .feature_names
            .iter()
            .map(|n| n.replace(['\t', '\n'], " "))
            .collect();
        let _ = writeln!(out, "features\t{}", names.join("\t"));
        let _ = writeln!(out, "center\t{}", join(self.scaler.center()));
        let _ = writeln!(out, "spread\t{}", join(self.scaler.spread()));
        let _ = writeln!(out, "average_error\t{}", join(&self.importance.average_error));
        let _ = writeln!(out, "weights\t{}", join(self.weights.as_slice()));
        out
    }
}

/// The contents of a model text file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub version: u32,
    pub training_ref: String,
    pub k: usize,
    pub scaler: ScalerParams,
    pub metric: MetricSpec,
    pub feature_names: Vec<String>,
    pub average_error: Vec<f64>,
    pub weights: WeightVector,
}

impl ModelRecord {
    pub fn parse(text: &str) -> Result<ModelRecord> {
        let mut fields: Vec<(usize, &str, Vec<&str>)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let key = parts.next().unwrap_or_default();
            fields.push((i + 1, key, parts.collect()));
        }
        let fmt_err = |line: usize, message: String| FidsError::Format { line, message };
        let get = |key: &str| -> Result<(usize, &Vec<&str>)> {
            fields
                .iter()
                .find(|(_, k, _)| *k == key)
                .map(|(l, _, v)| (*l, v))
                .ok_or_else(|| fmt_err(0, format!("missing `{key}` line")))
        };
        let single = |key: &str| -> Result<(usize, &str)> {
            let (line, v) = get(key)?;
            match v.as_slice() {
                [x] => Ok((line, *x)),
                _ => Err(fmt_err(line, format!("`{key}` expects one value"))),
            }
        };
        let floats = |line: usize, v: &[&str]| -> Result<Vec<f64>> {
            v.iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| fmt_err(line, format!("bad number `{s}`")))
                })
                .collect()
        };
        let vector = |key: &str| -> Result<Vec<f64>> {
            let (line, v) = get(key)?;
            floats(line, v)
        };

        let (line, v) = single("fids-model")?;
        let version: u32 = v
            .parse()
            .map_err(|_| fmt_err(line, "bad format version".into()))?;
        if version != MODEL_FORMAT_VERSION {
            return Err(fmt_err(line, format!("unsupported format version {version}")));
        }
        let (_, training_ref) = get("training").map(|(l, v)| (l, v.join("\t")))?;
        let (line, k) = single("k")?;
        let k = k.parse().map_err(|_| fmt_err(line, "bad k".into()))?;
        let (line, d) = single("d")?;
        let d: usize = d.parse().map_err(|_| fmt_err(line, "bad d".into()))?;
        let (line, kind) = single("scaler")?;
        let kind = match kind {
            "zscore" => ScalerKind::ZScore,
            "minmax" => ScalerKind::MinMax,
            other => return Err(fmt_err(line, format!("unknown scaler `{other}`"))),
        };
        let scaler = ScalerParams::new(kind, vector("center")?, vector("spread")?)?;
        let (line, family) = single("metric")?;
        let family = MetricFamily::parse(family)
            .ok_or_else(|| fmt_err(line, format!("unknown metric `{family}`")))?;
        let metric = match family {
            MetricFamily::Euclidean => MetricSpec::Euclidean,
            MetricFamily::Manhattan => MetricSpec::Manhattan,
            MetricFamily::Chebyshev => MetricSpec::Chebyshev,
            MetricFamily::Minkowski => {
                let (line, p) = single("minkowski_p")?;
                MetricSpec::minkowski(p.parse().map_err(|_| fmt_err(line, "bad p".into()))?)?
            }
            MetricFamily::StdEuclidean => MetricSpec::std_euclidean(vector("variances")?)?,
            MetricFamily::Mahalanobis => {
                let mut m = Vec::with_capacity(d * d);
                for (line, _, v) in fields.iter().filter(|(_, k, _)| *k == "inv_covariance") {
                    m.extend(floats(*line, v)?);
                }
                MetricSpec::mahalanobis(m, d)?
            }
        };
        let (_, names) = get("features")?;
        let record = ModelRecord {
            version,
            training_ref,
            k,
            scaler,
            metric,
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            average_error: vector("average_error")?,
            weights: WeightVector::new(vector("weights")?)?,
        };
        let widths = [
            record.scaler.d(),
            record.feature_names.len(),
            record.average_error.len(),
            record.weights.len(),
        ];
        if widths.iter().any(|&w| w != d) {
            return Err(fmt_err(0, format!("vector lengths {widths:?} disagree with d = {d}")));
        }
        Ok(record)
    }
}
