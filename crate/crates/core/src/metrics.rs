//! Weighted distance functions.
//!
//! Weights act on coordinates: every metric is evaluated on the difference
//! of the transformed vectors `(w_j * x_j) - (w_j * y_j)`. For Euclidean
//! distance this is the same as weighting squared summands by `w_j^2`.

use crate::dataset::Dataset;
use crate::error::{arg_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricFamily {
    Euclidean,
    Manhattan,
    Minkowski,
    Chebyshev,
    StdEuclidean,
    Mahalanobis,
}

impl MetricFamily {
    pub const ALL: [MetricFamily; 6] = [
        MetricFamily::Euclidean,
        MetricFamily::Manhattan,
        MetricFamily::Minkowski,
        MetricFamily::Chebyshev,
        MetricFamily::StdEuclidean,
        MetricFamily::Mahalanobis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricFamily::Euclidean => "euclidean",
            MetricFamily::Manhattan => "manhattan",
            MetricFamily::Minkowski => "minkowski",
            MetricFamily::Chebyshev => "chebyshev",
            MetricFamily::StdEuclidean => "std-euclidean",
            MetricFamily::Mahalanobis => "mahalanobis",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s || f.name().replace('-', "_") == s)
    }

    /// Families whose distance is a coordinate-wise `L_p` norm and can
    /// therefore be served by a KD-tree.
    pub fn supports_index(self) -> bool {
        matches!(
            self,
            MetricFamily::Euclidean
                | MetricFamily::Manhattan
                | MetricFamily::Minkowski
                | MetricFamily::Chebyshev
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Euclidean,
    Manhattan,
    Minkowski { p: f64 },
    Chebyshev,
    StdEuclidean { variances: Vec<f64> },
    /// Row-major `d × d` inverse covariance.
    Mahalanobis { inv_covariance: Vec<f64>, d: usize },
}

impl MetricSpec {
    pub fn minkowski(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return arg_err(format!("Minkowski exponent must be finite and >= 1, got {p}"));
        }
        Ok(MetricSpec::Minkowski { p })
    }

    pub fn std_euclidean(variances: Vec<f64>) -> Result<Self> {
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return arg_err("standardized Euclidean variances must be finite and positive");
        }
        Ok(MetricSpec::StdEuclidean { variances })
    }

    /// Accepts a symmetric positive semi-definite matrix (within 1e-8).
    pub fn mahalanobis(inv_covariance: Vec<f64>, d: usize) -> Result<Self> {
        if inv_covariance.len() != d * d {
            return arg_err(format!(
                "inverse covariance has {} entries, expected {d}x{d}",
                inv_covariance.len()
            ));
        }
        if inv_covariance.iter().any(|v| !v.is_finite()) {
            return arg_err("inverse covariance has non-finite entries");
        }
        for i in 0..d {
            for j in 0..i {
                if (inv_covariance[i * d + j] - inv_covariance[j * d + i]).abs() > 1e-8 {
                    return arg_err("inverse covariance is not symmetric");
                }
            }
        }
        let mut shifted = inv_covariance.clone();
        for i in 0..d {
            shifted[i * d + i] += 1e-8;
        }
        if cholesky(&shifted, d, 0.0).is_none() {
            return arg_err("inverse covariance is not positive semi-definite");
        }
        Ok(MetricSpec::Mahalanobis { inv_covariance, d })
    }

    pub fn family(&self) -> MetricFamily {
        match self {
            MetricSpec::Euclidean => MetricFamily::Euclidean,
            MetricSpec::Manhattan => MetricFamily::Manhattan,
            MetricSpec::Minkowski { .. } => MetricFamily::Minkowski,
            MetricSpec::Chebyshev => MetricFamily::Chebyshev,
            MetricSpec::StdEuclidean { .. } => MetricFamily::StdEuclidean,
            MetricSpec::Mahalanobis { .. } => MetricFamily::Mahalanobis,
        }
    }

    /// Dimension the spec is bound to, if any.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            MetricSpec::StdEuclidean { variances } => Some(variances.len()),
            MetricSpec::Mahalanobis { d, .. } => Some(*d),
            _ => None,
        }
    }

    /// Weighted distance with the weights applied to differences, so
    /// `w * (a - b)` rather than `w * a - w * b`. Pairs with equal offsets
    /// get bit-identical distances whatever the weights. Lengths are not
    /// checked.
    pub(crate) fn weighted(&self, a: &[f64], b: &[f64], w: &[f64]) -> f64 {
        self.of_diffs(a.iter().zip(b).zip(w).map(|((x, y), w)| (x - y) * w))
    }

    /// Applies the metric to a sequence of per-coordinate differences.
    /// The KD-tree bounds go through this same path so that a bound built
    /// from smaller differences can never round above a true distance.
    pub(crate) fn of_diffs(&self, diffs: impl Iterator<Item = f64>) -> f64 {
        match self {
            MetricSpec::Euclidean => diffs.map(|t| t * t).sum::<f64>().sqrt(),
            MetricSpec::Manhattan => diffs.map(f64::abs).sum(),
            MetricSpec::Minkowski { p } => {
                if *p == 1.0 {
                    diffs.map(f64::abs).sum()
                } else if *p == 2.0 {
                    diffs.map(|t| t * t).sum::<f64>().sqrt()
                } else {
                    diffs.map(|t| t.abs().powf(*p)).sum::<f64>().powf(p.recip())
                }
            }
            MetricSpec::Chebyshev => diffs.map(f64::abs).fold(0.0, f64::max),
            MetricSpec::StdEuclidean { variances } => diffs
                .zip(variances)
                .map(|(t, v)| t * t / v)
                .sum::<f64>()
                .sqrt(),
            MetricSpec::Mahalanobis { inv_covariance, d } => {
                let delta: Vec<f64> = diffs.collect();
                let mut q = 0.0;
                for i in 0..*d {
                    let row = &inv_covariance[i * d..(i + 1) * d];
                    let dot: f64 = row.iter().zip(&delta).map(|(m, t)| m * t).sum();
                    q += delta[i] * dot;
                }
                q.max(0.0).sqrt()
            }
        }
    }
}

/// Non-negative per-feature multipliers applied to coordinates before a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return arg_err(format!("weights must be finite and non-negative, got {bad}"));
        }
        Ok(Self(weights))
    }

    pub fn ones(d: usize) -> Self {
        Self(vec![1.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_uniform_ones(&self) -> bool {
        self.0.iter().all(|&w| w == 1.0)
    }

    /// Every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * c).collect())
    }

    /// `w_j * x_j` for every coordinate.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(v, w)| v * w).collect()
    }
}

pub fn distance(spec: &MetricSpec, x: &[f64], y: &[f64], w: &WeightVector) -> Result<f64> {
    let d = x.len();
    if y.len() != d || w.len() != d {
        return arg_err(format!(
            "dimension mismatch: x has {d}, y has {}, weights have {}",
            y.len(),
            w.len()
        ));
    }
    if let Some(sd) = spec.dimension() {
        if sd != d {
            return arg_err(format!("metric is bound to {sd} dimensions, inputs have {d}"));
        }
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return arg_err("non-finite input to distance");
    }
    Ok(spec.weighted(x, y, w.as_slice()))
}

/// Lower-triangular Cholesky factor of a row-major symmetric matrix, or
/// `None` when the matrix is not (numerically) positive definite.
///
/// A pivot at or below `rel_tol` times its diagonal entry counts as singular.
fn cholesky(a: &[f64], d: usize, rel_tol: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if !(v > 0.0 && v > rel_tol * a[i * d + i]) || !v.is_finite() {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
fn spd_inverse(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let l = cholesky(a, d, 1e-10)?;
    // Invert L column by column (forward substitution on unit vectors).
    let mut linv = vec![0.0; d * d];
    for c in 0..d {
        for i in c..d {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[i * d + k] * linv[k * d + c];
            }
            linv[i * d + c] = s / l[i * d + i];
        }
    }
    // A^-1 = L^-T L^-1
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (i..d).map(|k| linv[k * d + i] * linv[k * d + j]).sum();
            inv[i * d + j] = s;
            inv[j * d + i] = s;
        }
    }
    if inv.iter().all(|v| v.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

/// Sample covariance (divide by `n - 1`), row-major.
pub fn sample_covariance(data: &Dataset) -> Result<Vec<f64>> {
    let (n, d) = (data.n(), data.d());
    if n < 2 {
        return arg_err("covariance needs at least two rows");
    }
    let mut mean = vec![0.0; d];
    for row in data.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for row in data.rows() {
        for j in 0..d {
            centered[j] = row[j] - mean[j];
        }
        for i in 0..d {
            for j in 0..=i {
                cov[i * d + j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[i * d + j] / (n - 1) as f64;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    Ok(cov)
}

/// Fits a Mahalanobis metric as the inverse of `covariance + ridge * I`.
///
/// `ridge = None` starts at `1e-6 × mean diagonal`; a ridge that leaves the
/// matrix singular is raised tenfold until the inversion succeeds.
pub fn fit_mahalanobis(train: &Dataset, ridge: Option<f64>) -> Result<MetricSpec> {
    let d = train.d();
    let cov = sample_covariance(train)?;
    let mean_diag = (0..d).map(|i| cov[i * d + i]).sum::<f64>() / d.max(1) as f64;
    let default_ridge = if mean_diag > 0.0 { 1e-6 * mean_diag } else { 1e-12 };
    let mut ridge = match ridge {
        Some(r) if !(r.is_finite() && r >= 0.0) => {
            return arg_err(format!("ridge must be finite and non-negative, got {r}"))
        }
        Some(r) => r,
        None => default_ridge,
    };
    loop {
        let mut a = cov.clone();
        for i in 0..d {
            a[i * d + i] += ridge;
        }
        if let Some(inv) = spd_inverse(&a, d) {
            return MetricSpec::mahalanobis(inv, d);
        }
        ridge = if ridge < default_ridge {
            default_ridge
        } else {
            ridge * 10.0
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(spec: &MetricSpec, x: &[f64], y: &[f64], w: &[f64]) -> f64 {
        distance(spec, x, y, &WeightVector::new(w.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn euclidean_345() {
        assert_eq!(d(&MetricSpec::Euclidean, &[0.0, 0.0], &[3.0, 4.0], &[1.0, 1.0]), 5.0);
    }

    #[test]
    fn weights_apply_before_the_metric() {
        // |2*1 - 2*4| + |1*2 - 1*6| = 6 + 4
        assert_eq!(d(&MetricSpec::Manhattan, &[1.0, 2.0], &[4.0, 6.0], &[2.0, 1.0]), 10.0);
        // Euclidean weights act as squared summand weights.
        let v = d(&MetricSpec::Euclidean, &[0.0, 0.0], &[1.0, 1.0], &[3.0, 4.0]);
        assert_eq!(v, 5.0);
    }

    #[test]
    fn identical_points_are_at_zero() {
        let x = [1.5, -2.0, 3.25];
        let specs = [
            MetricSpec::Euclidean,
            MetricSpec::Manhattan,
            MetricSpec::minkowski(3.0).unwrap(),
            MetricSpec::Chebyshev,
            MetricSpec::std_euclidean(vec![1.0, 2.0, 3.0]).unwrap(),
            MetricSpec::mahalanobis(vec![2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0], 3).unwrap(),
        ];
        for s in &specs {
            assert_eq!(d(s, &x, &x, &[1.0, 0.5, 2.0]), 0.0, "{:?}", s.family());
        }
    }

    #[test]
    fn chebyshev_and_std_euclidean_values() {
        assert_eq!(d(&MetricSpec::Chebyshev, &[1.0, 5.0], &[4.0, 3.0], &[1.0, 1.0]), 3.0);
        let s = MetricSpec::std_euclidean(vec![4.0, 9.0]).unwrap();
        // sqrt(2^2/4 + 3^2/9) = sqrt(2)
        assert!((d(&s, &[0.0, 0.0], &[2.0, 3.0], &[1.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let w = WeightVector::ones(2);
        assert!(distance(&MetricSpec::Euclidean, &[1.0], &[1.0, 2.0], &w).is_err());
        assert!(distance(&MetricSpec::Euclidean, &[1.0, f64::NAN], &[1.0, 2.0], &w).is_err());
        assert!(MetricSpec::minkowski(0.5).is_err());
        assert!(MetricSpec::std_euclidean(vec![1.0, 0.0]).is_err());
        assert!(MetricSpec::mahalanobis(vec![1.0, 2.0, 0.0, 1.0], 2).is_err());
        assert!(MetricSpec::mahalanobis(vec![-1.0, 0.0, 0.0, 1.0], 2).is_err());
        assert!(WeightVector::new(vec![1.0, -0.1]).is_err());
        assert!(WeightVector::new(vec![f64::INFINITY]).is_err());
    }

    fn dataset(rows: &[[f64; 2]]) -> Dataset {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Dataset::from_rows(&rows, &vec![0; rows.len()]).unwrap()
    }

    /// Four points on the axes at distance `a` and `b`; the sample
    /// covariance is diag(2a²/3, 2b²/3).
    fn cross(a: f64, b: f64) -> Dataset {
        dataset(&[[a, 0.0], [-a, 0.0], [0.0, b], [0.0, -b]])
    }

    #[test]
    fn identity_covariance_collapses_to_euclidean() {
        let a = 1.5f64.sqrt();
        let w = WeightVector::ones(2);
        // The default ridge (1e-6 of the mean variance) shrinks distances by
        // about half a part per million.
        let ridged = fit_mahalanobis(&cross(a, a), None).unwrap();
        let exact = fit_mahalanobis(&cross(a, a), Some(0.0)).unwrap();
        for (x, y) in [([0.1, 0.2], [0.7, -0.4]), ([1.0, 1.0], [-1.0, 0.5])] {
            let e = distance(&MetricSpec::Euclidean, &x, &y, &w).unwrap();
            let m = distance(&exact, &x, &y, &w).unwrap();
            assert!((m - e).abs() < 1e-12, "{m} vs {e}");
            let r = distance(&ridged, &x, &y, &w).unwrap();
            assert!((r - e).abs() < 1e-6 * e.max(1.0), "{r} vs {e}");
        }
    }

    #[test]
    fn diagonal_covariance_matches_std_euclidean() {
        let data = cross(6f64.sqrt(), 13.5f64.sqrt());
        let cov = sample_covariance(&data).unwrap();
        assert!((cov[0] - 4.0).abs() < 1e-12 && (cov[3] - 9.0).abs() < 1e-12);
        assert_eq!((cov[1], cov[2]), (0.0, 0.0));
        let spec = fit_mahalanobis(&data, Some(0.0)).unwrap();
        let std = MetricSpec::std_euclidean(vec![4.0, 9.0]).unwrap();
        let w = WeightVector::ones(2);
        for (x, y) in [([1.0, 2.0], [-3.0, 0.5]), ([0.0, 0.0], [2.0, 3.0])] {
            let m = distance(&spec, &x, &y, &w).unwrap();
            let s = distance(&std, &x, &y, &w).unwrap();
            assert!((m - s).abs() < 1e-9, "{m} vs {s}");
        }
    }

    #[test]
    fn singular_covariance_is_regularised() {
        // Second column duplicates the first.
        let data = dataset(&[[1.0, 1.0], [2.0, 2.0], [4.0, 4.0], [7.0, 7.0]]);
        let cov = sample_covariance(&data).unwrap();
        assert!(spd_inverse(&cov, 2).is_none());
        let spec = fit_mahalanobis(&data, Some(0.0)).unwrap();
        let MetricSpec::Mahalanobis { inv_covariance, .. } = &spec else {
            panic!("wrong family");
        };
        assert!(inv_covariance.iter().all(|v| v.is_finite()));
        let v = distance(&spec, &[1.0, 0.0], &[0.0, 1.0], &WeightVector::ones(2)).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn spd_inverse_round_trip() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let inv = spd_inverse(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in MetricFamily::ALL {
            assert_eq!(MetricFamily::parse(f.name()), Some(f));
        }
        assert_eq!(MetricFamily::parse("std_euclidean"), Some(MetricFamily::StdEuclidean));
        assert_eq!(MetricFamily::parse("cosine"), None);
    }
}
