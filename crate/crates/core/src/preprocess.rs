//! Column-wise affine scalers fitted on training data only.

use crate::dataset::Dataset;
use crate::error::{arg_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalerKind {
    /// Zero mean, unit population variance.
    ZScore,
    /// Training minimum maps to 0 and maximum to 1.
    MinMax,
}

impl ScalerKind {
    pub fn name(self) -> &'static str {
        match self {
            ScalerKind::ZScore => "zscore",
            ScalerKind::MinMax => "minmax",
        }
    }
}

/// Fitted per-column statistics. A cell `x` in column `j` maps to
/// `(x - center[j]) / spread[j]`, or to 0 when `spread[j] == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    kind: ScalerKind,
    center: Vec<f64>,
    spread: Vec<f64>,
}

impl ScalerParams {
    pub fn new(kind: ScalerKind, center: Vec<f64>, spread: Vec<f64>) -> Result<Self> {
        if center.len() != spread.len() {
            return arg_err("center and spread lengths differ");
        }
        if center.iter().any(|v| !v.is_finite())
            || spread.iter().any(|s| !s.is_finite() || *s < 0.0)
        {
            return arg_err("scaler statistics must be finite with non-negative spread");
        }
        Ok(Self {
            kind,
            center,
            spread,
        })
    }

    pub fn kind(&self) -> ScalerKind {
        self.kind
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn spread(&self) -> &[f64] {
        &self.spread
    }

    pub fn d(&self) -> usize {
        self.center.len()
    }

    pub fn is_constant(&self, j: usize) -> bool {
        self.spread[j] == 0.0
    }

    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.d()).filter(|&j| self.is_constant(j)).collect()
    }

    /// Scales one row in place. The caller guarantees `row.len() == d`.
    pub(crate) fn apply_in_place(&self, row: &mut [f64]) {
        for ((x, c), s) in row.iter_mut().zip(&self.center).zip(&self.spread) {
            *x = if *s == 0.0 { 0.0 } else { (*x - c) / s };
        }
    }

    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return arg_err(format!("row has {} values, scaler expects {}", x.len(), self.d()));
        }
        let mut out = x.to_vec();
        self.apply_in_place(&mut out);
        Ok(out)
    }

    /// Maps scaled values back to the original units. Constant columns
    /// return their center.
    pub fn inverse_row(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.d() {
            return arg_err(format!("row has {} values, scaler expects {}", z.len(), self.d()));
        }
        Ok(z.iter()
            .zip(&self.center)
            .zip(&self.spread)
            .map(|((z, c), s)| z * s + c)
            .collect())
    }
}

pub fn fit_scaler(train: &Dataset, kind: ScalerKind) -> Result<ScalerParams> {
    let (n, d) = (train.n(), train.d());
    if n == 0 {
        return arg_err("cannot fit a scaler on an empty dataset");
    }
    let (center, spread) = match kind {
        ScalerKind::ZScore => {
            let mut mean = vec![0.0; d];
            for row in train.rows() {
                for (m, x) in mean.iter_mut().zip(row) {
                    *m += x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            let mut var = vec![0.0; d];
            for row in train.rows() {
                for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                    *v += (x - m) * (x - m);
                }
            }
            // Exactly constant columns can still leave rounding residue in the mean.
            let std = var
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let first = train.value(0, j);
                    if train.rows().all(|r| r[j] == first) {
                        0.0
                    } else {
                        (v / n as f64).sqrt()
                    }
                })
                .collect();
            (mean, std)
        }
        ScalerKind::MinMax => {
            let mut min = vec![f64::INFINITY; d];
            let mut max = vec![f64::NEG_INFINITY; d];
            for row in train.rows() {
                for j in 0..d {
                    min[j] = min[j].min(row[j]);
                    max[j] = max[j].max(row[j]);
                }
            }
            let range = min.iter().zip(&max).map(|(lo, hi)| hi - lo).collect();
            (min, range)
        }
    };
    ScalerParams::new(kind, center, spread)
}

pub fn transform(params: &ScalerParams, data: &Dataset) -> Result<Dataset> {
    if data.d() != params.d() {
        return arg_err(format!(
            "dataset has {} features, scaler was fitted on {}",
            data.d(),
            params.d()
        ));
    }
    let mut features = data.features().to_vec();
    if params.d() > 0 {
        for row in features.chunks_exact_mut(params.d()) {
            params.apply_in_place(row);
        }
    }
    data.with_features(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        Dataset::from_rows(&rows, &vec![0; values.len()]).unwrap()
    }

    #[test]
    fn zscore_statistics() {
        let p = fit_scaler(&column(&[1.0, 2.0, 3.0]), ScalerKind::ZScore).unwrap();
        assert_eq!(p.center(), &[2.0]);
        assert!((p.spread()[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(!p.is_constant(0));
    }

    #[test]
    fn constant_column_is_flagged_and_zeroed() {
        let data = column(&[5.0, 5.0, 5.0]);
        let p = fit_scaler(&data, ScalerKind::ZScore).unwrap();
        assert_eq!((p.center()[0], p.spread()[0]), (5.0, 0.0));
        assert_eq!(p.constant_columns(), vec![0]);
        assert_eq!(transform(&p, &data).unwrap().features(), &[0.0; 3]);
    }

    #[test]
    fn minmax_statistics() {
        let p = fit_scaler(&column(&[2.0, 4.0, 10.0]), ScalerKind::MinMax).unwrap();
        assert_eq!((p.center()[0], p.spread()[0]), (2.0, 8.0));
        let t = transform(&p, &column(&[2.0, 4.0, 10.0])).unwrap();
        assert_eq!(t.features(), &[0.0, 0.25, 1.0]);
    }

    #[test]
    fn zscore_transform_of_fitting_data() {
        let data = column(&[1.0, 2.0, 3.0]);
        let p = fit_scaler(&data, ScalerKind::ZScore).unwrap();
        let z = transform(&p, &data).unwrap();
        let mean: f64 = z.features().iter().sum::<f64>() / 3.0;
        let var: f64 = z.features().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
        assert!((var.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn train_mean_maps_to_zero() {
        let p = fit_scaler(&column(&[1.0, 4.0, 7.0]), ScalerKind::ZScore).unwrap();
        assert_eq!(p.transform_row(&[4.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let p = fit_scaler(&column(&[1.0, 2.0]), ScalerKind::ZScore).unwrap();
        let wide = Dataset::from_rows(&[vec![1.0, 2.0]], &[0]).unwrap();
        assert!(transform(&p, &wide).is_err());
        assert!(p.transform_row(&[1.0, 2.0]).is_err());
    }
}
