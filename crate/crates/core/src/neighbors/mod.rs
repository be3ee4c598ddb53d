//! K-nearest-neighbor search and prediction.
//!
//! The model is a lazy learner: fitting stores the weight-transformed
//! training matrix (and optionally a KD-tree over it). Neighbor ties at the
//! k-th distance go to the smaller training-row index, so brute-force and
//! indexed searches return identical neighbor sets.

mod kdtree;

use rayon::prelude::*;

pub use kdtree::{KdTree, LEAF_SIZE};

use crate::dataset::{Dataset, Targets};
use crate::error::{arg_err, FidsError, Result};
use crate::metrics::{MetricSpec, WeightVector};

/// The `k` nearest training rows, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

/// Bounded, sorted candidate list ordered by `(distance, index)`.
pub(crate) struct Candidates {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn worse(a: (f64, usize), b: (f64, usize)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
    }

    pub(crate) fn offer(&mut self, dist: f64, index: usize) {
        if self.items.len() == self.k {
            if !Self::worse(self.items[self.k - 1], (dist, index)) {
                return;
            }
            self.items.pop();
        }
        let pos = self
            .items
            .partition_point(|&item| !Self::worse(item, (dist, index)));
        self.items.insert(pos, (dist, index));
    }

    /// Whether a region whose points are all at least `bound` away could
    /// still contribute, counting exact ties.
    pub(crate) fn admits(&self, bound: f64) -> bool {
        match self.items.last() {
            Some(&(worst, _)) if self.items.len() == self.k => {
                bound <= worst + worst * 1e-12
            }
            _ => true,
        }
    }

    fn into_set(self) -> NeighborSet {
        let (distances, indices) = self.items.into_iter().unzip();
        NeighborSet { indices, distances }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    /// Training rows as given, row-major. Weights enter through distances.
    points: Vec<f64>,
    targets: Targets,
    n: usize,
    d: usize,
    k: usize,
    n_classes: usize,
    spec: MetricSpec,
    weights: WeightVector,
    index: Option<KdTree>,
}

pub fn fit_knn(
    train: &Dataset,
    k: usize,
    spec: MetricSpec,
    weights: WeightVector,
    use_index: bool,
) -> Result<KnnModel> {
    let (n, d) = (train.n(), train.d());
    if k == 0 || k > n {
        return arg_err(format!("k must lie in 1..={n}, got {k}"));
    }
    if weights.len() != d {
        return arg_err(format!("{} weights for {d} features", weights.len()));
    }
    if let Some(sd) = spec.dimension() {
        if sd != d {
            return arg_err(format!("metric is bound to {sd} dimensions, data has {d}"));
        }
    }
    if use_index && !spec.family().supports_index() {
        return Err(FidsError::UnsupportedIndex(spec.family().name()));
    }
    let points = train.features().to_vec();
    let index = use_index.then(|| KdTree::build(&points, d, weights.as_slice()));
    Ok(KnnModel {
        points,
        targets: train.targets().clone(),
        n,
        d,
        k,
        n_classes: train.n_classes(),
        spec,
        weights,
        index,
    })
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn index(&self) -> Option<&KdTree> {
        self.index.as_ref()
    }

    /// Training matrix, row-major.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return arg_err(format!("query has {} values, model expects {}", x.len(), self.d));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return arg_err("non-finite query value");
        }
        Ok(())
    }

    pub fn query(&self, x: &[f64]) -> Result<NeighborSet> {
        self.check_query(x)?;
        let mut found = Candidates::new(self.k);
        match &self.index {
            Some(tree) => tree.search(&self.points, &self.spec, self.weights.as_slice(), x, &mut found),
            None => self.brute_force(x, &mut found),
        }
        Ok(found.into_set())
    }

    /// Exhaustive search, ignoring any index.
    pub fn query_brute_force(&self, x: &[f64]) -> Result<NeighborSet> {
        self.check_query(x)?;
        let mut found = Candidates::new(self.k);
        self.brute_force(x, &mut found);
        Ok(found.into_set())
    }

    fn brute_force(&self, q: &[f64], found: &mut Candidates) {
        if self.d == 0 {
            for i in 0..self.n {
                found.offer(0.0, i);
            }
            return;
        }
        for (i, p) in self.points.chunks_exact(self.d).enumerate() {
            found.offer(self.spec.weighted(p, q, self.weights.as_slice()), i);
        }
    }

    fn class_targets(&self) -> Result<&[usize]> {
        match &self.targets {
            Targets::Class(v) => Ok(v),
            Targets::Real(_) => arg_err("model was fitted on regression targets"),
        }
    }

    /// Majority vote over the neighbors. Vote ties go to the class with the
    /// smaller summed neighbor distance, then to the smaller class index.
    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        let labels = self.class_targets()?;
        let set = self.query(x)?;
        let mut votes = vec![(0usize, 0.0f64); self.n_classes.max(1)];
        for (&i, &dist) in set.indices.iter().zip(&set.distances) {
            let v = &mut votes[labels[i]];
            v.0 += 1;
            v.1 += dist;
        }
        let mut best = 0;
        for c in 1..votes.len() {
            let (count, sum) = votes[c];
            let (bc, bs) = votes[best];
            if count > bc || (count == bc && sum < bs) {
                best = c;
            }
        }
        Ok(best)
    }

    /// Unweighted mean of the neighbors' targets.
    pub fn predict_regress(&self, x: &[f64]) -> Result<f64> {
        let Targets::Real(values) = &self.targets else {
            return arg_err("model was fitted on class targets");
        };
        let set = self.query(x)?;
        Ok(set.indices.iter().map(|&i| values[i]).sum::<f64>() / set.indices.len() as f64)
    }

    /// Class predictions for every row of `data`, in row order.
    pub fn predict_classes(&self, data: &Dataset) -> Result<Vec<usize>> {
        self.predict_rows(data.features(), data.d())
    }

    /// Class predictions for a row-major matrix with `d` columns. Rows are
    /// processed in parallel; output order follows input order.
    pub fn predict_rows(&self, rows: &[f64], d: usize) -> Result<Vec<usize>> {
        if d != self.d {
            return arg_err(format!("rows have {d} values, model expects {}", self.d));
        }
        if d == 0 {
            return arg_err("cannot predict zero-width rows");
        }
        rows.par_chunks_exact(d)
            .map(|row| self.predict_class(row))
            .collect()
    }
}

/// Fraction of positions where `predictions` equals `truth`.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return arg_err(format!(
            "{} predictions for {} truth labels",
            predictions.len(),
            truth.len()
        ));
    }
    if truth.is_empty() {
        return arg_err("accuracy of an empty prediction list");
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(rows: &[Vec<f64>], labels: &[usize], k: usize, index: bool) -> KnnModel {
        let data = Dataset::from_rows(rows, labels).unwrap();
        fit_knn(&data, k, MetricSpec::Euclidean, WeightVector::ones(data.d()), index).unwrap()
    }

    #[test]
    fn nearer_point_wins() {
        let m = model(&[vec![0.0, 0.0], vec![10.0, 10.0]], &[0, 1], 1, false);
        let set = m.query(&[1.0, 1.0]).unwrap();
        assert_eq!(set.indices, vec![0]);
        assert_eq!(m.predict_class(&[9.0, 9.0]).unwrap(), 1);
    }

    #[test]
    fn self_query_is_first_at_zero() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![0.5, 0.5]];
        let m = model(&rows, &[0, 1, 0], 2, false);
        let set = m.query(&[3.0, 1.0]).unwrap();
        assert_eq!((set.indices[0], set.distances[0]), (1, 0.0));
    }

    #[test]
    fn distance_ties_prefer_smaller_index() {
        // Rows 1 and 2 are both at distance 1 from the query.
        let rows = vec![vec![5.0], vec![1.0], vec![-1.0], vec![0.1]];
        let m = model(&rows, &[0, 0, 1, 1], 2, false);
        let set = m.query(&[0.0]).unwrap();
        assert_eq!(set.indices, vec![3, 1]);
        let rows = vec![vec![-1.0], vec![1.0]];
        let m = model(&rows, &[0, 1], 1, false);
        assert_eq!(m.query(&[0.0]).unwrap().indices, vec![0]);
    }

    #[test]
    fn k_equal_n_returns_everything() {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.3, (i * i) as f64]).collect();
        let m = model(&rows, &[0, 1, 0, 1, 0, 1, 1], 7, false);
        let mut idx = m.query(&[0.2, 0.1]).unwrap().indices;
        idx.sort();
        assert_eq!(idx, (0..7).collect::<Vec<_>>());
        // Majority class of the training set: four 1s against three 0s.
        assert_eq!(m.predict_class(&[100.0, -4.0]).unwrap(), 1);
    }

    #[test]
    fn majority_vote() {
        let rows = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0]];
        let m = model(&rows, &[0, 0, 1, 1], 3, false);
        assert_eq!(m.predict_class(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn vote_ties_use_distance_sum_then_class_index() {
        // k=2, one vote each; class 1's neighbor is nearer.
        let rows = vec![vec![-2.0], vec![1.0]];
        let m = model(&rows, &[0, 1], 2, false);
        assert_eq!(m.predict_class(&[0.0]).unwrap(), 1);
        // Equal distance sums as well: smaller class index.
        let rows = vec![vec![1.0], vec![-1.0]];
        let m = model(&rows, &[1, 0], 2, false);
        assert_eq!(m.predict_class(&[0.0]).unwrap(), 0);
    }

    fn regression(values: &[f64], k: usize) -> KnnModel {
        let features: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        let data = Dataset::new(
            features,
            1,
            Targets::Real(values.to_vec()),
            vec!["x".into()],
            Vec::new(),
        )
        .unwrap();
        fit_knn(&data, k, MetricSpec::Euclidean, WeightVector::ones(1), false).unwrap()
    }

    #[test]
    fn regression_averages_neighbors() {
        let m = regression(&[2.0, 4.0, 100.0], 2);
        assert_eq!(m.predict_regress(&[0.4]).unwrap(), 3.0);
        let m = regression(&[2.0, 4.0, 100.0], 1);
        assert_eq!(m.predict_regress(&[1.9]).unwrap(), 100.0);
        let values = [1.5, -2.0, 7.25, 3.0];
        let m = regression(&values, 4);
        let mean = values.iter().sum::<f64>() / 4.0;
        assert!((m.predict_regress(&[10.0]).unwrap() - mean).abs() < 1e-15);
        assert!(m.predict_class(&[0.0]).is_err());
    }

    #[test]
    fn fit_errors() {
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0]], &[0, 1]).unwrap();
        let w = WeightVector::ones(1);
        assert!(fit_knn(&data, 3, MetricSpec::Euclidean, w.clone(), false).is_err());
        assert!(fit_knn(&data, 0, MetricSpec::Euclidean, w.clone(), false).is_err());
        let std = MetricSpec::std_euclidean(vec![1.0]).unwrap();
        assert_eq!(
            fit_knn(&data, 1, std, w.clone(), true).unwrap_err(),
            FidsError::UnsupportedIndex("std-euclidean")
        );
        let m = fit_knn(&data, 1, MetricSpec::Euclidean, w, false).unwrap();
        assert!(m.query(&[f64::NAN]).is_err());
        assert!(m.query(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 2, 0], &[0, 1, 2]).unwrap(), 0.0);
        let truth = vec![0usize; 150];
        let mut pred = truth.clone();
        pred[..7].iter_mut().for_each(|p| *p = 1);
        assert!((accuracy(&pred, &truth).unwrap() - 143.0 / 150.0).abs() < 1e-15);
        assert!((accuracy(&pred, &truth).unwrap() - 0.9533333333).abs() < 1e-10);
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn kdtree_structure_and_equivalence() {
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin() * 10.0, (t * 0.11).cos() * 3.0, (i % 7) as f64]
            })
            .collect();
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let m = model(&rows, &labels, 5, true);
        let tree = m.index().unwrap();
        assert!(tree.validate(m.points()));
        assert_eq!(tree.len(), 300);
        for q in 0..50 {
            let x = [q as f64 * 0.4 - 10.0, (q as f64).sin(), (q % 7) as f64];
            assert_eq!(m.query(&x).unwrap(), m.query_brute_force(&x).unwrap());
        }
    }

    #[test]
    fn grid_ties_survive_weight_scaling() {
        // Offsets of +1 and -1 in the same column tie exactly, so the
        // smaller index must win at every weight scale.
        let rows: Vec<Vec<f64>> = (0..125)
            .map(|i| vec![(i % 5 + 1) as f64, (i / 5 % 5 + 1) as f64, (i / 25 + 1) as f64])
            .collect();
        let data = Dataset::from_rows(&rows, &vec![0; 125]).unwrap();
        let w = WeightVector::new(vec![0.07, 0.31, 0.013]).unwrap();
        for index in [false, true] {
            let base = fit_knn(&data, 7, MetricSpec::Euclidean, w.clone(), index).unwrap();
            for c in [1e-3, 3.0, 1e3] {
                let scaled = fit_knn(&data, 7, MetricSpec::Euclidean, w.scaled(c).unwrap(), index).unwrap();
                for x in &rows {
                    assert_eq!(base.query(x).unwrap().indices, scaled.query(x).unwrap().indices);
                }
            }
        }
    }

    #[test]
    fn kdtree_handles_duplicates() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![(i % 3) as f64, 1.0]).collect();
        let m = model(&rows, &vec![0; 100], 17, true);
        assert!(m.index().unwrap().validate(m.points()));
        for x in [[0.0, 1.0], [1.5, 0.0], [2.0, 1.0]] {
            assert_eq!(m.query(&x).unwrap(), m.query_brute_force(&x).unwrap());
        }
    }
}
