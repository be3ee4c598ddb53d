//! Random forests: bootstrap-sampled CART trees with per-node random
//! feature subsets, out-of-bag error, and out-of-bag permutation importance.
//!
//! Every tree owns the ChaCha stream `seed / tree index`, and every
//! `(tree, feature)` permutation owns its own stream as well, so results are
//! identical whether trees are processed serially or in parallel.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{arg_err, FidsError, Result};
use crate::tree::{grow, DecisionTree, TreeParams};

/// Distinguishes importance permutation streams from tree-growing streams.
const PERMUTATION_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub seed: u64,
    /// Train and evaluate trees on the rayon pool.
    pub parallel: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            tree: TreeParams::default(),
            seed: 7,
            parallel: true,
        }
    }
}

/// `n` draws with replacement from `0..n`, plus the mask of rows never drawn.
pub fn bootstrap_sample<R: Rng>(n: usize, rng: &mut R) -> (Vec<usize>, Vec<bool>) {
    let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut oob = vec![true; n];
    for &i in &indices {
        oob[i] = false;
    }
    (indices, oob)
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

fn permutation_rng(seed: u64, tree: usize, feature: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PERMUTATION_SALT);
    rng.set_stream(((tree as u64) << 32) | feature as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
    /// `oob_masks[j][i]` is true when row `i` is out of bag for tree `j`.
    oob_masks: Vec<Vec<bool>>,
    params: ForestParams,
    n_features: usize,
    n_classes: usize,
}

fn map_trees<T: Send>(parallel: bool, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

pub fn train_forest(train: &Dataset, params: &ForestParams) -> Result<ForestModel> {
    if params.n_trees == 0 {
        return arg_err("a forest needs at least one tree");
    }
    if train.n() < 2 {
        return arg_err("a forest needs at least two training rows");
    }
    if train.labels().is_none() {
        return arg_err("forests need class targets");
    }
    params.tree.resolve_mtry(train.d())?;
    let grown = map_trees(params.parallel, params.n_trees, |j| {
        let mut rng = tree_rng(params.seed, j);
        let (rows, oob) = bootstrap_sample(train.n(), &mut rng);
        grow(&rows, train, &params.tree, &mut rng).map(|t| (t, oob))
    });
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut oob_masks = Vec::with_capacity(params.n_trees);
    for result in grown {
        let (tree, oob) = result?;
        trees.push(tree);
        oob_masks.push(oob);
    }
    Ok(ForestModel {
        trees,
        oob_masks,
        params: *params,
        n_features: train.d(),
        n_classes: train.n_classes(),
    })
}

/// Most-voted class; ties go to the smaller class index.
fn vote(votes: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OobEstimate {
    /// Misclassification rate over rows that received at least one OOB vote.
    pub error: f64,
    pub voted: usize,
    /// Rows that were in the bootstrap of every tree.
    pub skipped: usize,
}

/// Per-feature permutation importance.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    /// Mean over evaluated trees of the per-tree error increase.
    pub average_error: Vec<f64>,
    /// One row per evaluated tree: OOB error with the feature permuted minus
    /// the unpermuted OOB error.
    pub per_tree_error: Vec<Vec<f64>>,
    /// Forest tree index of each `per_tree_error` row. Trees without any
    /// out-of-bag rows are left out.
    pub evaluated_trees: Vec<usize>,
}

impl ForestModel {
    /// Assembles a forest from existing trees (all trained on `n` rows).
    pub fn from_parts(
        trees: Vec<DecisionTree>,
        oob_masks: Vec<Vec<bool>>,
        params: ForestParams,
    ) -> Result<Self> {
        let Some(first) = trees.first() else {
            return arg_err("a forest needs at least one tree");
        };
        let (n_features, n_classes) = (first.n_features(), first.n_classes());
        if trees.len() != oob_masks.len() {
            return arg_err("one out-of-bag mask per tree is required");
        }
        let n = oob_masks[0].len();
        if oob_masks.iter().any(|m| m.len() != n)
            || trees
                .iter()
                .any(|t| t.n_features() != n_features || t.n_classes() != n_classes)
        {
            return arg_err("trees and masks disagree on shape");
        }
        Ok(Self {
            params: ForestParams {
                n_trees: trees.len(),
                ..params
            },
            trees,
            oob_masks,
            n_features,
            n_classes,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn oob_masks(&self) -> &[Vec<bool>] {
        &self.oob_masks
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Fraction of `(row, tree)` pairs that are out of bag.
    pub fn oob_fraction(&self) -> f64 {
        let total: usize = self.oob_masks.iter().map(Vec::len).sum();
        let oob: usize = self
            .oob_masks
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count())
            .sum();
        oob as f64 / total as f64
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return arg_err(format!(
                "input has {} values, forest expects {}",
                x.len(),
                self.n_features
            ));
        }
        let mut votes = vec![0; self.n_classes.max(1)];
        for t in &self.trees {
            votes[t.predict_with(|f| x[f])] += 1;
        }
        Ok(vote(&votes))
    }

    fn check_training_data<'a>(&self, train: &'a Dataset) -> Result<&'a [usize]> {
        let n = self.oob_masks[0].len();
        if train.n() != n || train.d() != self.n_features {
            return arg_err(format!(
                "forest was trained on {n} x {} data, got {} x {}",
                self.n_features,
                train.n(),
                train.d()
            ));
        }
        train
            .labels()
            .ok_or_else(|| FidsError::Argument("forests need class targets".into()))
    }

    /// Majority vote of each row over only the trees it was out of bag for.
    pub fn oob_error(&self, train: &Dataset) -> Result<OobEstimate> {
        let labels = self.check_training_data(train)?;
        let (mut voted, mut wrong) = (0, 0);
        let mut votes = vec![0; self.n_classes.max(1)];
        for (i, &truth) in labels.iter().enumerate() {
            votes.iter_mut().for_each(|v| *v = 0);
            let mut any = false;
            for (tree, mask) in self.trees.iter().zip(&self.oob_masks) {
                if mask[i] {
                    any = true;
                    votes[tree.predict_with(|f| train.value(i, f))] += 1;
                }
            }
            if any {
                voted += 1;
                wrong += (vote(&votes) != truth) as usize;
            }
        }
        if voted == 0 {
            return Err(FidsError::DegenerateForest);
        }
        Ok(OobEstimate {
            error: wrong as f64 / voted as f64,
            voted,
            skipped: labels.len() - voted,
        })
    }

    /// Out-of-bag permutation importance.
    ///
    /// For tree `j` and feature `i`, the values of feature `i` are shuffled
    /// among the tree's OOB rows and the resulting OOB misclassification rate
    /// is compared with the unshuffled one; `average_error[i]` is the mean of
    /// that increase over all trees with a non-empty OOB set. Positive values
    /// mean the feature matters.
    pub fn permutation_importance(&self, train: &Dataset, seed: u64) -> Result<ImportanceVector> {
        let labels = self.check_training_data(train)?;
        let d = self.n_features;
        let rows = map_trees(self.params.parallel, self.trees.len(), |j| {
            self.tree_importance(j, train, labels, seed)
        });
        let mut per_tree_error = Vec::new();
        let mut evaluated_trees = Vec::new();
        for (j, row) in rows.into_iter().enumerate() {
            if let Some(row) = row {
                per_tree_error.push(row);
                evaluated_trees.push(j);
            }
        }
        if per_tree_error.is_empty() {
            return Err(FidsError::DegenerateForest);
        }
        let average_error = (0..d)
            .map(|i| {
                per_tree_error.iter().map(|r| r[i]).sum::<f64>() / per_tree_error.len() as f64
            })
            .collect();
        Ok(ImportanceVector {
            average_error,
            per_tree_error,
            evaluated_trees,
        })
    }

    fn tree_importance(
        &self,
        j: usize,
        train: &Dataset,
        labels: &[usize],
        seed: u64,
    ) -> Option<Vec<f64>> {
        let tree = &self.trees[j];
        let oob: Vec<usize> = (0..train.n()).filter(|&i| self.oob_masks[j][i]).collect();
        if oob.is_empty() {
            return None;
        }
        let d = self.n_features;
        let m = oob.len() as f64;

        // Baseline predictions, and for each feature the OOB positions whose
        // decision path tests it. Other rows cannot change when it is permuted.
        let mut baseline_wrong = 0usize;
        let mut baseline_correct = Vec::with_capacity(oob.len());
        let mut touching: Vec<Vec<usize>> = vec![Vec::new(); d];
        let mut path = Vec::new();
        for (pos, &r) in oob.iter().enumerate() {
            let correct = tree.predict_with(|f| train.value(r, f)) == labels[r];
            baseline_wrong += (!correct) as usize;
            baseline_correct.push(correct);
            path.clear();
            tree.path_features(|f| train.value(r, f), &mut path);
            path.sort_unstable();
            path.dedup();
            for &f in &path {
                touching[f].push(pos);
            }
        }

        let used = tree.used_features();
        let mut errors = vec![0.0; d];
        let mut values = Vec::with_capacity(oob.len());
        for i in 0..d {
            if !used[i] {
                continue;
            }
            values.clear();
            values.extend(oob.iter().map(|&r| train.value(r, i)));
            values.shuffle(&mut permutation_rng(seed, j, i));
            let mut delta = 0isize;
            for &pos in &touching[i] {
                let r = oob[pos];
                let pred = tree.predict_with(|f| if f == i { values[pos] } else { train.value(r, f) });
                let correct = pred == labels[r];
                delta += baseline_correct[pos] as isize - correct as isize;
            }
            let permuted_wrong = baseline_wrong as isize + delta;
            errors[i] = permuted_wrong as f64 / m - baseline_wrong as f64 / m;
        }
        Some(errors)
    }
}
