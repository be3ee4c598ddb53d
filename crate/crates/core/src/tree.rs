//! CART classification trees grown on Gini impurity with a fresh random
//! feature subset at every node.

use rand::seq::index;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{arg_err, Result};

/// Impurity decreases smaller than this are treated as no decrease.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules fire.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidate features per split; `None` means `floor(sqrt(d))`.
    pub mtry: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            mtry: None,
        }
    }
}

impl TreeParams {
    /// The concrete `mtry` for `d` features.
    pub fn resolve_mtry(&self, d: usize) -> Result<usize> {
        let m = self
            .mtry
            .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1));
        if m == 0 || m > d {
            return arg_err(format!("mtry must lie in 1..={d}, got {m}"));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: usize,
        counts: Vec<usize>,
    },
}

/// Tree nodes live in an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    n_features: usize,
    n_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// `(n_L * gini_L + n_R * gini_R) / n`
    pub impurity: f64,
}

/// Computed from the integer `Σ count_c²`, so the result does not depend
/// on the order of the classes.
fn gini_from_counts(counts: &[usize], total: usize) -> f64 {
    let sumsq: u64 = counts.iter().map(|&c| (c as u64) * (c as u64)).sum();
    let t = total as f64;
    1.0 - sumsq as f64 / (t * t)
}

/// `1 - Σ p_c²` over the class frequencies of `labels`.
pub fn gini(labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return arg_err("gini impurity of an empty label set");
    }
    let n_classes = labels.iter().max().unwrap() + 1;
    let mut counts = vec![0; n_classes];
    for &c in labels {
        counts[c] += 1;
    }
    Ok(gini_from_counts(&counts, labels.len()))
}

fn class_labels(data: &Dataset) -> Result<&[usize]> {
    data.labels()
        .ok_or_else(|| crate::FidsError::Argument("trees need class targets".into()))
}

/// Weighted impurity from integer statistics. `sumsq` is `Σ count_c²`.
fn weighted(n_left: u64, sumsq_left: u64, n_right: u64, sumsq_right: u64) -> f64 {
    let n = (n_left + n_right) as f64;
    let left = n_left as f64 - sumsq_left as f64 / n_left as f64;
    let right = n_right as f64 - sumsq_right as f64 / n_right as f64;
    (left + right) / n
}

struct SplitSearch {
    pairs: Vec<(f64, usize)>,
    left: Vec<u64>,
    right: Vec<u64>,
}

impl SplitSearch {
    fn new(n_classes: usize) -> Self {
        Self {
            pairs: Vec::new(),
            left: vec![0; n_classes],
            right: vec![0; n_classes],
        }
    }

    fn run(
        &mut self,
        rows: &[usize],
        data: &Dataset,
        labels: &[usize],
        candidates: &[usize],
    ) -> Option<Split> {
        let n = rows.len() as u64;
        self.right.iter_mut().for_each(|c| *c = 0);
        for &r in rows {
            self.right[labels[r]] += 1;
        }
        let total = self.right.clone();
        let total_sumsq: u64 = total.iter().map(|c| c * c).sum();
        let parent = 1.0 - total_sumsq as f64 / (n * n) as f64;
        if parent <= 0.0 {
            return None;
        }

        let mut best: Option<Split> = None;
        for &f in candidates {
            self.pairs.clear();
            self.pairs
                .extend(rows.iter().map(|&r| (data.value(r, f), labels[r])));
            self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.pairs[0].0 == self.pairs[self.pairs.len() - 1].0 {
                continue;
            }
            self.left.iter_mut().for_each(|c| *c = 0);
            self.right.copy_from_slice(&total);
            let (mut sl, mut sr) = (0u64, total_sumsq);
            for t in 0..self.pairs.len() - 1 {
                let c = self.pairs[t].1;
                sl += 2 * self.left[c] + 1;
                sr -= 2 * self.right[c] - 1;
                self.left[c] += 1;
                self.right[c] -= 1;
                let (a, b) = (self.pairs[t].0, self.pairs[t + 1].0);
                if a == b {
                    continue;
                }
                let nl = t as u64 + 1;
                let impurity = weighted(nl, sl, n - nl, sr);
                if best.is_none_or(|s| impurity < s.impurity) {
                    let mid = a + (b - a) / 2.0;
                    // Adjacent floats can round the midpoint up onto `b`.
                    let threshold = if mid < b { mid } else { a };
                    best = Some(Split {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best.filter(|s| s.impurity < parent - MIN_GAIN)
    }
}

/// Best Gini split of `rows` over `candidate_features`, trying thresholds at
/// midpoints between consecutive distinct values. Ties go to the earlier
/// candidate feature and the smaller threshold. Returns `None` when no split
/// lowers impurity.
pub fn best_split(rows: &[usize], data: &Dataset, candidate_features: &[usize]) -> Option<Split> {
    let labels = data.labels()?;
    if rows.is_empty() || candidate_features.is_empty() {
        return None;
    }
    let mut sorted = candidate_features.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    SplitSearch::new(data.n_classes()).run(rows, data, labels, &sorted)
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

struct Grower<'a, R> {
    data: &'a Dataset,
    labels: &'a [usize],
    params: TreeParams,
    mtry: usize,
    rng: &'a mut R,
    search: SplitSearch,
    nodes: Vec<TreeNode>,
}

impl<R: Rng> Grower<'_, R> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let mut counts = vec![0; self.data.n_classes()];
        for &r in rows {
            counts[self.labels[r]] += 1;
        }
        self.nodes.push(TreeNode::Leaf {
            class: majority(&counts),
            counts,
        });
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let first = self.labels[rows[0]];
        let pure = rows.iter().all(|&r| self.labels[r] == first);
        if pure
            || rows.len() < self.params.min_samples_split
            || self.params.max_depth.is_some_and(|m| depth >= m)
        {
            return self.leaf(&rows);
        }
        let mut candidates = index::sample(self.rng, self.data.d(), self.mtry).into_vec();
        candidates.sort_unstable();
        let Some(split) = self
            .search
            .run(&rows, self.data, self.labels, &candidates)
        else {
            return self.leaf(&rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.data.value(r, split.feature) <= split.threshold);
        drop(rows);

        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            class: 0,
            counts: Vec::new(),
        });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows a tree on `rows` (repeats allowed, as in a bootstrap sample).
pub fn grow<R: Rng>(
    rows: &[usize],
    data: &Dataset,
    params: &TreeParams,
    rng: &mut R,
) -> Result<DecisionTree> {
    let labels = class_labels(data)?;
    if rows.is_empty() {
        return arg_err("cannot grow a tree on zero rows");
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= data.n()) {
        return arg_err(format!("row index {bad} out of range"));
    }
    let mtry = params.resolve_mtry(data.d())?;
    let mut grower = Grower {
        data,
        labels,
        params: *params,
        mtry,
        rng,
        search: SplitSearch::new(data.n_classes()),
        nodes: Vec::new(),
    };
    grower.grow(rows.to_vec(), 0);
    Ok(DecisionTree {
        nodes: grower.nodes,
        n_features: data.d(),
        n_classes: data.n_classes(),
    })
}

impl DecisionTree {
    /// Assembles a tree from explicit nodes (root first), checking that
    /// child links and feature indices are in range.
    pub fn from_nodes(nodes: Vec<TreeNode>, n_features: usize, n_classes: usize) -> Result<Self> {
        if nodes.is_empty() {
            return arg_err("a tree needs at least one node");
        }
        for node in &nodes {
            match node {
                TreeNode::Internal {
                    feature,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= n_features || *left >= nodes.len() || *right >= nodes.len() {
                        return arg_err("internal node references are out of range");
                    }
                }
                TreeNode::Leaf { class, counts } => {
                    if *class >= n_classes || counts.is_empty() {
                        return arg_err("leaf class out of range or empty histogram");
                    }
                }
            }
        }
        Ok(Self {
            nodes,
            n_features,
            n_classes,
        })
    }

    /// Single-leaf tree predicting `class`.
    pub fn constant(class: usize, n_features: usize, n_classes: usize) -> Result<Self> {
        let mut counts = vec![0; n_classes];
        if class < n_classes {
            counts[class] = 1;
        }
        Self::from_nodes(vec![TreeNode::Leaf { class, counts }], n_features, n_classes)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn depth(&self) -> usize {
        fn depth(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => {
                    1 + depth(nodes, *left).max(depth(nodes, *right))
                }
            }
        }
        depth(&self.nodes, 0)
    }

    /// Whether each feature appears in at least one split.
    pub fn used_features(&self) -> Vec<bool> {
        let mut used = vec![false; self.n_features];
        for node in &self.nodes {
            if let TreeNode::Internal { feature, .. } = node {
                used[*feature] = true;
            }
        }
        used
    }

    /// Routes `x` to a leaf: left when `x[feature] <= threshold`.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return arg_err(format!(
                "input has {} values, tree expects {}",
                x.len(),
                self.n_features
            ));
        }
        Ok(self.predict_with(|f| x[f]))
    }

    /// Prediction where feature values are supplied by `value`.
    pub(crate) fn predict_with(&self, value: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if value(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    /// Features tested on the path of `x`, appended to `out` (may repeat).
    pub(crate) fn path_features(&self, value: impl Fn(usize) -> f64, out: &mut Vec<usize>) {
        let mut i = 0;
        while let TreeNode::Internal {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[i]
        {
            out.push(*feature);
            i = if value(*feature) <= *threshold { *left } else { *right };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[0, 0, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[0, 0, 1, 1]).unwrap(), 0.5);
        // 1 - (9/16 + 1/16)
        assert_eq!(gini(&[0, 0, 0, 1]).unwrap(), 0.375);
        assert!(gini(&[]).is_err());
    }

    fn one_d(xs: &[f64], labels: &[usize]) -> Dataset {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn best_split_enumerates_midpoints() {
        // Midpoints 1.5, 6, 10.5 give impurities 1/3, 0, 1/3.
        let data = one_d(&[1.0, 2.0, 10.0, 11.0], &[0, 0, 1, 1]);
        let s = best_split(&[0, 1, 2, 3], &data, &[0]).unwrap();
        assert_eq!((s.feature, s.threshold, s.impurity), (0, 6.0, 0.0));
    }

    #[test]
    fn no_split_for_pure_or_constant_rows() {
        let data = one_d(&[1.0, 2.0, 3.0], &[1, 1, 1]);
        assert_eq!(best_split(&[0, 1, 2], &data, &[0]), None);
        let data = one_d(&[4.0, 4.0, 4.0], &[0, 1, 0]);
        assert_eq!(best_split(&[0, 1, 2], &data, &[0]), None);
    }

    #[test]
    fn split_ties_prefer_lower_feature_then_threshold() {
        // Both features separate perfectly; feature 0 wins.
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let data = Dataset::from_rows(&rows, &[0, 0, 1, 1]).unwrap();
        let s = best_split(&[0, 1, 2, 3], &data, &[1, 0]).unwrap();
        assert_eq!((s.feature, s.threshold), (0, 1.5));
        // Two equally good thresholds on one feature: the smaller wins.
        let data = one_d(&[0.0, 1.0, 2.0], &[0, 1, 0]);
        let s = best_split(&[0, 1, 2], &data, &[0]).unwrap();
        assert_eq!(s.threshold, 0.5);
    }

    #[test]
    fn xor_has_no_impurity_reducing_split() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let data = Dataset::from_rows(&rows, &[0, 0, 1, 1]).unwrap();
        assert_eq!(best_split(&[0, 1, 2, 3], &data, &[0, 1]), None);
    }

    #[test]
    fn adjacent_float_threshold_stays_below_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let data = one_d(&[a, b], &[0, 1]);
        let s = best_split(&[0, 1], &data, &[0]).unwrap();
        assert!(s.threshold >= a && s.threshold < b);
    }

    #[test]
    fn pure_input_gives_single_leaf() {
        let data = one_d(&[1.0, 5.0, 9.0], &[2, 2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = grow(&[0, 1, 2], &data, &TreeParams::default(), &mut rng).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict(&[-100.0]).unwrap(), 2);
    }

    #[test]
    fn boundary_routes_left() {
        let nodes = vec![
            TreeNode::Internal {
                feature: 0,
                threshold: 2.5,
                left: 1,
                right: 2,
            },
            TreeNode::Leaf {
                class: 0,
                counts: vec![1, 0],
            },
            TreeNode::Leaf {
                class: 1,
                counts: vec![0, 1],
            },
        ];
        let t = DecisionTree::from_nodes(nodes, 1, 2).unwrap();
        assert_eq!(t.predict(&[2.5]).unwrap(), 0);
        assert_eq!(t.predict(&[2.5000001]).unwrap(), 1);
        assert!(t.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn depth_limit_and_min_samples() {
        let xs: Vec<f64> = (0..16).map(f64::from).collect();
        let labels: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let data = one_d(&xs, &labels);
        let rows: Vec<usize> = (0..16).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = TreeParams {
            max_depth: Some(2),
            ..TreeParams::default()
        };
        assert!(grow(&rows, &data, &params, &mut rng).unwrap().depth() <= 2);
        let params = TreeParams {
            min_samples_split: 100,
            ..TreeParams::default()
        };
        assert_eq!(grow(&rows, &data, &params, &mut rng).unwrap().depth(), 0);
    }

    #[test]
    fn mtry_bounds() {
        let p = TreeParams {
            mtry: Some(5),
            ..TreeParams::default()
        };
        assert!(p.resolve_mtry(4).is_err());
        assert_eq!(TreeParams::default().resolve_mtry(10).unwrap(), 3);
        assert_eq!(TreeParams::default().resolve_mtry(1).unwrap(), 1);
    }
}
