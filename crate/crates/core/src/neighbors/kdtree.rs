//! Exact KD-tree over unweighted points searched under per-feature weights.
//!
//! Nodes split on the dimension of largest weighted spread at the lower median;
//! left children hold coordinates `<= split`, right children `> split`.
//! Leaves keep up to [`LEAF_SIZE`] point indices.

use crate::metrics::MetricSpec;

use super::Candidates;

pub const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Internal {
        dim: usize,
        split: f64,
        left: usize,
        right: usize,
    },
    /// Range into `KdTree::order`.
    Leaf { start: usize, end: usize },
}

struct Search<'a> {
    points: &'a [f64],
    spec: &'a MetricSpec,
    weights: &'a [f64],
    query: &'a [f64],
    /// Per-dimension lower bounds on the query's offset from the current cell.
    offsets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdTree {
    nodes: Vec<Node>,
    order: Vec<usize>,
    d: usize,
}

impl KdTree {
    /// Builds over the row-major `points` matrix with `d` columns. Only the
    /// choice of split dimensions depends on `weights`.
    pub fn build(points: &[f64], d: usize, weights: &[f64]) -> Self {
        let n = points.len().checked_div(d).unwrap_or(0);
        let mut tree = KdTree {
            nodes: Vec::new(),
            order: (0..n).collect(),
            d,
        };
        if n > 0 {
            tree.build_node(points, weights, 0, n);
        }
        tree
    }

    fn build_node(&mut self, points: &[f64], weights: &[f64], start: usize, end: usize) -> usize {
        let d = self.d;
        let coord = |i: usize, j: usize| points[i * d + j];
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }

        let idx = &mut self.order[start..end];
        let mut best = (0, 0.0);
        for (j, w) in weights.iter().enumerate() {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(coord(i, j)), hi.max(coord(i, j)))
            });
            let spread = (hi - lo) * w;
            if spread > best.1 {
                best = (j, spread);
            }
        }
        let (dim, spread) = best;
        if spread <= 0.0 {
            // All points coincide once zero-weight dimensions are ignored.
            return id;
        }

        idx.sort_unstable_by(|&a, &b| coord(a, dim).total_cmp(&coord(b, dim)).then(a.cmp(&b)));
        let count = idx.len();
        let mut split = coord(idx[(count - 1) / 2], dim);
        let mut mid = idx.partition_point(|&i| coord(i, dim) <= split);
        if mid == count {
            // The lower median equals the maximum: split just below it.
            mid = idx.partition_point(|&i| coord(i, dim) < split);
            split = coord(idx[mid - 1], dim);
        }

        let left = self.build_node(points, weights, start, start + mid);
        let right = self.build_node(points, weights, start + mid, end);
        self.nodes[id] = Node::Internal {
            dim,
            split,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Exact k-nearest search under `spec` and `weights`; `points` must be
    /// the matrix the tree was built on.
    pub(crate) fn search(
        &self,
        points: &[f64],
        spec: &MetricSpec,
        weights: &[f64],
        query: &[f64],
        found: &mut Candidates,
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let mut search = Search {
            points,
            spec,
            weights,
            query,
            offsets: vec![0.0; self.d],
        };
        self.visit(0, &mut search, found);
    }

    fn visit(&self, node: usize, s: &mut Search, found: &mut Candidates) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let p = &s.points[i * self.d..(i + 1) * self.d];
                    found.offer(s.spec.weighted(p, s.query, s.weights), i);
                }
            }
            Node::Internal {
                dim,
                split,
                left,
                right,
            } => {
                let diff = s.query[dim] - split;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.visit(near, s, found);

                let old = s.offsets[dim];
                s.offsets[dim] = old.max(diff.abs());
                // Same arithmetic as real distances, so the bound never
                // rounds above the distance of any point in the far cell.
                let bound = s
                    .spec
                    .of_diffs(s.offsets.iter().zip(s.weights).map(|(o, w)| o * w));
                if found.admits(bound) {
                    self.visit(far, s, found);
                }
                s.offsets[dim] = old;
            }
        }
    }

    /// Checks that every index appears once and that every internal node
    /// separates its subtrees on its split value.
    pub fn validate(&self, points: &[f64]) -> bool {
        let mut seen = vec![false; self.order.len()];
        for &i in &self.order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return false;
            }
        }
        if self.nodes.is_empty() {
            return self.order.is_empty();
        }
        self.check_node(0, points)
    }

    fn check_node(&self, node: usize, points: &[f64]) -> bool {
        match self.nodes[node] {
            Node::Leaf { start, end } => start < end || self.order.is_empty(),
            Node::Internal {
                dim,
                split,
                left,
                right,
            } => {
                let ok_left = self
                    .members(left)
                    .iter()
                    .all(|&i| points[i * self.d + dim] <= split);
                let ok_right = self
                    .members(right)
                    .iter()
                    .all(|&i| points[i * self.d + dim] > split);
                ok_left && ok_right && self.check_node(left, points) && self.check_node(right, points)
            }
        }
    }

    fn members(&self, node: usize) -> Vec<usize> {
        match self.nodes[node] {
            Node::Leaf { start, end } => self.order[start..end].to_vec(),
            Node::Internal { left, right, .. } => {
                let mut v = self.members(left);
                v.extend(self.members(right));
                v
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn depth(t: &KdTree, node: usize) -> usize {
            match t.nodes[node] {
                Node::Leaf { .. } => 1,
                Node::Internal { left, right, .. } => 1 + depth(t, left).max(depth(t, right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            depth(self, 0)
        }
    }
}
