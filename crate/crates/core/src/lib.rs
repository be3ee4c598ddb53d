//! Feature-importance weighted K-nearest neighbors.
//!
//! The pipeline Z-scores the training features, trains a random forest on
//! them, measures each feature's out-of-bag permutation importance, and
//! multiplies every scaled column by its importance before running KNN.
//! The building blocks (CSV ingestion, scalers, weighted metrics, KNN with
//! an exact KD-tree, CART trees and forests) are usable on their own.

pub mod dataset;
pub mod error;
pub mod fids;
pub mod forest;
pub mod metrics;
pub mod neighbors;
pub mod preprocess;
pub mod tree;

pub use dataset::{
    encode, impute_mean, parse_csv, split, split_indices, subsample, ColumnKind, ColumnSchema,
    Dataset, RawTable, SplitIndices, Targets,
};
pub use error::{FidsError, Result};
pub use fids::{baseline_predict, fit_fids, FidsConfig, FidsModel, MetricChoice, ModelRecord};
pub use forest::{train_forest, ForestModel, ForestParams, ImportanceVector, OobEstimate};
pub use metrics::{distance, fit_mahalanobis, MetricFamily, MetricSpec, WeightVector};
pub use neighbors::{accuracy, fit_knn, KdTree, KnnModel, NeighborSet};
pub use preprocess::{fit_scaler, transform, ScalerKind, ScalerParams};
pub use tree::{best_split, gini, grow, DecisionTree, TreeParams, TreeNode};
