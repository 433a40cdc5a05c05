//! Late fusion of per-modality prediction matrices.

mod matrix;
mod model;
mod policy_net;
mod ridge;
mod static_policy;

pub use matrix::{align, import_scores, scores_from_records, Aligned, ImportedScores, PredictionMatrix, MATRIX_FORMAT_VERSION};
pub use model::{FusionModel, Policy};
pub use policy_net::{apply_policy_network, train_policy_network, PolicyNetwork, PolicyNetworkSpec};
pub use ridge::{apply_ridge, cholesky_solve, design_matrix, ridge_scores, solve_ridge, train_ridge, RidgeConfig, RidgeModel};
pub use static_policy::{fuse_max, fuse_mean};
