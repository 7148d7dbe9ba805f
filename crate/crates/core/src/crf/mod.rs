//! The fully connected pairwise CRF and its mean-field inference.

mod compat;
mod energy;
mod features;
mod inference;
mod model;
mod unary;

pub use compat::CompatibilityMatrix;
pub use features::{build_appearance_features, build_smoothness_features};
pub use inference::{init_marginals, map_labeling, MarginalField};
pub use model::{Backend, DenseCrf, EdgeKernel, KernelParams, Normalization};
pub use unary::UnaryField;

/// Mean-field iterations used unless configured otherwise.
pub const DEFAULT_ITERATIONS: usize = 10;
