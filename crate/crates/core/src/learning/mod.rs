//! Parameter estimation: kernel grid search and compatibility learning.

mod fit;
mod gradient;
pub mod lbfgs;
mod search;

pub use fit::{fit_compatibility, surrogate_objective, FitConfig, FitOutcome, LabeledImage, TrainingExample};
pub use gradient::{
    brute_force_gradient, compatibility_gradient, compatibility_gradient_with, ExpectationForm,
    GroundTruth,
};
pub use search::{
    grid_search_kernel_params, parameter_sweep, pooled_accuracy, GridSearchOutcome, GridSpec,
    SearchConfig, SweepSurface,
};
