//! Mean-field inference in fully connected CRFs with Gaussian edge
//! potentials.
//!
//! Messages between all pairs of pixels are computed by Gaussian filtering
//! in feature space on a permutohedral lattice, so one mean-field update is
//! linear in the number of pixels.

pub mod bench;
pub mod crf;
pub mod error;
pub mod eval;
pub mod filter;
pub mod image;
pub mod io;
pub mod learning;
pub mod matrix;

pub use crf::{
    init_marginals, map_labeling, Backend, CompatibilityMatrix, DenseCrf, EdgeKernel,
    KernelParams, MarginalField, Normalization, UnaryField,
};
pub use error::{Error, Result};
pub use image::RgbImage;
pub use matrix::Matrix;
