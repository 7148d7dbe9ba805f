//! Gaussian filtering in feature space.
//!
//! [`PermutohedralLattice`] is the linear-time approximation used during
//! inference; [`ExactFilter`] evaluates the quadratic sum directly and
//! serves as the reference.

mod exact;
mod features;
mod permutohedral;

pub use exact::{brute_force_filter, ExactFilter, BRUTE_FORCE_CAP};
pub(crate) use exact::gaussian;

use crate::error::Error;
pub use features::{whiten_features, FeatureMatrix, KernelSpec};
pub use permutohedral::PermutohedralLattice;

use crate::error::Result;
use crate::matrix::Matrix;

/// Lower clamp on normalization denominators.
pub const NORM_FLOOR: f64 = 1e-20;

/// Reusable working memory for one filtering call at a time.
#[derive(Debug, Default, Clone)]
pub struct FilterScratch {
    pub(crate) front: Vec<f64>,
    pub(crate) back: Vec<f64>,
}

/// Gaussian filtering over a fixed point set.
pub trait GaussianFilter: Send + Sync {
    fn n_points(&self) -> usize;

    /// `out_i = Σ_j k(f_i, f_j) · values_j`, self term included. With
    /// `normalize`, row i is divided by [`normalizer`](Self::normalizer)`[i]`.
    /// `out` is resized to match `values`.
    fn filter_into(
        &self,
        values: &Matrix,
        normalize: bool,
        out: &mut Matrix,
        scratch: &mut FilterScratch,
    ) -> Result<()>;

    fn filter(&self, values: &Matrix, normalize: bool) -> Result<Matrix> {
        let mut out = Matrix::zeros(0, 0);
        self.filter_into(values, normalize, &mut out, &mut FilterScratch::default())?;
        Ok(out)
    }

    /// Per-point kernel mass `k̂_i = Σ_j k(f_i, f_j)`.
    fn normalizer(&self) -> &[f64];

    /// Contribution of each point to its own output, before normalization.
    fn self_weight(&self) -> &[f64];
}

/// Filtering backend attached to a CRF kernel.
#[derive(Debug, Clone)]
pub enum FilterBackend {
    Lattice(PermutohedralLattice),
    Exact(ExactFilter),
}

impl FilterBackend {
    fn inner(&self) -> &dyn GaussianFilter {
        match self {
            FilterBackend::Lattice(l) => l,
            FilterBackend::Exact(e) => e,
        }
    }
}

impl GaussianFilter for FilterBackend {
    fn n_points(&self) -> usize {
        self.inner().n_points()
    }

    fn filter_into(
        &self,
        values: &Matrix,
        normalize: bool,
        out: &mut Matrix,
        scratch: &mut FilterScratch,
    ) -> Result<()> {
        self.inner().filter_into(values, normalize, out, scratch)
    }

    fn normalizer(&self) -> &[f64] {
        self.inner().normalizer()
    }

    fn self_weight(&self) -> &[f64] {
        self.inner().self_weight()
    }
}

/// Shared input checks for filter implementations.
pub(crate) fn check_values(values: &Matrix, n_points: usize) -> Result<()> {
    if values.rows() != n_points {
        return Err(Error::mismatch(format!(
            "{} value rows for a filter over {n_points} points",
            values.rows()
        )));
    }
    if !values.is_finite() {
        return Err(Error::NonFinite("filter input values".into()));
    }
    Ok(())
}

pub(crate) fn normalize_rows(out: &mut Matrix, norm: &[f64]) {
    for (i, &k) in norm.iter().enumerate() {
        let inv = 1.0 / k.max(NORM_FLOOR);
        out.row_mut(i).iter_mut().for_each(|v| *v *= inv);
    }
}
