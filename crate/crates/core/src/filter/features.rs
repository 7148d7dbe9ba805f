use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// N points in a d-dimensional feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    points: Matrix,
}

impl FeatureMatrix {
    pub fn new(points: Matrix) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::Empty(format!(
                "feature matrix must be at least 1x1, got {}x{}",
                points.rows(),
                points.cols()
            )));
        }
        if !points.is_finite() {
            return Err(Error::NonFinite("feature coordinates".into()));
        }
        Ok(FeatureMatrix { points })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.points.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.points
    }

    /// Reorder points; row `i` of the result is point `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            points: self.points.select_rows(perm),
        }
    }
}

/// One Gaussian edge kernel with a diagonal precision matrix.
///
/// `inv_stddevs[j]` is the square root of the j-th diagonal entry of the
/// precision matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    inv_stddevs: Vec<f64>,
    weight: f64,
}

impl KernelSpec {
    pub fn new(inv_stddevs: Vec<f64>, weight: f64) -> Result<Self> {
        if inv_stddevs.is_empty() {
            return Err(Error::InvalidParameter("kernel has no dimensions".into()));
        }
        if let Some(s) = inv_stddevs.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "kernel bandwidth must be positive and finite, got inverse stddev {s}"
            )));
        }
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel weight must be non-negative, got {weight}"
            )));
        }
        Ok(KernelSpec {
            inv_stddevs,
            weight,
        })
    }

    pub fn from_stddevs(stddevs: &[f64], weight: f64) -> Result<Self> {
        if let Some(s) = stddevs.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "kernel standard deviation must be positive and finite, got {s}"
            )));
        }
        Self::new(stddevs.iter().map(|s| 1.0 / s).collect(), weight)
    }

    /// Unit-variance kernel over `dim` axes.
    pub fn unit(dim: usize, weight: f64) -> Result<Self> {
        Self::new(vec![1.0; dim], weight)
    }

    pub fn dim(&self) -> usize {
        self.inv_stddevs.len()
    }

    pub fn inv_stddevs(&self) -> &[f64] {
        &self.inv_stddevs
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel weight must be non-negative, got {weight}"
            )));
        }
        self.weight = weight;
        Ok(self)
    }
}

/// Map features into the space where `kernel` is a unit-variance Gaussian.
///
/// For a diagonal precision matrix the Cholesky factor is the diagonal of
/// inverse standard deviations, so this is a per-axis scale.
pub fn whiten_features(features: &FeatureMatrix, kernel: &KernelSpec) -> Result<FeatureMatrix> {
    if features.dim() != kernel.dim() {
        return Err(Error::mismatch(format!(
            "features have {} dimensions, kernel has {}",
            features.dim(),
            kernel.dim()
        )));
    }
    let mut points = features.points.clone();
    for i in 0..points.rows() {
        for (v, s) in points.row_mut(i).iter_mut().zip(&kernel.inv_stddevs) {
            *v *= s;
        }
    }
    FeatureMatrix::new(points)
}
