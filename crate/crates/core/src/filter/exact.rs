use crate::error::{Error, Result};
use crate::filter::features::{whiten_features, FeatureMatrix, KernelSpec};
use crate::filter::{check_values, normalize_rows, FilterScratch, GaussianFilter};
use crate::matrix::Matrix;

/// Default point cap for quadratic-time evaluation.
pub const BRUTE_FORCE_CAP: usize = 10_000;

/// Exact O(N²) Gaussian filtering over whitened points.
#[derive(Debug, Clone)]
pub struct ExactFilter {
    whitened: FeatureMatrix,
    norm: Vec<f64>,
    self_weight: Vec<f64>,
}

impl ExactFilter {
    pub fn new(whitened: FeatureMatrix) -> Result<Self> {
        Self::with_cap(whitened, BRUTE_FORCE_CAP)
    }

    pub fn with_cap(whitened: FeatureMatrix, cap: usize) -> Result<Self> {
        let n = whitened.n_points();
        if n > cap {
            return Err(Error::CapExceeded { n, cap });
        }
        let mut filter = ExactFilter {
            whitened,
            norm: Vec::new(),
            self_weight: vec![1.0; n],
        };
        filter.norm = filter.apply(&Matrix::filled(n, 1, 1.0)).into_vec();
        Ok(filter)
    }

    /// `exp(-½‖f_i − f_j‖²)` in whitened coordinates.
    #[inline]
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        gaussian(self.whitened.point(i), self.whitened.point(j))
    }

    fn apply(&self, values: &Matrix) -> Matrix {
        let n = self.whitened.n_points();
        let l = values.cols();
        // k(f_i, f_i) = 1
        let mut out = values.clone();
        for i in 0..n {
            for j in i + 1..n {
                let k = self.kernel(i, j);
                for c in 0..l {
                    out[(i, c)] += k * values[(j, c)];
                    out[(j, c)] += k * values[(i, c)];
                }
            }
        }
        out
    }
}

#[inline]
pub(crate) fn gaussian(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-0.5 * d2).exp()
}

impl GaussianFilter for ExactFilter {
    fn n_points(&self) -> usize {
        self.whitened.n_points()
    }

    fn filter_into(
        &self,
        values: &Matrix,
        normalize: bool,
        out: &mut Matrix,
        _scratch: &mut FilterScratch,
    ) -> Result<()> {
        check_values(values, self.n_points())?;
        *out = self.apply(values);
        if normalize {
            normalize_rows(out, &self.norm);
        }
        Ok(())
    }

    fn normalizer(&self) -> &[f64] {
        &self.norm
    }

    fn self_weight(&self) -> &[f64] {
        &self.self_weight
    }
}

/// Exact `Σ_j k(f_i, f_j) · values_j` including `j = i`, optionally divided
/// by the exact per-point kernel mass.
pub fn brute_force_filter(
    features: &FeatureMatrix,
    kernel: &KernelSpec,
    values: &Matrix,
    normalize: bool,
) -> Result<Matrix> {
    let whitened = whiten_features(features, kernel)?;
    if values.rows() != whitened.n_points() {
        return Err(Error::mismatch(format!(
            "{} value rows for {} points",
            values.rows(),
            whitened.n_points()
        )));
    }
    ExactFilter::new(whitened)?.filter(values, normalize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_at_root_two() {
        let f = FeatureMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let k = KernelSpec::unit(2, 1.0).unwrap();
        let v = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let out = brute_force_filter(&f, &k, &v, false).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(out.row(0), &[1.0, e]);
        assert_eq!(out.row(1), &[e, 1.0]);
    }

    #[test]
    fn identical_points_give_column_sums() {
        let f = FeatureMatrix::from_rows(&[[3.0], [3.0], [3.0]]).unwrap();
        let k = KernelSpec::unit(1, 1.0).unwrap();
        let v = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let out = brute_force_filter(&f, &k, &v, false).unwrap();
        for i in 0..3 {
            assert_eq!(out.row(i), &[9.0, 12.0]);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let rows: Vec<[f64; 1]> = (0..11).map(|i| [i as f64]).collect();
        let f = FeatureMatrix::from_rows(&rows).unwrap();
        assert!(matches!(
            ExactFilter::with_cap(f, 10),
            Err(Error::CapExceeded { n: 11, cap: 10 })
        ));
    }

    #[test]
    fn shape_mismatch() {
        let f = FeatureMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let k = KernelSpec::unit(1, 1.0).unwrap();
        let v = Matrix::zeros(3, 1);
        assert!(brute_force_filter(&f, &k, &v, false).is_err());
    }
}
