use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Symmetric label compatibility `μ(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityMatrix {
    mu: Matrix,
}

impl CompatibilityMatrix {
    pub fn new(mu: Matrix) -> Result<Self> {
        let l = mu.rows();
        if mu.cols() != l {
            return Err(Error::mismatch(format!(
                "compatibility must be square, got {}x{}",
                mu.rows(),
                mu.cols()
            )));
        }
        if l == 0 {
            return Err(Error::Empty("compatibility matrix".into()));
        }
        if !mu.is_finite() {
            return Err(Error::NonFinite("compatibility entries".into()));
        }
        for a in 0..l {
            for b in a + 1..l {
                if mu[(a, b)] != mu[(b, a)] {
                    return Err(Error::InvalidParameter(format!(
                        "compatibility is not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(CompatibilityMatrix { mu })
    }

    /// `μ(a, b) = [a ≠ b]`
    pub fn potts(labels: usize) -> Self {
        let mut mu = Matrix::filled(labels, labels, 1.0);
        for a in 0..labels {
            mu[(a, a)] = 0.0;
        }
        CompatibilityMatrix { mu }
    }

    /// Build from the upper triangle (row-major, diagonal included).
    pub fn from_upper(labels: usize, params: &[f64]) -> Result<Self> {
        if params.len() != labels * (labels + 1) / 2 {
            return Err(Error::mismatch(format!(
                "{} parameters for {labels} labels",
                params.len()
            )));
        }
        let mut mu = Matrix::zeros(labels, labels);
        let mut it = params.iter();
        for a in 0..labels {
            for b in a..labels {
                let v = *it.next().unwrap();
                mu[(a, b)] = v;
                mu[(b, a)] = v;
            }
        }
        Self::new(mu)
    }

    pub fn upper(&self) -> Vec<f64> {
        let l = self.labels();
        let mut out = Vec::with_capacity(l * (l + 1) / 2);
        for a in 0..l {
            for b in a..l {
                out.push(self.mu[(a, b)]);
            }
        }
        out
    }

    /// `Some(c)` when `μ(a, b) = c · [a ≠ b]`.
    pub fn potts_scale(&self) -> Option<f64> {
        let l = self.labels();
        let c = if l > 1 { self.mu[(0, 1)] } else { 0.0 };
        for a in 0..l {
            for b in 0..l {
                let expect = if a == b { 0.0 } else { c };
                if self.mu[(a, b)] != expect {
                    return None;
                }
            }
        }
        Some(c)
    }

    pub fn labels(&self) -> usize {
        self.mu.rows()
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.mu[(a, b)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.mu
    }

    /// Relabel: entry `(a, b)` of the result is `μ(perm[a], perm[b])`.
    pub fn permuted(&self, perm: &[usize]) -> CompatibilityMatrix {
        CompatibilityMatrix {
            mu: self.mu.select_rows(perm).select_cols(perm),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potts_shape() {
        let p = CompatibilityMatrix::potts(3);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(p.get(a, b), if a == b { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn potts_scale_detection() {
        assert_eq!(CompatibilityMatrix::potts(4).potts_scale(), Some(1.0));
        let c = CompatibilityMatrix::from_upper(2, &[0.0, 2.5, 0.0]).unwrap();
        assert_eq!(c.potts_scale(), Some(2.5));
        let c = CompatibilityMatrix::from_upper(2, &[0.1, 2.5, 0.0]).unwrap();
        assert_eq!(c.potts_scale(), None);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap();
        assert!(CompatibilityMatrix::new(m).is_err());
    }

    #[test]
    fn upper_round_trip() {
        let c = CompatibilityMatrix::from_upper(3, &[0.0, 1.0, 2.0, 0.5, 3.0, 0.1]).unwrap();
        assert_eq!(c.get(2, 0), 2.0);
        assert_eq!(c.get(1, 2), 3.0);
        assert_eq!(c.upper(), vec![0.0, 1.0, 2.0, 0.5, 3.0, 0.1]);
    }
}
