//! Random filtering instances and the lattice-versus-exact benchmark.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filter::{brute_force_filter, FeatureMatrix, GaussianFilter, KernelSpec, PermutohedralLattice};
use crate::matrix::{column_relative_l2, Matrix};

/// Side length of the cube random points are drawn from, in kernel
/// standard deviations.
pub const RANDOM_EXTENT: f64 = 5.0;

/// `n` points uniform in `[0, RANDOM_EXTENT]^d` and `n × l` values uniform
/// in `[0, 1)`, reproducible from `seed`.
pub fn random_instance(n: usize, d: usize, l: usize, seed: u64) -> Result<(FeatureMatrix, Matrix)> {
    if n == 0 || d == 0 || l == 0 {
        return Err(Error::InvalidParameter("n, d and l must all be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<f64> = (0..n * d).map(|_| rng.gen_range(0.0..RANDOM_EXTENT)).collect();
    let values: Vec<f64> = (0..n * l).map(|_| rng.gen::<f64>()).collect();
    let features = FeatureMatrix::new(Matrix::from_vec(n, d, points)?)?;
    Ok((features, Matrix::from_vec(n, l, values)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub seed: u64,
    pub vertices: usize,
    pub build_ms: f64,
    pub filter_ms: f64,
    /// `None` when `n` exceeds the exact filter's cap.
    pub exact_ms: Option<f64>,
    /// Per-column relative L2 error of the normalized lattice output.
    pub column_errors: Option<Vec<f64>>,
}

impl BenchReport {
    pub fn lattice_ms(&self) -> f64 {
        self.build_ms + self.filter_ms
    }

    pub fn max_error(&self) -> Option<f64> {
        self.column_errors
            .as_ref()
            .map(|e| e.iter().copied().fold(0.0, f64::max))
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n={}\nd={}\nl={}\nseed={}", self.n, self.d, self.l, self.seed);
        let _ = writeln!(s, "vertices={}", self.vertices);
        let _ = writeln!(s, "build_ms={:.3}", self.build_ms);
        let _ = writeln!(s, "filter_ms={:.3}", self.filter_ms);
        let _ = writeln!(s, "lattice_ms={:.3}", self.lattice_ms());
        if let Some(ms) = self.exact_ms {
            let _ = writeln!(s, "exact_ms={ms:.3}");
        }
        if let Some(errors) = &self.column_errors {
            for (c, e) in errors.iter().enumerate() {
                let _ = writeln!(s, "oracle_error_{c}={e:.6}");
            }
            let _ = writeln!(s, "oracle_error={:.6}", self.max_error().unwrap_or(0.0));
        }
        s
    }
}

/// Time a normalized lattice filter on a random instance and compare it
/// with the exact filter when that is affordable.
pub fn bench_filter(n: usize, d: usize, l: usize, seed: u64) -> Result<BenchReport> {
    let (features, values) = random_instance(n, d, l, seed)?;
    let start = Instant::now();
    let lattice = PermutohedralLattice::build(&features);
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let start = Instant::now();
    let approx = lattice.filter(&values, true)?;
    let filter_ms = start.elapsed().as_secs_f64() * 1e3;

    let (exact_ms, column_errors) = if n <= crate::filter::BRUTE_FORCE_CAP {
        let start = Instant::now();
        let exact = brute_force_filter(&features, &KernelSpec::unit(d, 1.0)?, &values, true)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let errors = (0..l).map(|c| column_relative_l2(&approx, &exact, c)).collect();
        (Some(ms), Some(errors))
    } else {
        (None, None)
    };
    Ok(BenchReport {
        n,
        d,
        l,
        seed,
        vertices: lattice.n_vertices(),
        build_ms,
        filter_ms,
        exact_ms,
        column_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_reproducible() {
        let a = random_instance(20, 3, 2, 7).unwrap();
        let b = random_instance(20, 3, 2, 7).unwrap();
        let c = random_instance(20, 3, 2, 8).unwrap();
        assert_eq!(a.0.as_matrix(), b.0.as_matrix());
        assert_eq!(a.1, b.1);
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn report_keys() {
        let r = bench_filter(200, 2, 2, 1).unwrap();
        let text = r.to_key_value();
        assert!(text.contains("n=200\n"));
        assert!(text.contains("oracle_error="));
        assert!(r.max_error().unwrap() < 0.05);
    }

    #[test]
    fn rejects_zero_sizes() {
        assert!(random_instance(0, 2, 2, 0).is_err());
    }
}
