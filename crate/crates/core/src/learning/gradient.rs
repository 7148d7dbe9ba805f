use crate::crf::{DenseCrf, MarginalField};
use crate::error::{Error, Result};
use crate::eval::LabelMap;
use crate::filter::{FilterScratch, GaussianFilter, NORM_FLOOR};
use crate::matrix::Matrix;

/// Binary indicator `T_i(a)` of the ground-truth labeling. Void pixels
/// have all-zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    t: Matrix,
    void: Vec<bool>,
}

impl GroundTruth {
    pub fn new(labels: &[Option<usize>], n_labels: usize) -> Result<Self> {
        let mut t = Matrix::zeros(labels.len(), n_labels);
        let mut void = vec![false; labels.len()];
        for (i, label) in labels.iter().enumerate() {
            match *label {
                Some(l) if l < n_labels => t[(i, l)] = 1.0,
                Some(l) => {
                    return Err(Error::LabelOutOfRange {
                        label: l,
                        labels: n_labels,
                    })
                }
                None => void[i] = true,
            }
        }
        Ok(GroundTruth { t, void })
    }

    pub fn from_label_map(map: &LabelMap, n_labels: usize) -> Result<Self> {
        Self::new(map.labels(), n_labels)
    }

    pub fn indicator(&self) -> &Matrix {
        &self.t
    }

    pub fn void_mask(&self) -> &[bool] {
        &self.void
    }

    pub fn n_pixels(&self) -> usize {
        self.t.rows()
    }

    pub fn n_labels(&self) -> usize {
        self.t.cols()
    }

    /// `q` with void rows zeroed.
    pub(crate) fn mask(&self, q: &Matrix) -> Matrix {
        let mut out = q.clone();
        for (i, &v) in self.void.iter().enumerate() {
            if v {
                out.row_mut(i).fill(0.0);
            }
        }
        out
    }
}

/// Which marginal the second (model expectation) term pairs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpectationForm {
    /// `Σ_i Q_i(a) Σ_{j≠i} k_ij Q_j(b)`, the expectation under the factorized `Q`.
    #[default]
    Pairwise,
    /// `Σ_i Q_i(a) Σ_{j≠i} k_ij Q_i(b)`, with both marginals at pixel `i`.
    SamePixel,
}

/// `[K·V]_i = Σ_m w⁽ᵐ⁾ Σ_{j≠i} k⁽ᵐ⁾(f_i, f_j) V_j`. Under pixelwise
/// normalization each kernel row is divided by its mass `k̂_i`, matching the
/// messages seen during inference.
pub(crate) fn kernel_product(model: &DenseCrf, v: &Matrix, scratch: &mut FilterScratch) -> Result<Matrix> {
    let mut total = Matrix::zeros(v.rows(), v.cols());
    if v.rows() < 2 {
        return Ok(total);
    }
    let normalize = model.normalization().is_on();
    let mut filtered = Matrix::zeros(0, 0);
    for kernel in model.kernels() {
        let w = kernel.weight();
        if w == 0.0 {
            continue;
        }
        let filter = kernel.filter();
        filter.filter_into(v, normalize, &mut filtered, scratch)?;
        let norm = filter.normalizer();
        for (i, &s) in filter.self_weight().iter().enumerate() {
            let s = if normalize { s / norm[i].max(NORM_FLOOR) } else { s };
            for (f, &x) in filtered.row_mut(i).iter_mut().zip(v.row(i)) {
                *f -= s * x;
            }
        }
        total.add_scaled(&filtered, w);
    }
    Ok(total)
}

/// Exact row masses `Σ_j k(f_i, f_j)` of every kernel, or ones when the
/// model does not normalize.
fn exact_masses(model: &DenseCrf) -> Vec<Vec<f64>> {
    let n = model.n_pixels();
    model
        .kernels()
        .iter()
        .map(|kern| {
            (0..n)
                .map(|i| {
                    if model.normalization().is_on() {
                        (0..n).map(|j| kern.kernel(i, j)).sum()
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect()
}

/// `P(a, b) = Σ_i A_i(a) B_i(b)`
pub(crate) fn pair_mass(a: &Matrix, b: &Matrix) -> Matrix {
    let l = a.cols();
    let mut out = Matrix::zeros(l, b.cols());
    for (ra, rb) in a.iter_rows().zip(b.iter_rows()) {
        for (x, &pa) in ra.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (y, &pb) in rb.iter().enumerate() {
                out[(x, y)] += pa * pb;
            }
        }
    }
    out
}

pub(crate) fn symmetrize(g: &mut Matrix) {
    let l = g.rows();
    for a in 0..l {
        for b in a + 1..l {
            let m = 0.5 * (g[(a, b)] + g[(b, a)]);
            g[(a, b)] = m;
            g[(b, a)] = m;
        }
    }
}

fn check_shapes(model: &DenseCrf, truth: &GroundTruth, q: &MarginalField) -> Result<()> {
    let (n, l) = (model.n_pixels(), model.n_labels());
    if truth.n_pixels() != n || truth.n_labels() != l {
        return Err(Error::mismatch(format!(
            "ground truth is {}x{}, model is {n}x{l}",
            truth.n_pixels(),
            truth.n_labels()
        )));
    }
    if q.n_pixels() != n || q.n_labels() != l {
        return Err(Error::mismatch(format!(
            "marginals are {}x{}, model is {n}x{l}",
            q.n_pixels(),
            q.n_labels()
        )));
    }
    Ok(())
}

/// Approximate log-likelihood gradient with respect to `μ`:
/// `G(a, b) = −Σ_i T_i(a)[K·T(b)]_i + Σ_i Q_i(a)[K·Q(b)]_i`, symmetrized.
///
/// Kernel sums exclude `j = i` and follow the model's normalization; void
/// pixels take part in neither sum.
pub fn compatibility_gradient(model: &DenseCrf, truth: &GroundTruth, q: &MarginalField) -> Result<Matrix> {
    compatibility_gradient_with(model, truth, q, ExpectationForm::default())
}

pub fn compatibility_gradient_with(
    model: &DenseCrf,
    truth: &GroundTruth,
    q: &MarginalField,
    form: ExpectationForm,
) -> Result<Matrix> {
    check_shapes(model, truth, q)?;
    let mut scratch = FilterScratch::default();
    let qm = truth.mask(q.as_matrix());
    let t = truth.indicator();
    let kt = kernel_product(model, t, &mut scratch)?;
    let mut g = pair_mass(t, &kt);
    g.scale(-1.0);
    match form {
        ExpectationForm::Pairwise => {
            let kq = kernel_product(model, &qm, &mut scratch)?;
            g.add_scaled(&pair_mass(&qm, &kq), 1.0);
        }
        ExpectationForm::SamePixel => {
            let ones = Matrix::from_vec(
                qm.rows(),
                1,
                truth.void_mask().iter().map(|&v| if v { 0.0 } else { 1.0 }).collect(),
            )?;
            let k1 = kernel_product(model, &ones, &mut scratch)?;
            let mut weighted = qm.clone();
            for i in 0..weighted.rows() {
                let s = k1[(i, 0)];
                weighted.row_mut(i).iter_mut().for_each(|v| *v *= s);
            }
            g.add_scaled(&pair_mass(&qm, &weighted), 1.0);
        }
    }
    symmetrize(&mut g);
    Ok(g)
}

/// The same gradient from the explicit double sum over pixel pairs.
/// Quadratic; intended as a reference.
pub fn brute_force_gradient(
    model: &DenseCrf,
    truth: &GroundTruth,
    q: &MarginalField,
    form: ExpectationForm,
) -> Result<Matrix> {
    check_shapes(model, truth, q)?;
    let n = model.n_pixels();
    if n > crate::filter::BRUTE_FORCE_CAP {
        return Err(Error::CapExceeded {
            n,
            cap: crate::filter::BRUTE_FORCE_CAP,
        });
    }
    let l = model.n_labels();
    let qm = truth.mask(q.as_matrix());
    let t = truth.indicator();
    let masses = exact_masses(model);
    let mut g = Matrix::zeros(l, l);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let k: f64 = model
                .kernels()
                .iter()
                .zip(&masses)
                .map(|(kern, mass)| kern.weight() * kern.kernel(i, j) / mass[i].max(NORM_FLOOR))
                .sum();
            let partner = match form {
                ExpectationForm::Pairwise => qm.row(j),
                ExpectationForm::SamePixel if truth.void_mask()[j] => continue,
                ExpectationForm::SamePixel => qm.row(i),
            };
            for a in 0..l {
                for b in 0..l {
                    g[(a, b)] += k * (qm[(i, a)] * partner[b] - t[(i, a)] * t[(j, b)]);
                }
            }
        }
    }
    symmetrize(&mut g);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{init_marginals, Backend, EdgeKernel, Normalization, UnaryField};
    use crate::filter::FeatureMatrix;
    use crate::matrix::relative_l2;

    fn model(n: usize, backend: Backend) -> DenseCrf {
        let unary = UnaryField::new(
            n,
            1,
            Matrix::from_vec(n, 2, (0..2 * n).map(|k| (k % 3) as f64 * 0.4).collect()).unwrap(),
        )
        .unwrap();
        let feats =
            FeatureMatrix::from_rows(&(0..n).map(|i| vec![i as f64 * 0.5]).collect::<Vec<_>>()).unwrap();
        DenseCrf::new(unary)
            .with_kernel(EdgeKernel::unit(&feats, 2.0, backend).unwrap())
            .unwrap()
    }

    #[test]
    fn indicator_rows() {
        let gt = GroundTruth::new(&[Some(1), None, Some(0)], 2).unwrap();
        assert_eq!(gt.indicator().row(0), &[0.0, 1.0]);
        assert_eq!(gt.indicator().row(1), &[0.0, 0.0]);
        assert_eq!(gt.void_mask(), &[false, true, false]);
        assert!(GroundTruth::new(&[Some(2)], 2).is_err());
    }

    #[test]
    fn zero_when_q_equals_truth() {
        let m = model(6, Backend::Lattice);
        let labels: Vec<Option<usize>> = (0..6).map(|i| Some(i / 3)).collect();
        let gt = GroundTruth::new(&labels, 2).unwrap();
        let q = MarginalField::new(gt.indicator().clone()).unwrap();
        let g = compatibility_gradient(&m, &gt, &q).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_is_zero() {
        let m = model(1, Backend::Lattice);
        let gt = GroundTruth::new(&[Some(0)], 2).unwrap();
        let q = init_marginals(m.unary());
        let g = compatibility_gradient(&m, &gt, &q).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_backend_matches_double_sum() {
        let m = model(7, Backend::Exact);
        let labels = [Some(0), Some(0), None, Some(1), Some(1), Some(0), Some(1)];
        let gt = GroundTruth::new(&labels, 2).unwrap();
        let q = init_marginals(m.unary());
        for norm in [Normalization::Pixelwise, Normalization::None] {
            let m = m.clone().with_normalization(norm);
            for form in [ExpectationForm::Pairwise, ExpectationForm::SamePixel] {
                let fast = compatibility_gradient_with(&m, &gt, &q, form).unwrap();
                let slow = brute_force_gradient(&m, &gt, &q, form).unwrap();
                assert!(relative_l2(fast.as_slice(), slow.as_slice()) < 1e-12, "{norm:?} {form:?}");
                assert_eq!(fast, fast.transpose());
            }
        }
    }

    #[test]
    fn excess_joint_mass_gives_positive_entry() {
        // truth splits the two coincident pixels, Q keeps both on label 0
        let m = model(2, Backend::Exact);
        let gt = GroundTruth::new(&[Some(0), Some(1)], 2).unwrap();
        let q = MarginalField::new(Matrix::from_rows(&[vec![0.9, 0.1], vec![0.9, 0.1]]).unwrap()).unwrap();
        let g = compatibility_gradient(&m, &gt, &q).unwrap();
        assert!(g[(0, 0)] > 0.0);
        assert!(g[(0, 1)] < 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let m = model(3, Backend::Exact);
        let gt = GroundTruth::new(&[Some(0), Some(1)], 2).unwrap();
        let q = init_marginals(m.unary());
        assert!(compatibility_gradient(&m, &gt, &q).is_err());
    }
}
