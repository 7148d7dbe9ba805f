use crate::crf::{Backend, CompatibilityMatrix, DenseCrf, KernelParams, MarginalField, UnaryField};
use crate::error::{Error, Result};
use crate::eval::LabelMap;
use crate::filter::FilterScratch;
use crate::image::RgbImage;
use crate::learning::gradient::{
    compatibility_gradient_with, kernel_product, pair_mass, ExpectationForm, GroundTruth,
};
use crate::learning::lbfgs::{minimize, LbfgsConfig, StopReason};
use crate::matrix::Matrix;

/// An image with its unary costs and ground-truth labeling.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub image: RgbImage,
    pub unary: UnaryField,
    pub truth: LabelMap,
}

impl LabeledImage {
    pub fn new(image: RgbImage, unary: UnaryField, truth: LabelMap) -> Result<Self> {
        let dims = (image.width(), image.height());
        if (unary.width(), unary.height()) != dims || (truth.width(), truth.height()) != dims {
            return Err(Error::mismatch(format!(
                "image {}x{}, unary {}x{}, ground truth {}x{}",
                dims.0,
                dims.1,
                unary.width(),
                unary.height(),
                truth.width(),
                truth.height()
            )));
        }
        Ok(LabeledImage { image, unary, truth })
    }
}

/// A model paired with the labeling it should reproduce.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub model: DenseCrf,
    pub truth: GroundTruth,
}

impl TrainingExample {
    pub fn new(model: DenseCrf, truth: GroundTruth) -> Result<Self> {
        if truth.n_pixels() != model.n_pixels() || truth.n_labels() != model.n_labels() {
            return Err(Error::mismatch(format!(
                "ground truth is {}x{}, model is {}x{}",
                truth.n_pixels(),
                truth.n_labels(),
                model.n_pixels(),
                model.n_labels()
            )));
        }
        Ok(TrainingExample { model, truth })
    }

    pub fn from_labeled(item: &LabeledImage, params: &KernelParams, backend: Backend) -> Result<Self> {
        let model = DenseCrf::for_image(&item.image, item.unary.clone(), params, backend)?;
        let truth = GroundTruth::from_label_map(&item.truth, model.n_labels())?;
        Self::new(model, truth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub optimizer: LbfgsConfig,
    /// Mean-field iterations per objective evaluation.
    pub inference_iterations: usize,
    pub form: ExpectationForm,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            optimizer: LbfgsConfig::default(),
            inference_iterations: crate::crf::DEFAULT_ITERATIONS,
            form: ExpectationForm::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub compatibility: CompatibilityMatrix,
    /// Surrogate objective (lower is better) after each accepted step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
}

/// Negated approximate log-likelihood of the ground truth under `model`,
/// with `q` the model's mean-field marginals:
/// `½ Σ μ∘(P_T − P_Q) − Σ_i Σ_l Q_i(l)(ln Q_i(l) + ψ_u(l))`,
/// where `P_V(a, b) = Σ_i V_i(a)[K·V(b)]_i`. Void pixels are left out.
///
/// Its gradient in `μ` is the negated [`compatibility_gradient`](super::compatibility_gradient)
/// when `q` is held fixed.
pub fn surrogate_objective(model: &DenseCrf, truth: &GroundTruth, q: &MarginalField) -> Result<f64> {
    let mut scratch = FilterScratch::default();
    let t = truth.indicator();
    let qm = truth.mask(q.as_matrix());
    let pt = pair_mass(t, &kernel_product(model, t, &mut scratch)?);
    let pq = pair_mass(&qm, &kernel_product(model, &qm, &mut scratch)?);
    let mu = model.compatibility().as_matrix();
    let mut value = 0.0;
    for ((m, a), b) in mu.as_slice().iter().zip(pt.as_slice()).zip(pq.as_slice()) {
        value += 0.5 * m * (a - b);
    }
    let costs = model.unary().costs();
    for (i, &void) in truth.void_mask().iter().enumerate() {
        if void {
            continue;
        }
        for (l, &p) in q.row(i).iter().enumerate() {
            if p > 0.0 {
                value -= p * p.ln();
            }
            value -= p * costs[(i, l)];
        }
    }
    Ok(value)
}

/// Mean surrogate objective and its gradient over the free parameters
/// (upper triangle of `μ`, diagonal included).
fn evaluate(set: &mut [TrainingExample], params: &[f64], config: &FitConfig) -> Result<(f64, Vec<f64>)> {
    let labels = set[0].model.n_labels();
    let mu = CompatibilityMatrix::from_upper(labels, params)?;
    let mut value = 0.0;
    let mut grad = Matrix::zeros(labels, labels);
    for example in set.iter_mut() {
        example.model.set_compatibility(mu.clone())?;
        let q = example.model.inference(config.inference_iterations)?;
        value += surrogate_objective(&example.model, &example.truth, &q)?;
        grad.add_scaled(
            &compatibility_gradient_with(&example.model, &example.truth, &q, config.form)?,
            1.0,
        );
    }
    let scale = 1.0 / set.len() as f64;
    let mut flat = Vec::with_capacity(params.len());
    for a in 0..labels {
        for b in a..labels {
            let g = -grad[(a, b)] * scale;
            flat.push(if a == b { 0.5 * g } else { g });
        }
    }
    Ok((value * scale, flat))
}

/// Learn a symmetric compatibility matrix by L-BFGS on the surrogate
/// objective, re-running inference at every evaluation.
///
/// The examples' compatibility is left at the returned value.
pub fn fit_compatibility(
    set: &mut [TrainingExample],
    initial: &CompatibilityMatrix,
    config: &FitConfig,
) -> Result<FitOutcome> {
    let Some(first) = set.first() else {
        return Err(Error::Empty("training set is empty".into()));
    };
    let labels = first.model.n_labels();
    if let Some(bad) = set.iter().find(|e| e.model.n_labels() != labels) {
        return Err(Error::mismatch(format!(
            "training models disagree on label count ({labels} vs {})",
            bad.model.n_labels()
        )));
    }
    if initial.labels() != labels {
        return Err(Error::mismatch(format!(
            "initial compatibility over {} labels, models have {labels}",
            initial.labels()
        )));
    }
    let result = minimize(|p| evaluate(set, p, config), initial.upper(), &config.optimizer)?;
    let compatibility = CompatibilityMatrix::from_upper(labels, &result.x)?;
    for example in set.iter_mut() {
        example.model.set_compatibility(compatibility.clone())?;
    }
    Ok(FitOutcome {
        compatibility,
        objective: result.trace,
        iterations: result.iterations,
        stop: result.stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::EdgeKernel;
    use crate::filter::FeatureMatrix;

    fn strip(unary_rows: &[[f64; 2]], truth: &[usize]) -> TrainingExample {
        let n = truth.len();
        let costs = Matrix::from_rows(unary_rows).unwrap();
        let unary = UnaryField::new(n, 1, costs).unwrap();
        let feats =
            FeatureMatrix::from_rows(&(0..n).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let model = DenseCrf::new(unary)
            .with_kernel(EdgeKernel::unit(&feats, 1.0, Backend::Exact).unwrap())
            .unwrap();
        let labels: Vec<Option<usize>> = truth.iter().map(|&l| Some(l)).collect();
        TrainingExample::new(model, GroundTruth::new(&labels, 2).unwrap()).unwrap()
    }

    #[test]
    fn empty_set_is_an_error() {
        let r = fit_compatibility(&mut [], &CompatibilityMatrix::potts(2), &FitConfig::default());
        assert!(matches!(r, Err(Error::Empty(_))));
    }

    #[test]
    fn zero_iterations_returns_initial() {
        let mut set = vec![strip(&[[0.0, 1.0], [0.5, 0.2], [1.0, 0.0]], &[0, 0, 1])];
        let config = FitConfig {
            optimizer: LbfgsConfig {
                max_iterations: 0,
                ..LbfgsConfig::default()
            },
            ..FitConfig::default()
        };
        let initial = CompatibilityMatrix::potts(2);
        let out = fit_compatibility(&mut set, &initial, &config).unwrap();
        assert_eq!(out.compatibility, initial);
    }

    #[test]
    fn stationary_when_marginals_match_truth() {
        // costs far apart enough that every marginal is exactly one-hot
        let mut set = vec![strip(&[[0.0, 1000.0], [0.0, 1000.0], [1000.0, 0.0]], &[0, 0, 1])];
        let initial = CompatibilityMatrix::potts(2);
        let out = fit_compatibility(&mut set, &initial, &FitConfig::default()).unwrap();
        assert_eq!(out.compatibility, initial);
        assert_eq!(out.stop, StopReason::GradientTolerance);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let mut set = vec![strip(&[[0.0, 0.6], [0.3, 0.2], [0.9, 0.1], [0.4, 0.4]], &[0, 0, 1, 1])];
        let config = FitConfig {
            inference_iterations: 0,
            ..FitConfig::default()
        };
        // with no inference iterations q does not depend on μ
        let x = vec![0.3, 1.2, -0.1];
        let (_, g) = evaluate(&mut set, &x, &config).unwrap();
        for k in 0..x.len() {
            let h = 1e-6;
            let mut up = x.clone();
            up[k] += h;
            let mut down = x.clone();
            down[k] -= h;
            let fd = (evaluate(&mut set, &up, &config).unwrap().0
                - evaluate(&mut set, &down, &config).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "param {k}: {fd} vs {}", g[k]);
        }
    }
}
