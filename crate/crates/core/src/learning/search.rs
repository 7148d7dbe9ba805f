use std::fmt::Write as _;

use crate::crf::{map_labeling, Backend, CompatibilityMatrix, DenseCrf, KernelParams};
use crate::error::{Error, Result};
use crate::eval::{accuracy_counts, LabelMap};
use crate::learning::fit::LabeledImage;
use crate::matrix::Matrix;

/// Candidate values for the appearance kernel's weight and bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    w1: Vec<f64>,
    theta_alpha: Vec<f64>,
    theta_beta: Vec<f64>,
}

impl GridSpec {
    /// Weights must be non-negative and bandwidths positive; no list may
    /// be empty.
    pub fn new(w1: Vec<f64>, theta_alpha: Vec<f64>, theta_beta: Vec<f64>) -> Result<Self> {
        for (name, list, allow_zero) in [
            ("w1", &w1, true),
            ("theta_alpha", &theta_alpha, false),
            ("theta_beta", &theta_beta, false),
        ] {
            if list.is_empty() {
                return Err(Error::Empty(format!("{name} grid")));
            }
            if let Some(v) = list
                .iter()
                .find(|&&v| !v.is_finite() || v < 0.0 || (v == 0.0 && !allow_zero))
            {
                return Err(Error::InvalidParameter(format!("{name} candidate {v}")));
            }
        }
        Ok(GridSpec {
            w1,
            theta_alpha,
            theta_beta,
        })
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn theta_alpha(&self) -> &[f64] {
        &self.theta_alpha
    }

    pub fn theta_beta(&self) -> &[f64] {
        &self.theta_beta
    }

    /// Triples `(w1, θα, θβ)` in grid order, the last list varying fastest.
    pub fn triples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.w1.iter().flat_map(move |&w| {
            self.theta_alpha
                .iter()
                .flat_map(move |&a| self.theta_beta.iter().map(move |&b| (w, a, b)))
        })
    }

    pub fn len(&self) -> usize {
        self.w1.len() * self.theta_alpha.len() * self.theta_beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Settings shared by grid search and the parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Supplies `w2` and `θγ`; its appearance parameters are overridden.
    pub base: KernelParams,
    pub compatibility: Option<CompatibilityMatrix>,
    pub iterations: usize,
    pub backend: Backend,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            base: KernelParams::default(),
            compatibility: None,
            iterations: crate::crf::DEFAULT_ITERATIONS,
            backend: Backend::Lattice,
        }
    }
}

/// Global accuracy pooled over every pixel of `set` under `params`.
pub fn pooled_accuracy(set: &[LabeledImage], params: &KernelParams, config: &SearchConfig) -> Result<f64> {
    let mut correct = 0;
    let mut total = 0;
    for item in set {
        let mut model = DenseCrf::for_image(&item.image, item.unary.clone(), params, config.backend)?;
        if let Some(mu) = &config.compatibility {
            model.set_compatibility(mu.clone())?;
        }
        let q = model.inference(config.iterations)?;
        let pred = LabelMap::from_labels(item.image.width(), item.image.height(), &map_labeling(&q))?;
        let (c, t) = accuracy_counts(&pred, &item.truth)?;
        correct += c;
        total += t;
    }
    if total == 0 {
        return Err(Error::Empty("validation set has no labeled pixels".into()));
    }
    Ok(100.0 * correct as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOutcome {
    /// `(w1, θα, θβ)` with the highest accuracy, earliest on ties.
    pub best: (f64, f64, f64),
    pub best_accuracy: f64,
    /// Every evaluated triple with its accuracy, in grid order.
    pub scores: Vec<((f64, f64, f64), f64)>,
}

impl GridSearchOutcome {
    pub fn to_table(&self) -> String {
        let mut s = String::from("w1,theta_alpha,theta_beta,global\n");
        for ((w, a, b), acc) in &self.scores {
            let _ = writeln!(s, "{w},{a},{b},{acc:.4}");
        }
        s
    }
}

/// Exhaustive search over `grid`, scoring MAP labelings by pooled global
/// accuracy on `set`.
pub fn grid_search_kernel_params(
    set: &[LabeledImage],
    grid: &GridSpec,
    config: &SearchConfig,
) -> Result<GridSearchOutcome> {
    if set.is_empty() {
        return Err(Error::Empty("validation set is empty".into()));
    }
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<((f64, f64, f64), f64)> = None;
    for (w1, theta_alpha, theta_beta) in grid.triples() {
        let params = KernelParams {
            w1,
            theta_alpha,
            theta_beta,
            ..config.base
        };
        let acc = pooled_accuracy(set, &params, config)?;
        scores.push(((w1, theta_alpha, theta_beta), acc));
        if best.map_or(true, |(_, b)| acc > b) {
            best = Some(((w1, theta_alpha, theta_beta), acc));
        }
    }
    let (best, best_accuracy) = best.ok_or_else(|| Error::Empty("grid".into()))?;
    Ok(GridSearchOutcome {
        best,
        best_accuracy,
        scores,
    })
}

/// Global accuracy over a `θα × θβ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSurface {
    pub theta_alpha: Vec<f64>,
    pub theta_beta: Vec<f64>,
    /// Row per `θα`, column per `θβ`.
    pub accuracy: Matrix,
}

impl SweepSurface {
    /// CSV with one row per `θα` and one column per `θβ`.
    pub fn to_table(&self) -> String {
        let mut s = String::from("theta_alpha");
        for b in &self.theta_beta {
            let _ = write!(s, ",{b}");
        }
        s.push('\n');
        for (a, row) in self.theta_alpha.iter().zip(self.accuracy.iter_rows()) {
            let _ = write!(s, "{a}");
            for v in row {
                let _ = write!(s, ",{v:.4}");
            }
            s.push('\n');
        }
        s
    }
}

/// Sweep the appearance bandwidths with `w1` fixed at `config.base.w1` and
/// the smoothness kernel switched off.
pub fn parameter_sweep(
    set: &[LabeledImage],
    theta_alpha: &[f64],
    theta_beta: &[f64],
    config: &SearchConfig,
) -> Result<SweepSurface> {
    if theta_alpha.is_empty() || theta_beta.is_empty() {
        return Err(Error::Empty("sweep axis".into()));
    }
    if set.is_empty() {
        return Err(Error::Empty("evaluation set is empty".into()));
    }
    let mut accuracy = Matrix::zeros(theta_alpha.len(), theta_beta.len());
    for (r, &a) in theta_alpha.iter().enumerate() {
        for (c, &b) in theta_beta.iter().enumerate() {
            let params = KernelParams {
                theta_alpha: a,
                theta_beta: b,
                w2: 0.0,
                ..config.base
            };
            accuracy[(r, c)] = pooled_accuracy(set, &params, config)?;
        }
    }
    Ok(SweepSurface {
        theta_alpha: theta_alpha.to_vec(),
        theta_beta: theta_beta.to_vec(),
        accuracy,
    })
}
