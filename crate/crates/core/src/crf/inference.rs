//! Mean-field updates with filtering-based message passing.

use crate::crf::model::DenseCrf;
use crate::crf::unary::UnaryField;
use crate::error::{Error, Result};
use crate::filter::{FilterScratch, GaussianFilter, NORM_FLOOR};
use crate::matrix::Matrix;

/// Buffers reused across mean-field iterations.
#[derive(Default)]
struct Workspace {
    scratch: FilterScratch,
    messages: Vec<Matrix>,
    weighted: Matrix,
    pairwise: Matrix,
}

/// Row-stochastic `N × L` matrix of marginals `Q_i(l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalField {
    q: Matrix,
}

impl MarginalField {
    /// Validates that every row is a distribution (entries in `[0, 1]`,
    /// row sums within 1e-9 of one).
    pub fn new(q: Matrix) -> Result<Self> {
        for (i, row) in q.iter_rows().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "marginal row {i} is not a distribution"
                )));
            }
        }
        Ok(MarginalField { q })
    }

    pub fn uniform(n: usize, labels: usize) -> Self {
        MarginalField {
            q: Matrix::filled(n, labels, 1.0 / labels as f64),
        }
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn into_matrix(self) -> Matrix {
        self.q
    }

    pub fn n_pixels(&self) -> usize {
        self.q.rows()
    }

    pub fn n_labels(&self) -> usize {
        self.q.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.q.row(i)
    }
}

/// Softmax of `logits` per row, max-subtracted.
fn softmax_rows(mut logits: Matrix) -> MarginalField {
    for i in 0..logits.rows() {
        let row = logits.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = 1.0 / sum;
        row.iter_mut().for_each(|v| *v *= inv);
    }
    MarginalField { q: logits }
}

/// `Q_i(l) ∝ exp(-ψ_u(l))`
pub fn init_marginals(unary: &UnaryField) -> MarginalField {
    let mut logits = unary.costs().clone();
    logits.scale(-1.0);
    softmax_rows(logits)
}

/// Per-pixel argmax, ties to the lowest label.
pub fn map_labeling(q: &MarginalField) -> Vec<usize> {
    q.q.iter_rows()
        .map(|row| {
            let mut best = 0;
            for (l, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = l;
                }
            }
            best
        })
        .collect()
}

impl DenseCrf {
    fn check_marginals(&self, q: &MarginalField) -> Result<()> {
        if q.n_pixels() != self.n_pixels() || q.n_labels() != self.n_labels() {
            return Err(Error::mismatch(format!(
                "marginals are {}x{}, model is {}x{}",
                q.n_pixels(),
                q.n_labels(),
                self.n_pixels(),
                self.n_labels()
            )));
        }
        Ok(())
    }

    /// Per-kernel messages `Q̃⁽ᵐ⁾_i(l) = Σ_{j≠i} k⁽ᵐ⁾(f_i, f_j) Q_j(l)`,
    /// divided by `k̂_i` under pixelwise normalization.
    ///
    /// The filter's own response of a point to itself is removed, so every
    /// pixel's marginal is excluded from its message.
    pub fn message_pass(&self, q: &MarginalField) -> Result<Vec<Matrix>> {
        let mut ws = Workspace::default();
        self.messages_into(q, &mut ws)?;
        Ok(ws.messages)
    }

    fn messages_into(&self, q: &MarginalField, ws: &mut Workspace) -> Result<()> {
        self.check_marginals(q)?;
        let normalize = self.normalization().is_on();
        ws.messages
            .resize_with(self.kernels().len(), || Matrix::zeros(0, 0));
        for (kernel, out) in self.kernels().iter().zip(ws.messages.iter_mut()) {
            let filter = kernel.filter();
            filter.filter_into(q.as_matrix(), normalize, out, &mut ws.scratch)?;
            if out.rows() == 1 {
                // a lone pixel has no neighbors
                out.as_mut_slice().fill(0.0);
                continue;
            }
            let own = filter.self_weight();
            let norm = filter.normalizer();
            for i in 0..out.rows() {
                let mut s = own[i];
                if normalize {
                    s /= norm[i].max(NORM_FLOOR);
                }
                for (m, &qi) in out.row_mut(i).iter_mut().zip(q.row(i)) {
                    *m -= s * qi;
                }
            }
        }
        Ok(())
    }

    /// `Q̂_i(x) = Σ_l μ(x, l) Σ_m w⁽ᵐ⁾ Q̃⁽ᵐ⁾_i(l)`
    pub fn compatibility_transform(&self, messages: &[Matrix]) -> Result<Matrix> {
        let mut weighted = Matrix::zeros(0, 0);
        let mut out = Matrix::zeros(0, 0);
        self.transform_into(messages, &mut weighted, &mut out)?;
        Ok(out)
    }

    fn transform_into(
        &self,
        messages: &[Matrix],
        weighted: &mut Matrix,
        out: &mut Matrix,
    ) -> Result<()> {
        let n = self.n_pixels();
        let l = self.n_labels();
        if messages.len() != self.kernels().len() {
            return Err(Error::mismatch(format!(
                "{} message matrices for {} kernels",
                messages.len(),
                self.kernels().len()
            )));
        }
        weighted.reset(n, l);
        for (msg, kernel) in messages.iter().zip(self.kernels()) {
            if msg.rows() != n || msg.cols() != l {
                return Err(Error::mismatch(format!(
                    "message is {}x{}, expected {n}x{l}",
                    msg.rows(),
                    msg.cols()
                )));
            }
            weighted.add_scaled(msg, kernel.weight());
        }
        out.reset(n, l);
        let rows = weighted.iter_rows().zip(out.as_mut_slice().chunks_exact_mut(l));
        if let Some(c) = self.compatibility().potts_scale() {
            // μ = c·[a ≠ b]: total minus own label
            for (src, dst) in rows {
                let total: f64 = src.iter().sum();
                for (d, v) in dst.iter_mut().zip(src) {
                    *d = c * (total - v);
                }
            }
        } else {
            let mu = self.compatibility().as_matrix();
            for (src, dst) in rows {
                for (x, d) in dst.iter_mut().enumerate() {
                    *d = mu.row(x).iter().zip(src).map(|(m, v)| m * v).sum();
                }
            }
        }
        Ok(())
    }

    /// One parallel update of every marginal from the previous `q`.
    pub fn mean_field_iteration(&self, q: &MarginalField) -> Result<MarginalField> {
        self.step(q.clone(), &mut Workspace::default())
    }

    fn step(&self, q: MarginalField, ws: &mut Workspace) -> Result<MarginalField> {
        self.messages_into(&q, ws)?;
        self.transform_into(&ws.messages, &mut ws.weighted, &mut ws.pairwise)?;
        // reuse q's buffer for the logits
        let mut logits = q.q;
        for ((v, c), p) in logits
            .as_mut_slice()
            .iter_mut()
            .zip(self.unary().costs().as_slice())
            .zip(ws.pairwise.as_slice())
        {
            *v = -c - p;
        }
        Ok(softmax_rows(logits))
    }

    /// `iterations` mean-field updates from the unary initialization.
    pub fn inference(&self, iterations: usize) -> Result<MarginalField> {
        let mut ws = Workspace::default();
        let mut q = init_marginals(self.unary());
        for _ in 0..iterations {
            q = self.step(q, &mut ws)?;
        }
        Ok(q)
    }

    /// Like [`inference`](Self::inference), also returning the KL estimate
    /// after each of iterations `0..=iterations`.
    pub fn inference_with_trace(&self, iterations: usize) -> Result<(MarginalField, Vec<f64>)> {
        let mut ws = Workspace::default();
        let mut q = init_marginals(self.unary());
        let mut trace = Vec::with_capacity(iterations + 1);
        trace.push(self.kl_divergence_estimate(&q)?);
        for _ in 0..iterations {
            q = self.step(q, &mut ws)?;
            trace.push(self.kl_divergence_estimate(&q)?);
        }
        Ok((q, trace))
    }
}
