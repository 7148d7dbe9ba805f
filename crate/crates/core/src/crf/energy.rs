use crate::crf::inference::MarginalField;
use crate::crf::model::DenseCrf;
use crate::error::{Error, Result};
use crate::filter::BRUTE_FORCE_CAP;

impl DenseCrf {
    /// Exact Gibbs energy `Σ_i ψ_u(x_i) + Σ_{i<j} μ(x_i, x_j) k(f_i, f_j)`
    /// with unnormalized kernels. Quadratic in the pixel count, capped at
    /// [`BRUTE_FORCE_CAP`] pixels.
    pub fn gibbs_energy(&self, labeling: &[usize]) -> Result<f64> {
        let n = self.n_pixels();
        let l = self.n_labels();
        if labeling.len() != n {
            return Err(Error::mismatch(format!(
                "labeling has {} entries for {n} pixels",
                labeling.len()
            )));
        }
        if n > BRUTE_FORCE_CAP {
            return Err(Error::CapExceeded {
                n,
                cap: BRUTE_FORCE_CAP,
            });
        }
        if let Some(&label) = labeling.iter().find(|&&x| x >= l) {
            return Err(Error::LabelOutOfRange { label, labels: l });
        }
        let costs = self.unary().costs();
        let mut energy: f64 = labeling
            .iter()
            .enumerate()
            .map(|(i, &x)| costs[(i, x)])
            .sum();
        let mu = self.compatibility();
        for i in 0..n {
            for j in i + 1..n {
                let m = mu.get(labeling[i], labeling[j]);
                if m == 0.0 {
                    continue;
                }
                let k: f64 = self
                    .kernels()
                    .iter()
                    .map(|kern| kern.weight() * kern.kernel(i, j))
                    .sum();
                energy += m * k;
            }
        }
        Ok(energy)
    }

    /// `D(Q‖P) + log Z`: negative entropy of `q` plus its expected energy.
    ///
    /// The pairwise expectation reuses the filtered messages, halved to
    /// count each unordered pair once.
    pub fn kl_divergence_estimate(&self, q: &MarginalField) -> Result<f64> {
        let messages = self.message_pass(q)?;
        let pairwise = self.compatibility_transform(&messages)?;
        let costs = self.unary().costs();
        let mut total = 0.0;
        for i in 0..q.n_pixels() {
            for (l, &p) in q.row(i).iter().enumerate() {
                if p > 0.0 {
                    total += p * p.ln();
                }
                total += p * (costs[(i, l)] + 0.5 * pairwise[(i, l)]);
            }
        }
        Ok(total)
    }
}
