use std::path::PathBuf;

use crate::crf::{CompatibilityMatrix, KernelParams, Normalization, DEFAULT_ITERATIONS};
use crate::error::{Error, Result};

use super::text::load_compatibility;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum CompatSource {
    #[default]
    Potts,
    File(PathBuf),
}

/// Settings for one inference run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: KernelParams,
    pub iterations: usize,
    pub compatibility: CompatSource,
    pub normalization: Normalization,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: KernelParams::default(),
            iterations: DEFAULT_ITERATIONS,
            compatibility: CompatSource::Potts,
            normalization: Normalization::Pixelwise,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()
    }

    /// Resolve the compatibility source for a model with `labels` labels.
    pub fn compatibility(&self, labels: usize) -> Result<CompatibilityMatrix> {
        let mu = match &self.compatibility {
            CompatSource::Potts => CompatibilityMatrix::potts(labels),
            CompatSource::File(path) => load_compatibility(path)?,
        };
        if mu.labels() != labels {
            return Err(Error::mismatch(format!(
                "compatibility covers {} labels, unary has {labels}",
                mu.labels()
            )));
        }
        Ok(mu)
    }
}
