use crate::crf::compat::CompatibilityMatrix;
use crate::crf::features::{build_appearance_features, build_smoothness_features};
use crate::crf::unary::UnaryField;
use crate::error::{Error, Result};
use crate::filter::{
    whiten_features, ExactFilter, FeatureMatrix, FilterBackend, KernelSpec, PermutohedralLattice,
};
use crate::image::RgbImage;

/// How filtered messages are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Divide by the per-pixel kernel mass `k̂_i`.
    #[default]
    Pixelwise,
    /// Raw kernel-weighted sums.
    None,
}

impl Normalization {
    pub fn is_on(self) -> bool {
        self == Normalization::Pixelwise
    }
}

/// Which filter evaluates a kernel's messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Lattice,
    /// Quadratic-time exact sums, for small models and reference checks.
    Exact,
}

/// One Gaussian edge kernel `w · k(f_i, f_j)` bound to its features.
#[derive(Debug, Clone)]
pub struct EdgeKernel {
    spec: KernelSpec,
    whitened: FeatureMatrix,
    filter: FilterBackend,
}

impl EdgeKernel {
    pub fn new(features: &FeatureMatrix, spec: KernelSpec, backend: Backend) -> Result<Self> {
        let whitened = whiten_features(features, &spec)?;
        let filter = match backend {
            Backend::Lattice => FilterBackend::Lattice(PermutohedralLattice::build(&whitened)),
            Backend::Exact => FilterBackend::Exact(ExactFilter::new(whitened.clone())?),
        };
        Ok(EdgeKernel {
            spec,
            whitened,
            filter,
        })
    }

    /// Kernel over features already in unit-variance coordinates.
    pub fn unit(features: &FeatureMatrix, weight: f64, backend: Backend) -> Result<Self> {
        Self::new(features, KernelSpec::unit(features.dim(), weight)?, backend)
    }

    pub fn weight(&self) -> f64 {
        self.spec.weight()
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn whitened(&self) -> &FeatureMatrix {
        &self.whitened
    }

    pub fn filter(&self) -> &FilterBackend {
        &self.filter
    }

    pub fn n_points(&self) -> usize {
        self.whitened.n_points()
    }

    /// Unweighted `k(f_i, f_j)`.
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        crate::filter::gaussian(self.whitened.point(i), self.whitened.point(j))
    }
}

/// Parameters of the appearance and smoothness kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub w1: f64,
    pub theta_alpha: f64,
    pub theta_beta: f64,
    pub w2: f64,
    pub theta_gamma: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            w1: 10.0,
            theta_alpha: 61.0,
            theta_beta: 11.0,
            w2: 1.0,
            theta_gamma: 1.0,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w1", self.w1), ("w2", self.w2)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative, got {w}"
                )));
            }
        }
        for (name, t) in [
            ("theta_alpha", self.theta_alpha),
            ("theta_beta", self.theta_beta),
            ("theta_gamma", self.theta_gamma),
        ] {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// A fully connected pairwise CRF over the pixels of one image.
#[derive(Debug, Clone)]
pub struct DenseCrf {
    unary: UnaryField,
    kernels: Vec<EdgeKernel>,
    compatibility: CompatibilityMatrix,
    normalization: Normalization,
}

impl DenseCrf {
    /// Model with no pairwise kernels and Potts compatibility.
    pub fn new(unary: UnaryField) -> Self {
        let compatibility = CompatibilityMatrix::potts(unary.n_labels());
        DenseCrf {
            unary,
            kernels: Vec::new(),
            compatibility,
            normalization: Normalization::default(),
        }
    }

    /// Appearance plus smoothness kernels for `image`.
    pub fn for_image(
        image: &RgbImage,
        unary: UnaryField,
        params: &KernelParams,
        backend: Backend,
    ) -> Result<Self> {
        params.validate()?;
        if image.width() != unary.width() || image.height() != unary.height() {
            return Err(Error::mismatch(format!(
                "image is {}x{} but unary is {}x{}",
                image.width(),
                image.height(),
                unary.width(),
                unary.height()
            )));
        }
        let appearance = build_appearance_features(image, params.theta_alpha, params.theta_beta)?;
        let smoothness =
            build_smoothness_features(image.width(), image.height(), params.theta_gamma)?;
        let mut model = DenseCrf::new(unary);
        model.add_kernel(EdgeKernel::unit(&appearance, params.w1, backend)?)?;
        model.add_kernel(EdgeKernel::unit(&smoothness, params.w2, backend)?)?;
        Ok(model)
    }

    pub fn add_kernel(&mut self, kernel: EdgeKernel) -> Result<()> {
        if kernel.n_points() != self.n_pixels() {
            return Err(Error::mismatch(format!(
                "kernel over {} points for a model with {} pixels",
                kernel.n_points(),
                self.n_pixels()
            )));
        }
        self.kernels.push(kernel);
        Ok(())
    }

    pub fn with_kernel(mut self, kernel: EdgeKernel) -> Result<Self> {
        self.add_kernel(kernel)?;
        Ok(self)
    }

    pub fn set_compatibility(&mut self, compatibility: CompatibilityMatrix) -> Result<()> {
        if compatibility.labels() != self.n_labels() {
            return Err(Error::mismatch(format!(
                "compatibility over {} labels for a model with {}",
                compatibility.labels(),
                self.n_labels()
            )));
        }
        self.compatibility = compatibility;
        Ok(())
    }

    pub fn with_compatibility(mut self, compatibility: CompatibilityMatrix) -> Result<Self> {
        self.set_compatibility(compatibility)?;
        Ok(self)
    }

    pub fn set_normalization(&mut self, normalization: Normalization) {
        self.normalization = normalization;
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn unary(&self) -> &UnaryField {
        &self.unary
    }

    pub fn kernels(&self) -> &[EdgeKernel] {
        &self.kernels
    }

    pub fn compatibility(&self) -> &CompatibilityMatrix {
        &self.compatibility
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn n_pixels(&self) -> usize {
        self.unary.n_pixels()
    }

    pub fn n_labels(&self) -> usize {
        self.unary.n_labels()
    }
}
