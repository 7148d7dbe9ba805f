use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-pixel label costs `ψ_u(x_i = l)` on a `width × height` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryField {
    width: usize,
    height: usize,
    costs: Matrix,
}

impl UnaryField {
    pub fn new(width: usize, height: usize, costs: Matrix) -> Result<Self> {
        if width * height != costs.rows() {
            return Err(Error::mismatch(format!(
                "{} unary rows for a {width}x{height} grid",
                costs.rows()
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Empty("unary grid has no pixels".into()));
        }
        if costs.cols() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 labels, got {}",
                costs.cols()
            )));
        }
        if !costs.is_finite() {
            return Err(Error::NonFinite("unary costs".into()));
        }
        Ok(UnaryField {
            width,
            height,
            costs,
        })
    }

    /// Costs `-ln p` from per-pixel label probabilities.
    pub fn from_probabilities(width: usize, height: usize, probs: &Matrix) -> Result<Self> {
        let mut costs = probs.clone();
        costs
            .as_mut_slice()
            .iter_mut()
            .for_each(|p| *p = -p.max(1e-300).ln());
        Self::new(width, height, costs)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_pixels(&self) -> usize {
        self.costs.rows()
    }

    pub fn n_labels(&self) -> usize {
        self.costs.cols()
    }

    pub fn costs(&self) -> &Matrix {
        &self.costs
    }

    /// Lowest-cost label per pixel, ties to the lower index.
    pub fn argmin(&self) -> Vec<usize> {
        self.costs
            .iter_rows()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |best, (l, &c)| {
                        if c < best.1 {
                            (l, c)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }
}
