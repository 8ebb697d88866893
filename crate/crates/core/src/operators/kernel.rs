use crate::error::{Error, Result};

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A 2-D convolution kernel with odd side lengths so that it has a well-defined center tap.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    normalized: bool,
}

impl ConvKernel {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows % 2 == 0 || cols % 2 == 0 {
            return Err(Error::invalid(format!(
                "kernel sides must be odd, got {rows}x{cols}"
            )));
        }
        if weights.len() != rows * cols {
            return Err(Error::shape(rows * cols, weights.len()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("kernel weights"));
        }
        let sum: f64 = weights.iter().sum();
        Ok(Self {
            rows,
            cols,
            weights,
            normalized: (sum - 1.0).abs() <= NORMALIZATION_TOLERANCE,
        })
    }

    /// Box filter with `n * n` taps of weight `1 / n^2`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 || n % 2 == 0 {
            return Err(Error::invalid(format!("uniform kernel size must be odd, got {n}")));
        }
        let w = 1.0 / (n * n) as f64;
        let mut kernel = Self::new(n, n, vec![w; n * n])?;
        kernel.renormalize();
        Ok(kernel)
    }

    /// Isotropic Gaussian sampled at integer offsets from the center, then normalized.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::invalid(format!("gaussian kernel size must be odd, got {size}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("gaussian sigma must be positive, got {sigma}")));
        }
        let half = (size / 2) as isize;
        let mut weights = Vec::with_capacity(size * size);
        for dr in -half..=half {
            for dc in -half..=half {
                let d2 = (dr * dr + dc * dc) as f64;
                weights.push((-d2 / (2.0 * sigma * sigma)).exp());
            }
        }
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        let mut kernel = Self::new(size, size, weights)?;
        kernel.renormalize();
        Ok(kernel)
    }

    // Division leaves the sum within a few ulps of one; push the residue into the center tap.
    fn renormalize(&mut self) {
        let sum: f64 = self.weights.iter().sum();
        let center = self.center_index();
        self.weights[center] += 1.0 - sum;
        self.normalized = (self.weights.iter().sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOLERANCE;
    }

    fn center_index(&self) -> usize {
        (self.rows / 2) * self.cols + self.cols / 2
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
}
