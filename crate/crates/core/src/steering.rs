//! Steering residuals and the scheduled network-input update.
//!
//! Each iteration the network input `z` is nudged along a unit direction `r / ||r||` by a
//! magnitude that follows a logistic ramp in the iteration index, then renormalized to unit
//! length before the next forward pass.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::generator::LatentInput;
use crate::grid::{norm, ImageGrid};
use crate::operators::{LinearOperator, Measurement};

/// Logistic step-size ramp `base / (1 + exp(-(n - center) / stretch))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub base: f64,
    pub center: f64,
    pub stretch: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            base: 1e-3,
            center: 5000.0,
            stretch: 500.0,
        }
    }
}

impl Schedule {
    pub fn new(base: f64, center: f64, stretch: f64) -> Result<Self> {
        let schedule = Self {
            base,
            center,
            stretch,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base > 0.0 && self.base.is_finite()) {
            return Err(Error::invalid(format!("schedule base must be positive, got {}", self.base)));
        }
        if !(self.stretch > 0.0 && self.stretch.is_finite()) {
            return Err(Error::invalid(format!(
                "schedule stretch must be positive, got {}",
                self.stretch
            )));
        }
        if !(self.center >= 0.0 && self.center.is_finite()) {
            return Err(Error::invalid(format!(
                "schedule center must be non-negative, got {}",
                self.center
            )));
        }
        Ok(())
    }

    pub fn step_magnitude(&self, iteration: usize) -> f64 {
        let t = (iteration as f64 - self.center) / self.stretch;
        self.base / (1.0 + (-t).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringKind {
    /// Fixed input: plain deep image prior (or conditional DIP with a reference input).
    None,
    /// `H^T (y - H x)`.
    GradientDescent,
    /// `x_gt - x`, an oracle that knows the true image.
    GroundTruth,
    /// Fresh standard-normal image every iteration.
    RandomGaussian,
}

impl SteeringKind {
    pub fn name(self) -> &'static str {
        match self {
            SteeringKind::None => "none",
            SteeringKind::GradientDescent => "gradient_descent",
            SteeringKind::GroundTruth => "ground_truth",
            SteeringKind::RandomGaussian => "random_gaussian",
        }
    }
}

impl std::str::FromStr for SteeringKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SteeringKind::None),
            "gradient_descent" | "gd" => Ok(SteeringKind::GradientDescent),
            "ground_truth" | "gt" => Ok(SteeringKind::GroundTruth),
            "random_gaussian" | "gaussian" => Ok(SteeringKind::RandomGaussian),
            other => Err(Error::Config(format!("unknown steering kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringSpec {
    pub kind: SteeringKind,
    /// Required iff `kind == GroundTruth`.
    pub ground_truth: Option<ImageGrid>,
    /// Seeds the noise stream of `RandomGaussian`.
    pub seed: u64,
}

impl SteeringSpec {
    pub fn none() -> Self {
        Self::of_kind(SteeringKind::None)
    }

    pub fn gradient_descent() -> Self {
        Self::of_kind(SteeringKind::GradientDescent)
    }

    pub fn ground_truth(image: ImageGrid) -> Self {
        Self {
            kind: SteeringKind::GroundTruth,
            ground_truth: Some(image),
            seed: 0,
        }
    }

    pub fn random_gaussian(seed: u64) -> Self {
        Self {
            kind: SteeringKind::RandomGaussian,
            ground_truth: None,
            seed,
        }
    }

    pub fn of_kind(kind: SteeringKind) -> Self {
        Self {
            kind,
            ground_truth: None,
            seed: 0,
        }
    }

    pub fn validate(&self, shape: (usize, usize)) -> Result<()> {
        if self.kind == SteeringKind::GroundTruth {
            match &self.ground_truth {
                None => {
                    return Err(Error::invalid("ground-truth steering needs a ground-truth image"))
                }
                Some(gt) if gt.shape() != shape => {
                    return Err(Error::shape(
                        format!("{}x{}", shape.0, shape.1),
                        format!("{}x{}", gt.height(), gt.width()),
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Residual image that steers the next network input.
///
/// `rng` is only advanced by `RandomGaussian`.
pub fn steering_residual<R: Rng + ?Sized>(
    spec: &SteeringSpec,
    op: &LinearOperator,
    y: &Measurement,
    x: &ImageGrid,
    rng: &mut R,
) -> Result<ImageGrid> {
    let (h, w) = x.shape();
    spec.validate((h, w))?;
    match spec.kind {
        SteeringKind::None => Ok(ImageGrid::zeros(h, w)),
        SteeringKind::GradientDescent => op.backprojected_residual(y, x).map(|(r, _)| r),
        SteeringKind::GroundTruth => spec
            .ground_truth
            .as_ref()
            .expect("validated above")
            .sub(x),
        SteeringKind::RandomGaussian => {
            let values = (0..h * w).map(|_| rng.sample(StandardNormal)).collect();
            ImageGrid::new(h, w, values)
        }
    }
}

/// `z + magnitude * r / ||r||`. The residual is tiled across input channels; a zero residual or
/// zero magnitude returns `z` unchanged.
pub fn update_input(z: &LatentInput, r: &ImageGrid, magnitude: f64) -> Result<LatentInput> {
    if (z.height(), z.width()) != r.shape() {
        return Err(Error::shape(
            format!("{}x{}", z.height(), z.width()),
            format!("{}x{}", r.height(), r.width()),
        ));
    }
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::invalid(format!("step magnitude must be >= 0, got {magnitude}")));
    }
    let r_norm = r.norm() * (z.channels() as f64).sqrt();
    if magnitude == 0.0 || r_norm == 0.0 {
        return Ok(z.clone());
    }
    let scale = magnitude / r_norm;
    let plane = r.len();
    let values = z
        .values()
        .iter()
        .enumerate()
        .map(|(i, &zi)| zi + scale * r.values()[i % plane])
        .collect();
    LatentInput::new(z.channels(), z.height(), z.width(), values)
}

/// Rescales `z` to unit Euclidean norm.
pub fn normalize_input(z: &LatentInput) -> Result<LatentInput> {
    let n = norm(z.values());
    if n == 0.0 {
        return Err(Error::invalid("cannot normalize a zero network input"));
    }
    let values = z.values().iter().map(|v| v / n).collect();
    LatentInput::new(z.channels(), z.height(), z.width(), values)
}
