//! The untrained convolutional generator `x = G(theta | z)`.

mod adam;
mod checkpoint;
mod layers;
mod real;
mod unet;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use layers::UpsampleMode;
pub use real::Real;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::operators::{LinearOperator, Measurement};
use layers::Tensor;
use unet::UNetLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    PerLayer,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Sigmoid,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub depth: usize,
    pub channels: Vec<usize>,
    /// One entry per level; 0 disables that level's skip branch.
    pub skip_channels: Vec<usize>,
    pub input_channels: usize,
    pub output_channels: usize,
    pub upsample: UpsampleMode,
    pub normalization: Normalization,
    pub output_activation: OutputActivation,
    pub precision: Precision,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            depth: 5,
            channels: vec![16, 32, 64, 128, 128],
            skip_channels: vec![4; 5],
            input_channels: 1,
            output_channels: 1,
            upsample: UpsampleMode::Bilinear,
            normalization: Normalization::PerLayer,
            output_activation: OutputActivation::Sigmoid,
            precision: Precision::Single,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::invalid("generator depth must be at least 1"));
        }
        if self.channels.len() != self.depth || self.skip_channels.len() != self.depth {
            return Err(Error::invalid(format!(
                "generator depth {} needs {} channel and skip entries, got {} and {}",
                self.depth,
                self.depth,
                self.channels.len(),
                self.skip_channels.len()
            )));
        }
        if self.channels.iter().any(|&c| c == 0) || self.input_channels == 0 {
            return Err(Error::invalid("channel counts must be at least 1"));
        }
        // images are single-channel throughout the pipeline
        if self.output_channels != 1 {
            return Err(Error::invalid(format!(
                "only single-channel output is supported, got {}",
                self.output_channels
            )));
        }
        Ok(())
    }

    /// Spatial sides must be divisible by this.
    pub fn spatial_multiple(&self) -> usize {
        1 << self.depth
    }
}

/// Network input `z`: `channels` planes of the target image size.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentInput {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl LatentInput {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::invalid("latent input dimensions must be positive"));
        }
        if values.len() != channels * height * width {
            return Err(Error::shape(channels * height * width, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent input"));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    /// Standard-normal entries.
    pub fn gaussian<R: Rng + ?Sized>(channels: usize, height: usize, width: usize, rng: &mut R) -> Self {
        let values = (0..channels * height * width)
            .map(|_| rng.sample(rand_distr::StandardNormal))
            .collect();
        Self::new(channels, height, width, values).expect("finite samples")
    }

    /// Uniform entries in `[0, 1)`.
    pub fn uniform<R: Rng + ?Sized>(channels: usize, height: usize, width: usize, rng: &mut R) -> Self {
        let values = (0..channels * height * width).map(|_| rng.gen::<f64>()).collect();
        Self::new(channels, height, width, values).expect("finite samples")
    }

    /// Copies an image into every input channel.
    pub fn from_image(image: &ImageGrid, channels: usize) -> Self {
        let mut values = Vec::with_capacity(channels * image.len());
        for _ in 0..channels {
            values.extend_from_slice(image.values());
        }
        Self::new(channels, image.height(), image.width(), values).expect("image values are finite")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        crate::grid::norm(&self.values)
    }
}

/// Result of one forward/backward evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    /// `||y - H x||^2`
    pub loss: f64,
    /// Network output `x`.
    pub output: ImageGrid,
    /// `d loss / d theta`, laid out like the parameters.
    pub gradient: Vec<T>,
    /// `H^T (y - H x)` when the generator computed it on the way.
    pub backprojection: Option<ImageGrid>,
}

/// Anything that maps a latent input to an image and can be fitted to a measurement.
pub trait Generator {
    type Scalar: Real;

    fn input_channels(&self) -> usize;

    fn forward(&self, z: &LatentInput) -> Result<ImageGrid>;

    fn loss_and_gradient(
        &self,
        z: &LatentInput,
        op: &LinearOperator,
        y: &Measurement,
    ) -> Result<Evaluation<Self::Scalar>>;

    fn parameters(&self) -> &[Self::Scalar];

    fn parameters_mut(&mut self) -> &mut [Self::Scalar];

    fn parameter_count(&self) -> usize {
        self.parameters().len()
    }
}

/// Network configuration plus its parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorState<T> {
    config: GeneratorConfig,
    layout: UNetLayout,
    theta: Vec<T>,
}

impl<T: Real> GeneratorState<T> {
    /// Fan-in scaled uniform weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, unit norm scales,
    /// zero norm shifts. Deterministic in `config.seed`.
    pub fn init(config: &GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let layout = UNetLayout::new(config);
        let mut theta = vec![T::zero(); layout.param_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let ranges = layout.weight_ranges().iter().chain(layout.bias_ranges());
        for &(offset, len, fan_in) in ranges {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut theta[offset..offset + len] {
                *p = T::of(rng.gen_range(-bound..bound));
            }
        }
        for &(offset, len) in layout.norm_gammas() {
            theta[offset..offset + len].iter_mut().for_each(|g| *g = T::one());
        }
        let mut config = config.clone();
        config.precision = T::PRECISION;
        Ok(Self {
            config,
            layout,
            theta,
        })
    }

    pub(crate) fn from_parts(config: GeneratorConfig, theta: Vec<T>) -> Result<Self> {
        config.validate()?;
        let layout = UNetLayout::new(&config);
        if theta.len() != layout.param_count() {
            return Err(Error::shape(layout.param_count(), theta.len()));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generator parameters"));
        }
        Ok(Self {
            config,
            layout,
            theta,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    fn to_tensor(&self, z: &LatentInput) -> Result<Tensor<T>> {
        let m = self.config.spatial_multiple();
        if z.channels() != self.config.input_channels {
            return Err(Error::shape(
                format!("{} input channels", self.config.input_channels),
                format!("{} channels", z.channels()),
            ));
        }
        if z.height() % m != 0 || z.width() % m != 0 {
            return Err(Error::invalid(format!(
                "input {}x{} is not divisible by 2^depth = {m}",
                z.height(),
                z.width()
            )));
        }
        let data = z.values().iter().map(|&v| T::of(v)).collect();
        Ok(Tensor::new(z.channels(), z.height(), z.width(), data))
    }

    fn to_image(out: &Tensor<T>) -> Result<ImageGrid> {
        let values = out.data.iter().map(|v| v.as_f64()).collect();
        ImageGrid::new(out.h, out.w, values).map_err(|e| match e {
            Error::NonFinite(_) => Error::NonFinite("generator output"),
            other => other,
        })
    }

    /// One adaptive moment step on the parameters.
    pub fn update_parameters(
        &mut self,
        grad: &[T],
        optimizer: &AdamConfig,
        state: &mut AdamState<T>,
    ) -> Result<()> {
        adam_step(&mut self.theta, grad, optimizer, state)
    }
}

impl<T: Real> Generator for GeneratorState<T> {
    type Scalar = T;

    fn input_channels(&self) -> usize {
        self.config.input_channels
    }

    fn forward(&self, z: &LatentInput) -> Result<ImageGrid> {
        let input = self.to_tensor(z)?;
        let tape = self.layout.forward(&self.theta, input);
        Self::to_image(tape.output())
    }

    fn loss_and_gradient(
        &self,
        z: &LatentInput,
        op: &LinearOperator,
        y: &Measurement,
    ) -> Result<Evaluation<T>> {
        if op.domain_shape() != (z.height(), z.width()) {
            return Err(Error::shape(
                format!("{}x{}", op.domain_shape().0, op.domain_shape().1),
                format!("{}x{}", z.height(), z.width()),
            ));
        }
        let input = self.to_tensor(z)?;
        let tape = self.layout.forward(&self.theta, input);
        let output = Self::to_image(tape.output())?;
        let (back, loss) = op.backprojected_residual(y, &output)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        // d/dx ||y - Hx||^2 = -2 H^T (y - Hx)
        let d_output = back.values().iter().map(|&r| T::of(-2.0 * r)).collect();
        let gradient = self.layout.backward(&self.theta, &tape, d_output);
        Ok(Evaluation {
            loss,
            output,
            gradient,
            backprojection: Some(back),
        })
    }

    fn parameters(&self) -> &[T] {
        &self.theta
    }

    fn parameters_mut(&mut self) -> &mut [T] {
        &mut self.theta
    }
}

/// Debug generator whose output is its (single-channel) input. Has no parameters.
#[derive(Debug, Clone, Default)]
pub struct PassThrough;

impl Generator for PassThrough {
    type Scalar = f64;

    fn input_channels(&self) -> usize {
        1
    }

    fn forward(&self, z: &LatentInput) -> Result<ImageGrid> {
        if z.channels() != 1 {
            return Err(Error::shape("1 channel", format!("{} channels", z.channels())));
        }
        ImageGrid::new(z.height(), z.width(), z.values().to_vec())
    }

    fn loss_and_gradient(
        &self,
        z: &LatentInput,
        op: &LinearOperator,
        y: &Measurement,
    ) -> Result<Evaluation<f64>> {
        let output = self.forward(z)?;
        let loss = op.misfit(y, &output)?;
        Ok(Evaluation {
            loss,
            output,
            gradient: Vec::new(),
            backprojection: None,
        })
    }

    fn parameters(&self) -> &[f64] {
        &[]
    }

    fn parameters_mut(&mut self) -> &mut [f64] {
        &mut []
    }
}
