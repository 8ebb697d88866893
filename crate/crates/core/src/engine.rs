//! The steered optimization loop and the input/output correlation experiment.
//!
//! One loop covers every variant: plain DIP (random `z`, no steering), CDIP (reference image as
//! `z`, no steering), SDIP (gradient-descent steering), SDIP-GT (ground-truth steering) and
//! DIP-Gaussian (noise steering).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::{
    AdamConfig, AdamState, Generator, GeneratorConfig, GeneratorState, LatentInput, Precision,
};
use crate::grid::{norm, ImageGrid};
use crate::metrics::{cosine_similarity, snr_db};
use crate::operators::{LinearOperator, Measurement};
use crate::steering::{normalize_input, steering_residual, update_input, Schedule, SteeringKind, SteeringSpec};

const STREAM_INIT: u64 = 0;
const STREAM_INPUT: u64 = 1;
const STREAM_NOISE: u64 = 2;

/// Which iterations keep a copy of the network output and steering residual.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SnapshotPolicy {
    #[default]
    None,
    /// Every k-th iteration, including 0 and the final image.
    Every(usize),
    /// Listed iterations. `total_iterations` selects the final image.
    At(Vec<usize>),
}

impl SnapshotPolicy {
    fn wants(&self, iteration: usize) -> bool {
        match self {
            SnapshotPolicy::None => false,
            SnapshotPolicy::Every(k) => *k > 0 && iteration % k == 0,
            SnapshotPolicy::At(list) => list.contains(&iteration),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub operator: LinearOperator,
    pub measurement: Measurement,
    /// Architecture and precision. The init seed is derived from `seed` below, not taken from here.
    pub generator: GeneratorConfig,
    pub steering: SteeringSpec,
    pub schedule: Schedule,
    pub total_iterations: usize,
    pub optimizer: AdamConfig,
    /// Master seed for parameter init, the random input and the noise stream.
    pub seed: u64,
    pub log_every: usize,
    /// Only used for the logged SNR.
    pub ground_truth: Option<ImageGrid>,
    /// Fixed starting input, e.g. a reference image for CDIP. Random normal when absent.
    pub initial_input: Option<LatentInput>,
    pub snapshots: SnapshotPolicy,
}

impl RunConfig {
    /// Defaults for everything except the problem itself.
    pub fn new(operator: LinearOperator, measurement: Measurement) -> Self {
        Self {
            operator,
            measurement,
            generator: GeneratorConfig::default(),
            steering: SteeringSpec::none(),
            schedule: Schedule::default(),
            total_iterations: 10_000,
            optimizer: AdamConfig::default(),
            seed: 0,
            log_every: 1,
            ground_truth: None,
            initial_input: None,
            snapshots: SnapshotPolicy::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.operator.domain_shape();
        if self.measurement.layout() != self.operator.range_layout() {
            return Err(Error::shape(
                self.operator.range_layout(),
                self.measurement.layout(),
            ));
        }
        if self.log_every == 0 {
            return Err(Error::invalid("log_every must be at least 1"));
        }
        self.generator.validate()?;
        self.schedule.validate()?;
        self.optimizer.validate()?;
        self.steering.validate(shape)?;
        if let Some(gt) = &self.ground_truth {
            if gt.shape() != shape {
                return Err(Error::shape(
                    format!("{}x{}", shape.0, shape.1),
                    format!("{}x{}", gt.height(), gt.width()),
                ));
            }
        }
        if let Some(z) = &self.initial_input {
            if (z.height(), z.width()) != shape {
                return Err(Error::shape(
                    format!("{}x{}", shape.0, shape.1),
                    format!("{}x{}", z.height(), z.width()),
                ));
            }
        }
        Ok(())
    }

    /// Flat `key = value` view of the engine settings, for metadata sidecars.
    pub fn describe(&self) -> Vec<(String, String)> {
        let (h, w) = self.operator.domain_shape();
        let g = &self.generator;
        let list = |v: &[usize]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("operator.kind".into(), self.operator.kind().name().into()),
            ("operator.domain".into(), format!("{h}x{w}")),
            ("operator.range".into(), self.operator.range_layout().to_string()),
            ("generator.depth".into(), g.depth.to_string()),
            ("generator.channels".into(), list(&g.channels)),
            ("generator.skip_channels".into(), list(&g.skip_channels)),
            ("generator.input_channels".into(), g.input_channels.to_string()),
            ("generator.upsample".into(), format!("{:?}", g.upsample).to_lowercase()),
            ("generator.precision".into(), format!("{:?}", g.precision).to_lowercase()),
            ("steering.kind".into(), self.steering.kind.name().into()),
            ("steering.seed".into(), self.steering.seed.to_string()),
            ("schedule.base".into(), self.schedule.base.to_string()),
            ("schedule.n_c".into(), self.schedule.center.to_string()),
            ("schedule.n_s".into(), self.schedule.stretch.to_string()),
            ("run.iterations".into(), self.total_iterations.to_string()),
            ("run.seed".into(), self.seed.to_string()),
            ("run.log_every".into(), self.log_every.to_string()),
            ("optimizer.lr".into(), self.optimizer.learning_rate.to_string()),
            ("optimizer.beta1".into(), self.optimizer.beta1.to_string()),
            ("optimizer.beta2".into(), self.optimizer.beta2.to_string()),
            ("optimizer.eps".into(), self.optimizer.epsilon.to_string()),
            ("input.reference".into(), self.initial_input.is_some().to_string()),
        ]
    }

    fn rng(&self, stream: u64, salt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ salt.rotate_left(32));
        rng.set_stream(stream);
        rng
    }

    fn initial_latent(&self, channels: usize) -> Result<LatentInput> {
        let (h, w) = self.operator.domain_shape();
        match &self.initial_input {
            Some(z) if z.channels() != channels => Err(Error::shape(
                format!("{channels} input channels"),
                format!("{} channels", z.channels()),
            )),
            Some(z) => Ok(z.clone()),
            None => Ok(LatentInput::gaussian(channels, h, w, &mut self.rng(STREAM_INPUT, 0))),
        }
    }

    fn generator_seed(&self) -> u64 {
        use rand::RngCore;
        self.rng(STREAM_INIT, 0).next_u64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub loss: f64,
    pub snr_db: Option<f64>,
    pub step_magnitude: f64,
    pub z_change_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub output: ImageGrid,
    /// Absent for the final image, which has no following steering step.
    pub residual: Option<ImageGrid>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub entries: Vec<LogEntry>,
    pub final_image: ImageGrid,
    pub final_input: LatentInput,
    pub wall_time: Duration,
    pub snapshots: BTreeMap<usize, Snapshot>,
}

impl RunRecord {
    pub fn losses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.loss).collect()
    }

    /// Network output stored at `iteration`.
    pub fn snapshot(&self, iteration: usize) -> Result<&ImageGrid> {
        self.snapshots
            .get(&iteration)
            .map(|s| &s.output)
            .ok_or(Error::NotLogged(iteration))
    }

    /// Steering residual stored at `iteration`.
    pub fn residual_snapshot(&self, iteration: usize) -> Result<&ImageGrid> {
        self.snapshots
            .get(&iteration)
            .and_then(|s| s.residual.as_ref())
            .ok_or(Error::NotLogged(iteration))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for entry in &self.entries {
            writer.serialize(entry)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// State visible to a run observer at the start of an iteration, right before the forward pass.
pub struct IterationView<'a, G> {
    pub iteration: usize,
    pub input: &'a LatentInput,
    pub generator: &'a G,
}

pub type Observer<'o, G> = dyn FnMut(&IterationView<'_, G>) -> Result<()> + 'o;

/// Builds the configured generator and runs the loop.
pub fn run(config: &RunConfig) -> Result<(ImageGrid, RunRecord)> {
    config.validate()?;
    let generator = GeneratorConfig {
        seed: config.generator_seed(),
        ..config.generator.clone()
    };
    match config.generator.precision {
        Precision::Single => run_with(config, GeneratorState::<f32>::init(&generator)?, None),
        Precision::Double => run_with(config, GeneratorState::<f64>::init(&generator)?, None),
    }
}

/// The loop on an explicit generator. The observer is called once per iteration and once more
/// after the last one (with `iteration == total_iterations`).
pub fn run_with<G: Generator>(
    config: &RunConfig,
    mut generator: G,
    mut observer: Option<&mut Observer<'_, G>>,
) -> Result<(ImageGrid, RunRecord)> {
    config.validate()?;
    let started = Instant::now();
    let op = &config.operator;
    let y = &config.measurement;
    let mut noise = config.rng(STREAM_NOISE, config.steering.seed);
    let mut adam = AdamState::new(generator.parameter_count());
    let mut z = config.initial_latent(generator.input_channels())?;
    let mut dirty = true;
    let mut entries = Vec::new();
    let mut snapshots = BTreeMap::new();

    let partial = |entries: &Vec<LogEntry>, z: &LatentInput, x: ImageGrid, started: Instant| RunRecord {
        entries: entries.clone(),
        final_image: x,
        final_input: z.clone(),
        wall_time: started.elapsed(),
        snapshots: BTreeMap::new(),
    };

    for n in 0..config.total_iterations {
        if dirty {
            z = normalize_input(&z)?;
            dirty = false;
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs(&IterationView {
                iteration: n,
                input: &z,
                generator: &generator,
            })?;
        }
        let eval = match generator.loss_and_gradient(&z, op, y) {
            Ok(eval) if eval.loss.is_finite() => eval,
            Ok(eval) => {
                return Err(Error::Diverged {
                    iteration: n,
                    loss: eval.loss,
                    partial: Box::new(partial(&entries, &z, eval.output, started)),
                })
            }
            Err(Error::NonFinite(_)) => {
                let (h, w) = op.domain_shape();
                return Err(Error::Diverged {
                    iteration: n,
                    loss: f64::NAN,
                    partial: Box::new(partial(&entries, &z, ImageGrid::zeros(h, w), started)),
                });
            }
            Err(e) => return Err(e),
        };
        if let Err(Error::NonFinite(_)) =
            crate::generator::adam_step(generator.parameters_mut(), &eval.gradient, &config.optimizer, &mut adam)
        {
            return Err(Error::Diverged {
                iteration: n,
                loss: eval.loss,
                partial: Box::new(partial(&entries, &z, eval.output, started)),
            });
        }
        let x = eval.output;
        let residual = match eval.backprojection {
            Some(back) if config.steering.kind == SteeringKind::GradientDescent => back,
            _ => steering_residual(&config.steering, op, y, &x, &mut noise)?,
        };
        let magnitude = config.schedule.step_magnitude(n);
        let next = update_input(&z, &residual, magnitude)?;
        let z_change = if next == z {
            0.0
        } else {
            dirty = true;
            let diff: Vec<f64> = next.values().iter().zip(z.values()).map(|(a, b)| a - b).collect();
            norm(&diff)
        };

        if n % config.log_every == 0 || n + 1 == config.total_iterations {
            let snr = config.ground_truth.as_ref().map(|gt| snr_db(gt, &x)).transpose()?;
            entries.push(LogEntry {
                iteration: n,
                loss: eval.loss,
                snr_db: snr,
                step_magnitude: magnitude,
                z_change_norm: z_change,
            });
        }
        if config.snapshots.wants(n) {
            snapshots.insert(
                n,
                Snapshot {
                    output: x,
                    residual: Some(residual),
                },
            );
        }
        z = next;
    }

    if dirty {
        z = normalize_input(&z)?;
    }
    let total = config.total_iterations;
    if let Some(obs) = observer.as_deref_mut() {
        obs(&IterationView {
            iteration: total,
            input: &z,
            generator: &generator,
        })?;
    }
    let final_image = generator.forward(&z)?;
    if config.snapshots.wants(total) {
        snapshots.insert(
            total,
            Snapshot {
                output: final_image.clone(),
                residual: None,
            },
        );
    }
    let record = RunRecord {
        entries,
        final_image: final_image.clone(),
        final_input: z,
        wall_time: started.elapsed(),
        snapshots,
    };
    Ok((final_image, record))
}

/// One probe: at `iteration`, the input was swapped for a pool image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSample {
    pub trial: usize,
    pub iteration: usize,
    /// `None` when the swap left the input unchanged.
    pub cosine: Option<f64>,
    /// `||delta output|| / ||delta input||`.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationReport {
    pub samples: Vec<CorrelationSample>,
}

impl CorrelationReport {
    pub fn merge(&mut self, other: CorrelationReport) {
        self.samples.extend(other.samples);
    }

    /// Probes with an undefined similarity.
    pub fn skipped(&self) -> usize {
        self.samples.iter().filter(|s| s.cosine.is_none()).count()
    }

    pub fn iterations(&self) -> Vec<usize> {
        let mut its: Vec<usize> = self.samples.iter().map(|s| s.iteration).collect();
        its.sort_unstable();
        its.dedup();
        its
    }

    fn mean_of(&self, pick: impl Fn(&CorrelationSample) -> Option<f64>, at: Option<usize>) -> Option<f64> {
        let vals: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| at.map_or(true, |it| s.iteration == it))
            .filter_map(pick)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn mean_cosine(&self) -> Option<f64> {
        self.mean_of(|s| s.cosine, None)
    }

    pub fn mean_cosine_at(&self, iteration: usize) -> Option<f64> {
        self.mean_of(|s| s.cosine, Some(iteration))
    }

    pub fn mean_alpha_at(&self, iteration: usize) -> Option<f64> {
        self.mean_of(|s| s.alpha, Some(iteration))
    }
}

fn probe<G: Generator>(
    generator: &G,
    current: &LatentInput,
    swap: &ImageGrid,
) -> Result<(Option<f64>, Option<f64>)> {
    let replacement = normalize_input(&LatentInput::from_image(swap, current.channels()))?;
    let d_in: Vec<f64> = replacement
        .values()
        .iter()
        .zip(current.values())
        .map(|(a, b)| a - b)
        .collect();
    if d_in.iter().all(|&v| v == 0.0) {
        return Ok((None, None));
    }
    let old = generator.forward(current)?;
    let new = generator.forward(&replacement)?;
    let d_out = new.sub(&old)?;
    // compare against the input change seen by the first channel plane, which is what the
    // single-channel output can follow
    let plane = d_out.len();
    let d_in_plane = &d_in[..plane];
    if norm(d_in_plane) == 0.0 {
        return Ok((None, None));
    }
    if d_out.norm() == 0.0 {
        return Ok((Some(0.0), Some(0.0)));
    }
    let cosine = cosine_similarity(d_in_plane, d_out.values())?;
    let alpha = d_out.norm() / norm(&d_in);
    Ok((Some(cosine), Some(alpha)))
}

/// Trains with `config` once per trial and probes the generator at each swap iteration.
///
/// Trial `t` uses master seed `config.seed + t`; swap `j` of trial `t` uses
/// `swap_pool[(t * swaps + j) % pool]`. Probing does not alter the training trajectory.
pub fn correlation_experiment(
    config: &RunConfig,
    swap_iterations: &[usize],
    swap_pool: &[ImageGrid],
    trials: usize,
) -> Result<CorrelationReport> {
    correlation_experiment_with(config, swap_iterations, swap_pool, trials, |cfg| {
        let g = GeneratorConfig {
            seed: cfg.generator_seed(),
            ..cfg.generator.clone()
        };
        match cfg.generator.precision {
            Precision::Single => Ok(Box::new(GeneratorState::<f32>::init(&g)?) as Box<dyn ErasedProbe>),
            Precision::Double => Ok(Box::new(GeneratorState::<f64>::init(&g)?) as Box<dyn ErasedProbe>),
        }
    })
}

/// Object-safe handle so the experiment can pick the network precision at runtime.
pub trait ErasedProbe {
    fn correlate(
        self: Box<Self>,
        config: &RunConfig,
        trial: usize,
        swaps: &[(usize, ImageGrid)],
    ) -> Result<Vec<CorrelationSample>>;
}

impl<G: Generator> ErasedProbe for G {
    fn correlate(
        self: Box<Self>,
        config: &RunConfig,
        trial: usize,
        swaps: &[(usize, ImageGrid)],
    ) -> Result<Vec<CorrelationSample>> {
        let mut samples = Vec::new();
        let mut observer = |view: &IterationView<'_, G>| -> Result<()> {
            for (k, image) in swaps.iter().filter(|(k, _)| *k == view.iteration) {
                let (cosine, alpha) = probe(view.generator, view.input, image)?;
                samples.push(CorrelationSample {
                    trial,
                    iteration: *k,
                    cosine,
                    alpha,
                });
            }
            Ok(())
        };
        run_with(config, *self, Some(&mut observer))?;
        Ok(samples)
    }
}

/// [`correlation_experiment`] with a caller-supplied generator per trial.
pub fn correlation_experiment_with<F>(
    config: &RunConfig,
    swap_iterations: &[usize],
    swap_pool: &[ImageGrid],
    trials: usize,
    mut make_generator: F,
) -> Result<CorrelationReport>
where
    F: FnMut(&RunConfig) -> Result<Box<dyn ErasedProbe>>,
{
    if trials == 0 {
        return Err(Error::invalid("correlation experiment needs at least one trial"));
    }
    if swap_pool.is_empty() || swap_iterations.is_empty() {
        return Err(Error::invalid("correlation experiment needs swap images and iterations"));
    }
    let shape = config.operator.domain_shape();
    for image in swap_pool {
        if image.shape() != shape {
            return Err(Error::shape(
                format!("{}x{}", shape.0, shape.1),
                format!("{}x{}", image.height(), image.width()),
            ));
        }
    }
    let last = *swap_iterations.iter().max().expect("non-empty");
    let mut report = CorrelationReport::default();
    for t in 0..trials {
        let trial_config = RunConfig {
            seed: config.seed.wrapping_add(t as u64),
            total_iterations: last,
            snapshots: SnapshotPolicy::None,
            log_every: last.max(1),
            ..config.clone()
        };
        let swaps: Vec<(usize, ImageGrid)> = swap_iterations
            .iter()
            .enumerate()
            .map(|(j, &k)| (k, swap_pool[(t * swap_iterations.len() + j) % swap_pool.len()].clone()))
            .collect();
        let generator = make_generator(&trial_config)?;
        report.samples.extend(generator.correlate(&trial_config, t, &swaps)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::PassThrough;
    use crate::steering::SteeringKind;

    fn tiny_config(kind: SteeringKind, iterations: usize) -> RunConfig {
        let op = LinearOperator::identity(16, 16);
        let truth = ImageGrid::from_fn(16, 16, |r, c| if (4..12).contains(&r) && c > 6 { 0.8 } else { 0.1 });
        let y = op.apply(&truth).unwrap();
        let mut cfg = RunConfig::new(op, y);
        cfg.generator = GeneratorConfig {
            depth: 2,
            channels: vec![4, 4],
            skip_channels: vec![2, 2],
            ..GeneratorConfig::default()
        };
        cfg.steering = SteeringSpec::of_kind(kind);
        if kind == SteeringKind::GroundTruth {
            cfg.steering = SteeringSpec::ground_truth(truth.clone());
        }
        cfg.schedule = Schedule::new(1e-2, 5.0, 2.0).unwrap();
        cfg.total_iterations = iterations;
        cfg.ground_truth = Some(truth);
        cfg
    }

    #[test]
    fn zero_iterations_returns_initial_forward() {
        let cfg = tiny_config(SteeringKind::GradientDescent, 0);
        let (x, record) = run(&cfg).unwrap();
        assert!(record.entries.is_empty());
        let g = GeneratorState::<f32>::init(&GeneratorConfig {
            seed: cfg.generator_seed(),
            ..cfg.generator.clone()
        })
        .unwrap();
        let z = normalize_input(&cfg.initial_latent(1).unwrap()).unwrap();
        assert_eq!(x, g.forward(&z).unwrap());
    }

    #[test]
    fn snapshots_and_unlogged_iterations() {
        let mut cfg = tiny_config(SteeringKind::GradientDescent, 6);
        cfg.snapshots = SnapshotPolicy::At(vec![0, 3, 6]);
        let (x, record) = run(&cfg).unwrap();
        let (x0, _) = run(&RunConfig { total_iterations: 0, ..cfg.clone() }).unwrap();
        assert_eq!(record.snapshot(0).unwrap(), &x0);
        assert_eq!(record.snapshot(6).unwrap(), &x);
        assert!(record.residual_snapshot(3).is_ok());
        assert!(matches!(record.snapshot(2), Err(Error::NotLogged(2))));
        assert!(record.residual_snapshot(6).is_err());
    }

    #[test]
    fn log_stride_keeps_last_iteration() {
        let mut cfg = tiny_config(SteeringKind::None, 7);
        cfg.log_every = 3;
        let (_, record) = run(&cfg).unwrap();
        let its: Vec<usize> = record.entries.iter().map(|e| e.iteration).collect();
        assert_eq!(its, vec![0, 3, 6]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny_config(SteeringKind::None, 1);
        cfg.log_every = 0;
        assert!(run(&cfg).is_err());
        let mut cfg = tiny_config(SteeringKind::None, 1);
        cfg.initial_input = Some(LatentInput::new(1, 8, 8, vec![1.0; 64]).unwrap());
        assert!(run(&cfg).is_err());
        let mut cfg = tiny_config(SteeringKind::None, 1);
        cfg.steering = SteeringSpec::of_kind(SteeringKind::GroundTruth);
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn csv_has_expected_columns() {
        let cfg = tiny_config(SteeringKind::GradientDescent, 3);
        let (_, record) = run(&cfg).unwrap();
        let mut buf = Vec::new();
        record.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "iteration,loss,snr_db,step_magnitude,z_change_norm"
        );
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn pass_through_correlation_is_exactly_one() {
        let mut cfg = tiny_config(SteeringKind::None, 0);
        cfg.generator.input_channels = 1;
        let pool: Vec<ImageGrid> = (0..3)
            .map(|k| ImageGrid::from_fn(16, 16, |r, c| ((r * 7 + c * (k + 2)) % 11) as f64 / 10.0 + 0.05))
            .collect();
        let report = correlation_experiment_with(&cfg, &[1, 3, 5], &pool, 4, |_| {
            Ok(Box::new(PassThrough) as Box<dyn ErasedProbe>)
        })
        .unwrap();
        assert_eq!(report.samples.len(), 12);
        assert_eq!(report.skipped(), 0);
        for s in &report.samples {
            assert_eq!(s.cosine, Some(1.0));
        }
    }

    #[test]
    fn identical_swap_is_flagged() {
        let image = ImageGrid::from_fn(16, 16, |r, c| (r + c) as f64 / 30.0 + 0.1);
        let mut cfg = tiny_config(SteeringKind::None, 0);
        cfg.initial_input = Some(LatentInput::from_image(&image, 1));
        let report = correlation_experiment_with(&cfg, &[2], &[image], 1, |_| {
            Ok(Box::new(PassThrough) as Box<dyn ErasedProbe>)
        })
        .unwrap();
        assert_eq!(report.skipped(), 1);
        assert_eq!(report.mean_cosine(), None);
    }
}
