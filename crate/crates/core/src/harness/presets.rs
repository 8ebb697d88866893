//! Named experiment presets and their execution.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::bundled::{bundled_image, correlation_pool};
use super::config::ConfigMap;
use super::io::{load_image, save_image};
use super::phantom::generate_phantom;
use super::summary::{emit_summary, SummaryRow};
use crate::baselines::{bicubic_upscale, nearest_upscale, normal_operator_norm, steepest_descent, SteepestDescent};
use crate::engine::{correlation_experiment, run, RunConfig, RunRecord, SnapshotPolicy};
use crate::error::{Error, Result};
use crate::generator::{AdamConfig, GeneratorConfig, LatentInput, Precision, UpsampleMode};
use crate::grid::ImageGrid;
use crate::metrics::{psnr_db, snr_db};
use crate::operators::{ConvKernel, LinearOperator, Measurement, RadonGeometry};
use crate::steering::{Schedule, SteeringSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(Error::Config(format!("unknown scale '{other}' (desk or full)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    CtLimitedAngle,
    CtFewView,
    CtSweep,
    DeblurUniform,
    DeblurGaussian,
    SrX4,
    SrX8,
    Correlate,
    Inpaint,
    Fig8Snapshots,
}

impl PresetName {
    pub const ALL: [PresetName; 10] = [
        PresetName::CtLimitedAngle,
        PresetName::CtFewView,
        PresetName::CtSweep,
        PresetName::DeblurUniform,
        PresetName::DeblurGaussian,
        PresetName::SrX4,
        PresetName::SrX8,
        PresetName::Correlate,
        PresetName::Inpaint,
        PresetName::Fig8Snapshots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetName::CtLimitedAngle => "ct_limited_angle",
            PresetName::CtFewView => "ct_few_view",
            PresetName::CtSweep => "ct_sweep",
            PresetName::DeblurUniform => "deblur_uniform",
            PresetName::DeblurGaussian => "deblur_gaussian",
            PresetName::SrX4 => "sr_x4",
            PresetName::SrX8 => "sr_x8",
            PresetName::Correlate => "correlate",
            PresetName::Inpaint => "inpaint",
            PresetName::Fig8Snapshots => "fig8_snapshots",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

/// Every key a preset understands.
pub const KNOWN_KEYS: &[&str] = &[
    "image.size",
    "images",
    "operator.kind",
    "radon.angle_start",
    "radon.angle_stop",
    "radon.angle_step",
    "radon.detectors",
    "blur.kernel",
    "blur.size",
    "blur.sigma",
    "downsample.factor",
    "downsample.size",
    "downsample.sigma",
    "mask.keep",
    "mask.seed",
    "methods",
    "run.iterations",
    "run.seeds",
    "run.seed",
    "run.log_every",
    "steering.seed",
    "schedule.base",
    "schedule.n_c",
    "schedule.n_s",
    "optimizer.lr",
    "optimizer.beta1",
    "optimizer.beta2",
    "optimizer.eps",
    "generator.channels",
    "generator.skip",
    "generator.upsample",
    "generator.precision",
    "generator.input_channels",
    "baseline.sd_iterations",
    "baseline.sd_step",
    "baseline.ridge",
    "sweep.n_c",
    "sweep.n_s",
    "snapshot.iterations",
    "correlate.trials",
    "correlate.swaps",
];

fn desk_or_full(scale: Scale, desk: &str, full: &str) -> String {
    match scale {
        Scale::Desk => desk.to_string(),
        Scale::Full => full.to_string(),
    }
}

/// Fully specified defaults of a preset at a scale.
pub fn preset_defaults(name: PresetName, scale: Scale) -> ConfigMap {
    let mut c = ConfigMap::new();
    let d = |desk: &str, full: &str| desk_or_full(scale, desk, full);
    c.set("image.size", d("64", "256"));
    c.set("run.iterations", d("2000", "10000"));
    c.set("run.seeds", d("3", "1"));
    c.set("run.seed", 0);
    c.set("run.log_every", 10);
    c.set("steering.seed", 0);
    c.set("schedule.base", 1e-3);
    c.set("schedule.n_c", d("1000", "5000"));
    c.set("schedule.n_s", d("100", "500"));
    c.set("optimizer.lr", d("0.01", "0.001"));
    c.set("optimizer.beta1", 0.9);
    c.set("optimizer.beta2", 0.999);
    c.set("optimizer.eps", 1e-8);
    c.set("generator.channels", d("16,32,64,128", "16,32,64,128,128"));
    c.set("generator.skip", d("4,4,4,4", "4,4,4,4,4"));
    c.set("generator.upsample", "bilinear");
    c.set("generator.precision", "single");
    c.set("generator.input_channels", d("8", "1"));
    c.set("baseline.sd_iterations", d("500", "2000"));
    c.set("baseline.ridge", 0);
    c.set("radon.angle_start", 0);
    c.set("radon.angle_stop", 120);
    c.set("radon.angle_step", 1);
    match name {
        PresetName::CtLimitedAngle => {
            c.set("operator.kind", "radon");
            c.set("methods", "sd,cdip,dip,sdip,sdip_gt");
        }
        PresetName::CtFewView => {
            c.set("operator.kind", "radon");
            c.set("radon.angle_stop", 180);
            c.set("radon.angle_step", 6);
            c.set("methods", "sd,dip,sdip,sdip_gt");
        }
        PresetName::CtSweep => {
            c.set("operator.kind", "radon");
            c.set("radon.angle_stop", 135);
            c.set("methods", "sdip");
            c.set("sweep.n_c", d("0,2000", "0,10000"));
            c.set("sweep.n_s", d("40,100", "200,500"));
        }
        PresetName::DeblurUniform | PresetName::DeblurGaussian => {
            c.set("image.size", 128);
            c.set("generator.channels", d("8,16,32,64", "16,32,64,128,128"));
            c.set("images", "text,blobs");
            c.set("operator.kind", "blur");
            if name == PresetName::DeblurUniform {
                c.set("blur.kernel", "uniform");
                c.set("blur.size", 9);
            } else {
                c.set("blur.kernel", "gaussian");
                c.set("blur.size", 25);
                c.set("blur.sigma", 1.6);
            }
            c.set("methods", "dip,sdip,sdip_gt");
        }
        PresetName::SrX4 | PresetName::SrX8 => {
            let f = if name == PresetName::SrX4 { 4 } else { 8 };
            c.set("image.size", 128);
            c.set("generator.channels", d("8,16,32,64", "16,32,64,128,128"));
            c.set("images", "text,blobs");
            c.set("operator.kind", "downsample");
            c.set("downsample.factor", f);
            c.set("downsample.size", 2 * f + 1);
            c.set("downsample.sigma", f as f64 / 2.0);
            c.set("methods", "bicubic,nearest,dip,dip_gaussian,sdip");
        }
        PresetName::Correlate => {
            c.set("operator.kind", "identity");
            c.set("methods", "dip,cdip");
            c.set("correlate.trials", d("20", "1000"));
            c.set("correlate.swaps", d("1,300,600", "1,300,600,900,1200,1500"));
        }
        PresetName::Inpaint => {
            c.set("images", "blobs");
            c.set("operator.kind", "mask");
            c.set("mask.keep", 0.5);
            c.set("mask.seed", 1);
            c.set("methods", "dip,dip_ramp,sdip");
        }
        PresetName::Fig8Snapshots => {
            c.set("operator.kind", "radon");
            c.set("methods", "sdip");
            c.set("run.seeds", 1);
            c.set("snapshot.iterations", d("0,200,400,600,800,2000", "0,1000,2000,3000,4000,10000"));
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub scale: Scale,
    pub overrides: ConfigMap,
}

impl ExperimentPreset {
    pub fn new(name: PresetName, scale: Scale) -> Self {
        Self {
            name,
            scale,
            overrides: ConfigMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.overrides.set(key, value);
        self
    }

    /// Defaults with overrides applied; unknown keys are rejected.
    pub fn resolve(&self) -> Result<ConfigMap> {
        for (k, _) in self.overrides.iter() {
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::Config(format!("unknown key {k}")));
            }
        }
        let mut c = preset_defaults(self.name, self.scale);
        c.merge(&self.overrides);
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SteepestDescent,
    Dip,
    Cdip,
    DipRamp,
    Sdip,
    SdipGt,
    DipGaussian,
    Bicubic,
    Nearest,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SteepestDescent => "sd",
            Method::Dip => "dip",
            Method::Cdip => "cdip",
            Method::DipRamp => "dip_ramp",
            Method::Sdip => "sdip",
            Method::SdipGt => "sdip_gt",
            Method::DipGaussian => "dip_gaussian",
            Method::Bicubic => "bicubic",
            Method::Nearest => "nearest",
        }
    }

    fn is_network(self) -> bool {
        !matches!(self, Method::SteepestDescent | Method::Bicubic | Method::Nearest)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sd" => Method::SteepestDescent,
            "dip" => Method::Dip,
            "cdip" => Method::Cdip,
            "dip_ramp" => Method::DipRamp,
            "sdip" => Method::Sdip,
            "sdip_gt" => Method::SdipGt,
            "dip_gaussian" => Method::DipGaussian,
            "bicubic" => Method::Bicubic,
            "nearest" => Method::Nearest,
            other => return Err(Error::Config(format!("unknown method '{other}'"))),
        })
    }
}

/// A ground truth with its forward model and noiseless measurement.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub truth: ImageGrid,
    pub operator: LinearOperator,
    pub measurement: Measurement,
}

fn generator_config(c: &ConfigMap) -> Result<GeneratorConfig> {
    let channels: Vec<usize> = c.require_list("generator.channels")?;
    let mut skip: Vec<usize> = c.require_list("generator.skip")?;
    if skip.len() == 1 {
        skip = vec![skip[0]; channels.len()];
    }
    let upsample = match c.require_str("generator.upsample")? {
        "bilinear" => UpsampleMode::Bilinear,
        "nearest" => UpsampleMode::Nearest,
        other => return Err(Error::Config(format!("unknown upsample mode '{other}'"))),
    };
    let precision = match c.require_str("generator.precision")? {
        "single" | "f32" => Precision::Single,
        "double" | "f64" => Precision::Double,
        other => return Err(Error::Config(format!("unknown precision '{other}'"))),
    };
    let config = GeneratorConfig {
        depth: channels.len(),
        channels,
        skip_channels: skip,
        input_channels: c.require("generator.input_channels")?,
        upsample,
        precision,
        ..GeneratorConfig::default()
    };
    config.validate()?;
    Ok(config)
}

fn center_crop(x: &ImageGrid, multiple: usize) -> Result<ImageGrid> {
    let (h, w) = x.shape();
    let (nh, nw) = (h / multiple * multiple, w / multiple * multiple);
    if nh == 0 || nw == 0 {
        return Err(Error::invalid(format!(
            "image {h}x{w} is smaller than the network's size multiple {multiple}"
        )));
    }
    let (r0, c0) = ((h - nh) / 2, (w - nw) / 2);
    Ok(ImageGrid::from_fn(nh, nw, |r, c| x.get(r0 + r, c0 + c)))
}

fn input_images(c: &ConfigMap, multiple: usize) -> Result<Vec<(String, ImageGrid)>> {
    let n: usize = c.require("image.size")?;
    let names: Vec<String> = c.require_list("images")?;
    if names.is_empty() {
        return Err(Error::Config("no input images listed".into()));
    }
    names
        .into_iter()
        .map(|name| {
            let image = match bundled_image(&name, n) {
                Some(img) => img,
                None => {
                    let path = Path::new(&name);
                    if !path.exists() {
                        return Err(Error::Config(format!("input image {name} not found")));
                    }
                    load_image(path)?
                }
            };
            let label = Path::new(&name)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or(&name)
                .to_string();
            Ok((label, center_crop(&image, multiple)?))
        })
        .collect()
}

fn radon_geometry(c: &ConfigMap, n: usize) -> Result<RadonGeometry> {
    let start: f64 = c.require("radon.angle_start")?;
    let stop: f64 = c.require("radon.angle_stop")?;
    let step: f64 = c.require("radon.angle_step")?;
    let geometry = RadonGeometry::angular_range(start, stop, step, n)?;
    match c.get::<usize>("radon.detectors")? {
        Some(d) => RadonGeometry::with_detectors(geometry.angles_deg().to_vec(), n, d),
        None => Ok(geometry),
    }
}

fn random_mask(n_rows: usize, n_cols: usize, keep: f64, seed: u64) -> Result<ImageGrid> {
    if !(0.0..=1.0).contains(&keep) {
        return Err(Error::Config(format!("mask.keep must lie in [0, 1], got {keep}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ImageGrid::from_fn(n_rows, n_cols, |_, _| if rng.gen_bool(keep) { 1.0 } else { 0.0 }))
}

fn operator_for(c: &ConfigMap, shape: (usize, usize)) -> Result<LinearOperator> {
    match c.require_str("operator.kind")? {
        "identity" => Ok(LinearOperator::identity(shape.0, shape.1)),
        "radon" => {
            if shape.0 != shape.1 {
                return Err(Error::invalid("the radon operator needs a square image"));
            }
            Ok(LinearOperator::radon(radon_geometry(c, shape.0)?))
        }
        "blur" => {
            let size: usize = c.require("blur.size")?;
            let kernel = match c.require_str("blur.kernel")? {
                "uniform" => ConvKernel::uniform(size)?,
                "gaussian" => ConvKernel::gaussian(size, c.require("blur.sigma")?)?,
                other => return Err(Error::Config(format!("unknown blur kernel '{other}'"))),
            };
            LinearOperator::blur(kernel, shape)
        }
        "downsample" => {
            let kernel = ConvKernel::gaussian(c.require("downsample.size")?, c.require("downsample.sigma")?)?;
            LinearOperator::downsample(kernel, c.require("downsample.factor")?, shape)
        }
        "mask" => {
            let mask = random_mask(shape.0, shape.1, c.require("mask.keep")?, c.require("mask.seed")?)?;
            LinearOperator::mask(&mask)
        }
        other => Err(Error::Config(format!("unknown operator kind '{other}'"))),
    }
}

/// Ground truths, operators and measurements for a resolved preset config.
pub fn build_problems(name: PresetName, c: &ConfigMap) -> Result<Vec<Problem>> {
    let multiple = generator_config(c)?.spatial_multiple();
    let truths: Vec<(String, ImageGrid)> = match name {
        PresetName::CtLimitedAngle | PresetName::CtFewView | PresetName::CtSweep | PresetName::Fig8Snapshots => {
            let n: usize = c.require("image.size")?;
            vec![("phantom".into(), generate_phantom(n)?)]
        }
        PresetName::Correlate => return Err(Error::invalid("the correlation study has no fixed problem")),
        _ => input_images(c, multiple)?,
    };
    truths
        .into_iter()
        .map(|(label, truth)| {
            let operator = operator_for(c, truth.shape())?;
            let measurement = operator.apply(&truth)?;
            Ok(Problem {
                name: label,
                truth,
                operator,
                measurement,
            })
        })
        .collect()
}

fn schedule(c: &ConfigMap) -> Result<Schedule> {
    Schedule::new(c.require("schedule.base")?, c.require("schedule.n_c")?, c.require("schedule.n_s")?)
}

fn optimizer(c: &ConfigMap) -> Result<AdamConfig> {
    let adam = AdamConfig {
        learning_rate: c.require("optimizer.lr")?,
        beta1: c.require("optimizer.beta1")?,
        beta2: c.require("optimizer.beta2")?,
        epsilon: c.require("optimizer.eps")?,
    };
    adam.validate()?;
    Ok(adam)
}

/// Steepest descent with step `1 / L`, `L` the power-iteration estimate of `||H^T H||`,
/// unless `baseline.sd_step` is set.
pub fn steepest_descent_baseline(problem: &Problem, c: &ConfigMap) -> Result<ImageGrid> {
    let step = match c.get::<f64>("baseline.sd_step")? {
        Some(s) => s,
        None => 1.0 / normal_operator_norm(&problem.operator, 100, 0)?,
    };
    let mut options = SteepestDescent::new(c.require("baseline.sd_iterations")?, step);
    options.ridge = c.require("baseline.ridge")?;
    steepest_descent(&problem.operator, &problem.measurement, &options)
}

/// Engine configuration for one network method on one problem and seed.
pub fn method_run_config(method: Method, problem: &Problem, c: &ConfigMap, seed: u64) -> Result<RunConfig> {
    let generator = generator_config(c)?;
    let mut config = RunConfig::new(problem.operator.clone(), problem.measurement.clone());
    config.schedule = schedule(c)?;
    config.optimizer = optimizer(c)?;
    config.total_iterations = c.require("run.iterations")?;
    config.log_every = c.require("run.log_every")?;
    config.seed = seed;
    config.ground_truth = Some(problem.truth.clone());
    let channels = generator.input_channels;
    config.generator = generator;
    let (h, w) = problem.truth.shape();
    match method {
        Method::Dip => {}
        Method::Cdip => {
            let reference = steepest_descent_baseline(problem, c)?;
            config.initial_input = Some(LatentInput::from_image(&reference, channels));
        }
        Method::DipRamp => {
            let span = (h + w - 2).max(1) as f64;
            let ramp = ImageGrid::from_fn(h, w, |r, col| (r + col) as f64 / span);
            config.initial_input = Some(LatentInput::from_image(&ramp, channels));
        }
        Method::Sdip => config.steering = SteeringSpec::gradient_descent(),
        Method::SdipGt => config.steering = SteeringSpec::ground_truth(problem.truth.clone()),
        Method::DipGaussian => config.steering = SteeringSpec::random_gaussian(c.require("steering.seed")?),
        Method::SteepestDescent | Method::Bicubic | Method::Nearest => {
            return Err(Error::invalid(format!("{} is not a network method", method.name())))
        }
    }
    Ok(config)
}

fn metrics_row(method: &str, instance: &str, problem: &Problem, x: &ImageGrid) -> Result<SummaryRow> {
    Ok(SummaryRow::new(method, instance)
        .with("snr_db", snr_db(&problem.truth, x)?)
        .with("psnr_db", psnr_db(&problem.truth, x, 1.0)?)
        .with("loss", problem.operator.misfit(&problem.measurement, x)?))
}

fn file_stem(method: &str, instance: &str) -> String {
    format!("{method}__{instance}")
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() || ch == '_' || ch == '-' || ch == '.' { ch } else { '_' })
        .collect()
}

fn write_metadata(path: &Path, resolved: &ConfigMap, config: Option<&RunConfig>, extra: &[(&str, String)]) -> Result<()> {
    let mut text = resolved.to_string();
    if let Some(config) = config {
        for (k, v) in config.describe() {
            text.push_str(&format!("engine.{k} = {v}\n"));
        }
    }
    for (k, v) in extra {
        text.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Maps a signed residual to `[0, 1]` for display, zero at mid-gray.
fn residual_display(r: &ImageGrid) -> ImageGrid {
    let peak = r.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return ImageGrid::filled(r.height(), r.width(), 0.5);
    }
    r.map(|v| 0.5 + 0.5 * v / peak)
}

#[derive(Debug, Clone)]
struct Cell {
    method: Method,
    label: String,
    problem: usize,
    seed: Option<u64>,
    schedule: Option<(f64, f64)>,
}

impl Cell {
    fn instance(&self, problems: &[Problem]) -> String {
        match self.seed {
            Some(s) => format!("{}_s{s}", problems[self.problem].name),
            None => problems[self.problem].name.clone(),
        }
    }
}

fn plan_cells(name: PresetName, c: &ConfigMap, problems: &[Problem]) -> Result<Vec<Cell>> {
    let methods: Vec<Method> = c.require_list("methods")?;
    if methods.is_empty() {
        return Err(Error::Config("no methods listed".into()));
    }
    let seeds: u64 = c.require("run.seeds")?;
    let base_seed: u64 = c.require("run.seed")?;
    let sweep: Vec<(f64, f64)> = if name == PresetName::CtSweep {
        let ncs: Vec<f64> = c.require_list("sweep.n_c")?;
        let nss: Vec<f64> = c.require_list("sweep.n_s")?;
        ncs.iter().flat_map(|&nc| nss.iter().map(move |&ns| (nc, ns))).collect()
    } else {
        Vec::new()
    };
    let mut cells = Vec::new();
    for (p, _) in problems.iter().enumerate() {
        for &method in &methods {
            if !method.is_network() {
                cells.push(Cell {
                    method,
                    label: method.name().into(),
                    problem: p,
                    seed: None,
                    schedule: None,
                });
                continue;
            }
            let variants: Vec<(String, Option<(f64, f64)>)> = if sweep.is_empty() {
                vec![(method.name().into(), None)]
            } else {
                sweep
                    .iter()
                    .map(|&(nc, ns)| (format!("{}_nc{nc}_ns{ns}", method.name()), Some((nc, ns))))
                    .collect()
            };
            for (label, schedule) in variants {
                for s in 0..seeds {
                    cells.push(Cell {
                        method,
                        label: label.clone(),
                        problem: p,
                        seed: Some(base_seed + s),
                        schedule,
                    });
                }
            }
        }
    }
    Ok(cells)
}

fn run_cell(
    cell: &Cell,
    problems: &[Problem],
    c: &ConfigMap,
    snapshots: &SnapshotPolicy,
    out: &Path,
) -> Result<SummaryRow> {
    let problem = &problems[cell.problem];
    let instance = cell.instance(problems);
    let stem = file_stem(&cell.label, &instance);
    let image = match cell.method {
        Method::SteepestDescent => steepest_descent_baseline(problem, c)?,
        Method::Bicubic | Method::Nearest => {
            let factor: usize = c.require("downsample.factor")?;
            let low = problem.measurement.to_image()?;
            let up = if cell.method == Method::Bicubic {
                bicubic_upscale(&low, factor)?
            } else {
                nearest_upscale(&low, factor)?
            };
            up.clamp(0.0, 1.0)
        }
        method => {
            let mut config = method_run_config(method, problem, c, cell.seed.unwrap_or(0))?;
            if let Some((nc, ns)) = cell.schedule {
                config.schedule = Schedule::new(config.schedule.base, nc, ns)?;
            }
            config.snapshots = snapshots.clone();
            write_metadata(&out.join(format!("{stem}.meta.txt")), c, Some(&config), &[])?;
            let record = match run(&config) {
                Ok((_, record)) => record,
                Err(Error::Diverged {
                    iteration,
                    loss,
                    partial,
                }) => {
                    partial.save_csv(out.join(format!("{stem}.csv")))?;
                    return Err(Error::Diverged {
                        iteration,
                        loss,
                        partial,
                    });
                }
                Err(e) => return Err(e),
            };
            record.save_csv(out.join(format!("{stem}.csv")))?;
            save_snapshots(&record, out, &stem)?;
            record.final_image
        }
    };
    save_image(out.join(format!("{stem}.png")), &image)?;
    metrics_row(&cell.label, &instance, problem, &image)
}

fn save_snapshots(record: &RunRecord, out: &Path, stem: &str) -> Result<()> {
    if record.snapshots.is_empty() {
        return Ok(());
    }
    let dir = out.join("snapshots");
    std::fs::create_dir_all(&dir)?;
    for (it, snap) in &record.snapshots {
        save_image(dir.join(format!("{stem}__output_{it}.png")), &snap.output)?;
        if let Some(r) = &snap.residual {
            save_image(dir.join(format!("{stem}__residual_{it}.png")), &residual_display(r))?;
        }
    }
    Ok(())
}

/// Rows and artifact locations of a finished preset.
#[derive(Debug, Clone)]
pub struct PresetReport {
    pub rows: Vec<SummaryRow>,
    pub summary_path: PathBuf,
}

/// Runs every (method, instance) cell of a preset and writes CSVs, images, metadata and
/// `summary.csv` under `out`.
pub fn run_preset(preset: &ExperimentPreset, out: &Path) -> Result<PresetReport> {
    let c = preset.resolve()?;
    std::fs::create_dir_all(out)?;
    write_metadata(
        &out.join("preset.meta.txt"),
        &c,
        None,
        &[("preset.name", preset.name.to_string()), ("preset.scale", format!("{:?}", preset.scale).to_lowercase())],
    )?;
    let rows = if preset.name == PresetName::Correlate {
        run_correlation(&c, out)?
    } else {
        let problems = build_problems(preset.name, &c)?;
        for p in &problems {
            save_image(out.join(format!("truth__{}.png", p.name)), &p.truth)?;
            if let Ok(m) = p.measurement.to_image() {
                save_image(out.join(format!("measurement__{}.png", p.name)), &m.clamp(0.0, 1.0))?;
            }
        }
        let snapshots = match c.get_list::<usize>("snapshot.iterations")? {
            Some(list) if !list.is_empty() => SnapshotPolicy::At(list),
            _ => SnapshotPolicy::None,
        };
        let cells = plan_cells(preset.name, &c, &problems)?;
        let results: Vec<Result<SummaryRow>> = cells
            .par_iter()
            .map(|cell| run_cell(cell, &problems, &c, &snapshots, out))
            .collect();
        results.into_iter().collect::<Result<Vec<_>>>()?
    };
    let summary_path = out.join("summary.csv");
    emit_summary(&rows, &summary_path)?;
    Ok(PresetReport { rows, summary_path })
}

/// Correlation study: trial `t` fits pool image `t mod 9` (identity measurement) and swaps in
/// the other eight. `dip` starts from noise, `cdip` from the target itself.
pub fn run_correlation(c: &ConfigMap, out: &Path) -> Result<Vec<SummaryRow>> {
    let n: usize = c.require("image.size")?;
    let trials: usize = c.require("correlate.trials")?;
    let swaps: Vec<usize> = c.require_list("correlate.swaps")?;
    let methods: Vec<Method> = c.require_list("methods")?;
    let pool = correlation_pool(n)?;
    let base_seed: u64 = c.require("run.seed")?;
    let mut rows = Vec::new();
    let mut samples = csv::Writer::from_path(out.join("correlation.csv"))?;
    samples.write_record(["method", "trial", "iteration", "cosine", "alpha"])?;
    for method in methods {
        if !matches!(method, Method::Dip | Method::Cdip) {
            return Err(Error::Config(format!("correlate supports dip and cdip, not {}", method.name())));
        }
        let per_trial: Vec<Result<crate::engine::CorrelationReport>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let target = &pool[t % pool.len()];
                let others: Vec<ImageGrid> = pool
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != t % pool.len())
                    .map(|(_, img)| img.clone())
                    .collect();
                let problem = Problem {
                    name: format!("pool{}", t % pool.len()),
                    truth: target.clone(),
                    operator: LinearOperator::identity(n, n),
                    measurement: Measurement::from_image(target),
                };
                let config = match method {
                    Method::Cdip => {
                        let mut cfg = method_run_config(Method::Dip, &problem, c, base_seed + t as u64)?;
                        cfg.initial_input = Some(LatentInput::from_image(target, cfg.generator.input_channels));
                        cfg
                    }
                    _ => method_run_config(Method::Dip, &problem, c, base_seed + t as u64)?,
                };
                let mut report = correlation_experiment(&config, &swaps, &rotate(&others, t), 1)?;
                report.samples.iter_mut().for_each(|s| s.trial = t);
                Ok(report)
            })
            .collect();
        let mut report = crate::engine::CorrelationReport::default();
        for r in per_trial {
            report.merge(r?);
        }
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for s in &report.samples {
            samples.write_record([
                method.name().to_string(),
                s.trial.to_string(),
                s.iteration.to_string(),
                fmt(s.cosine),
                fmt(s.alpha),
            ])?;
        }
        for it in report.iterations() {
            let mut row = SummaryRow::new(method.name(), format!("iter{it}"));
            if let Some(cos) = report.mean_cosine_at(it) {
                row = row.with("cosine", cos);
            }
            if let Some(alpha) = report.mean_alpha_at(it) {
                row = row.with("alpha", alpha);
            }
            let skipped = report.samples.iter().filter(|s| s.iteration == it && s.cosine.is_none()).count();
            rows.push(row.with("skipped", skipped as f64));
        }
    }
    samples.flush()?;
    Ok(rows)
}

/// Rotates the swap pool so successive trials start from different images.
fn rotate(images: &[ImageGrid], by: usize) -> Vec<ImageGrid> {
    let k = by % images.len();
    images[k..].iter().chain(&images[..k]).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves_at_both_scales() {
        for name in PresetName::ALL {
            for scale in [Scale::Desk, Scale::Full] {
                let c = ExperimentPreset::new(name, scale).resolve().unwrap();
                for (k, _) in c.iter() {
                    assert!(KNOWN_KEYS.contains(&k), "{name}: undocumented key {k}");
                }
                generator_config(&c).unwrap();
                let methods: Vec<Method> = c.require_list("methods").unwrap();
                assert!(!methods.is_empty());
                if name != PresetName::Correlate {
                    let problems = build_problems(name, &c).unwrap();
                    assert!(!problems.is_empty());
                }
            }
        }
    }

    #[test]
    fn names_roundtrip_and_unknown_keys() {
        for name in PresetName::ALL {
            assert_eq!(name.name().parse::<PresetName>().unwrap(), name);
        }
        assert!("ct".parse::<PresetName>().is_err());
        let bad = ExperimentPreset::new(PresetName::CtSweep, Scale::Desk).with("run.iteratons", 3);
        assert!(bad.resolve().is_err());
    }

    #[test]
    fn desk_ct_problem_is_64_with_120_views() {
        let c = ExperimentPreset::new(PresetName::CtLimitedAngle, Scale::Desk).resolve().unwrap();
        let p = &build_problems(PresetName::CtLimitedAngle, &c).unwrap()[0];
        assert_eq!(p.truth.shape(), (64, 64));
        assert_eq!(p.operator.radon_geometry().unwrap().angles_deg().len(), 120);
    }

    #[test]
    fn sweep_plans_a_two_by_two_grid() {
        let c = ExperimentPreset::new(PresetName::CtSweep, Scale::Desk)
            .with("run.seeds", 1)
            .resolve()
            .unwrap();
        let problems = build_problems(PresetName::CtSweep, &c).unwrap();
        let cells = plan_cells(PresetName::CtSweep, &c, &problems).unwrap();
        assert_eq!(cells.len(), 4);
    }

    #[test]
    fn missing_input_image_is_an_error() {
        let c = ExperimentPreset::new(PresetName::DeblurUniform, Scale::Desk)
            .with("images", "/nonexistent/picture.png")
            .resolve()
            .unwrap();
        assert!(build_problems(PresetName::DeblurUniform, &c).is_err());
    }
}
