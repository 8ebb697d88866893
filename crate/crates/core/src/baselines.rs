//! Non-network comparison methods: steepest descent on the data term and image upscalers.
//!
//! The upscalers treat low-resolution pixel `j` as a sample of high-resolution pixel `j * factor`,
//! the same grid the decimation operator samples on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{norm, ImageGrid};
use crate::operators::{LinearOperator, Measurement};

#[derive(Debug, Clone)]
pub struct SteepestDescent {
    pub iterations: usize,
    pub step: f64,
    /// Starting image; zero when absent.
    pub x0: Option<ImageGrid>,
    /// Weight of an optional `ridge * ||x||^2` term. Off by default.
    pub ridge: f64,
}

impl SteepestDescent {
    pub fn new(iterations: usize, step: f64) -> Self {
        Self {
            iterations,
            step,
            x0: None,
            ridge: 0.0,
        }
    }
}

/// `x <- clamp(x + step * (H^T (y - H x) - ridge * x), 0, 1)`, repeated.
pub fn steepest_descent(op: &LinearOperator, y: &Measurement, options: &SteepestDescent) -> Result<ImageGrid> {
    steepest_descent_traced(op, y, options, |_, _| {})
}

/// [`steepest_descent`] calling `trace(iteration, x)` after every step.
pub fn steepest_descent_traced(
    op: &LinearOperator,
    y: &Measurement,
    options: &SteepestDescent,
    mut trace: impl FnMut(usize, &ImageGrid),
) -> Result<ImageGrid> {
    if !(options.step > 0.0 && options.step.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {}", options.step)));
    }
    if !(options.ridge >= 0.0 && options.ridge.is_finite()) {
        return Err(Error::invalid(format!("ridge weight must be >= 0, got {}", options.ridge)));
    }
    let (h, w) = op.domain_shape();
    let mut x = match &options.x0 {
        Some(x0) if x0.shape() != (h, w) => {
            return Err(Error::shape(
                format!("{h}x{w}"),
                format!("{}x{}", x0.height(), x0.width()),
            ))
        }
        Some(x0) => x0.clone(),
        None => ImageGrid::zeros(h, w),
    };
    for n in 0..options.iterations {
        let (back, _) = op.backprojected_residual(y, &x)?;
        let values: Vec<f64> = x
            .values()
            .iter()
            .zip(back.values())
            .map(|(&xi, &gi)| (xi + options.step * (gi - options.ridge * xi)).clamp(0.0, 1.0))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("steepest descent iterate"));
        }
        x = ImageGrid::new(h, w, values)?;
        trace(n, &x);
    }
    Ok(x)
}

/// Power-iteration estimate of the largest eigenvalue of `H^T H`.
pub fn normal_operator_norm(op: &LinearOperator, iterations: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    let n = op.domain_len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut hv = vec![0.0; op.range_len()];
    let mut next = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let vn = norm(&v);
        if vn == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|e| *e /= vn);
        op.apply_slice(&v, &mut hv);
        op.adjoint_slice(&hv, &mut next);
        // Rayleigh quotient of the unit vector
        estimate = crate::grid::dot(&v, &next);
        std::mem::swap(&mut v, &mut next);
    }
    if !estimate.is_finite() {
        return Err(Error::NonFinite("operator norm estimate"));
    }
    Ok(estimate)
}

fn check_factor(factor: usize) -> Result<()> {
    if ![2, 4, 8].contains(&factor) {
        return Err(Error::invalid(format!("upscale factor must be 2, 4 or 8, got {factor}")));
    }
    Ok(())
}

/// Nearest-neighbour upscaling: output pixel `i` copies the closest sample `round(i / factor)`.
pub fn nearest_upscale(x: &ImageGrid, factor: usize) -> Result<ImageGrid> {
    check_factor(factor)?;
    let (h, w) = x.shape();
    let pick = |i: usize, n: usize| ((i + factor / 2) / factor).min(n - 1);
    Ok(ImageGrid::from_fn(h * factor, w * factor, |r, c| {
        x.get(pick(r, h), pick(c, w))
    }))
}

/// Catmull-Rom cubic weights for taps at offsets -1, 0, 1, 2 and fractional position `t`.
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Taps and weights along one axis, with edge samples repeated past the border.
fn cubic_axis(n_low: usize, factor: usize) -> Vec<([usize; 4], [f64; 4])> {
    (0..n_low * factor)
        .map(|i| {
            let base = i / factor;
            let t = (i % factor) as f64 / factor as f64;
            let clamp = |k: isize| k.clamp(0, n_low as isize - 1) as usize;
            let b = base as isize;
            ([clamp(b - 1), clamp(b), clamp(b + 1), clamp(b + 2)], catmull_rom(t))
        })
        .collect()
}

/// Separable bicubic (Catmull-Rom) upscaling.
pub fn bicubic_upscale(x: &ImageGrid, factor: usize) -> Result<ImageGrid> {
    check_factor(factor)?;
    let (h, w) = x.shape();
    let rows = cubic_axis(h, factor);
    let cols = cubic_axis(w, factor);
    let wide = w * factor;
    // horizontal pass
    let mut tmp = vec![0.0; h * wide];
    for r in 0..h {
        for (c, (taps, wts)) in cols.iter().enumerate() {
            tmp[r * wide + c] = taps.iter().zip(wts).map(|(&k, &wt)| wt * x.get(r, k)).sum();
        }
    }
    let mut out = vec![0.0; h * factor * wide];
    for (r, (taps, wts)) in rows.iter().enumerate() {
        for c in 0..wide {
            out[r * wide + c] = taps.iter().zip(wts).map(|(&k, &wt)| wt * tmp[k * wide + c]).sum();
        }
    }
    ImageGrid::new(h * factor, wide, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::ConvKernel;

    #[test]
    fn identity_single_step_recovers_measurement() {
        let op = LinearOperator::identity(4, 5);
        let truth = ImageGrid::from_fn(4, 5, |r, c| (r * 5 + c) as f64 / 20.0);
        let y = op.apply(&truth).unwrap();
        let x = steepest_descent(&op, &y, &SteepestDescent::new(1, 1.0)).unwrap();
        assert_eq!(x, truth);
    }

    #[test]
    fn zero_iterations_returns_start() {
        let op = LinearOperator::identity(3, 3);
        let y = op.apply(&ImageGrid::filled(3, 3, 0.5)).unwrap();
        let start = ImageGrid::filled(3, 3, 0.2);
        let mut opts = SteepestDescent::new(0, 0.5);
        opts.x0 = Some(start.clone());
        assert_eq!(steepest_descent(&op, &y, &opts).unwrap(), start);
        opts.x0 = None;
        assert_eq!(steepest_descent(&op, &y, &opts).unwrap(), ImageGrid::zeros(3, 3));
    }

    #[test]
    fn invalid_options() {
        let op = LinearOperator::identity(3, 3);
        let y = op.apply(&ImageGrid::zeros(3, 3)).unwrap();
        assert!(steepest_descent(&op, &y, &SteepestDescent::new(1, 0.0)).is_err());
        let mut opts = SteepestDescent::new(1, 1.0);
        opts.ridge = -1.0;
        assert!(steepest_descent(&op, &y, &opts).is_err());
        opts.ridge = 0.0;
        opts.x0 = Some(ImageGrid::zeros(2, 2));
        assert!(steepest_descent(&op, &y, &opts).is_err());
    }

    #[test]
    fn ridge_shrinks_towards_zero() {
        let op = LinearOperator::identity(2, 2);
        let y = op.apply(&ImageGrid::filled(2, 2, 0.8)).unwrap();
        let mut opts = SteepestDescent::new(200, 0.5);
        let plain = steepest_descent(&op, &y, &opts).unwrap();
        opts.ridge = 1.0;
        let ridged = steepest_descent(&op, &y, &opts).unwrap();
        assert!((plain.get(0, 0) - 0.8).abs() < 1e-9);
        // minimizer of (y - x)^2 / 2 + x^2 / 2 is y / 2
        assert!((ridged.get(0, 0) - 0.4).abs() < 1e-9);
    }

    #[test]
    fn power_iteration_on_known_operators() {
        let ident = LinearOperator::identity(6, 6);
        assert!((normal_operator_norm(&ident, 5, 1).unwrap() - 1.0).abs() < 1e-12);
        // a normalized nonnegative blur has spectral norm 1 (the DC gain)
        let blur = LinearOperator::blur(ConvKernel::uniform(3).unwrap(), (8, 8)).unwrap();
        let l = normal_operator_norm(&blur, 200, 2).unwrap();
        assert!(l <= 1.0 + 1e-12 && l > 0.99, "{l}");
    }

    #[test]
    fn upscalers_preserve_constants() {
        let x = ImageGrid::filled(3, 5, 0.37);
        for f in [2, 4, 8] {
            for up in [nearest_upscale(&x, f).unwrap(), bicubic_upscale(&x, f).unwrap()] {
                assert_eq!(up.shape(), (3 * f, 5 * f));
                assert!(up.values().iter().all(|v| (v - 0.37).abs() < 1e-12));
            }
        }
        let one = nearest_upscale(&ImageGrid::filled(1, 1, 0.5), 4).unwrap();
        assert_eq!(one, ImageGrid::filled(4, 4, 0.5));
    }

    #[test]
    fn upscalers_interpolate_samples() {
        let x = ImageGrid::from_fn(4, 4, |r, c| (r * 4 + c) as f64 / 16.0);
        let f = 4;
        let bic = bicubic_upscale(&x, f).unwrap();
        let near = nearest_upscale(&x, f).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert!((bic.get(r * f, c * f) - x.get(r, c)).abs() < 1e-12);
                assert_eq!(near.get(r * f, c * f), x.get(r, c));
            }
        }
        // interior of a linear ramp is reproduced exactly by the cubic
        assert!((bic.get(6, 5) - (1.5 * 4.0 + 1.25) / 16.0).abs() < 1e-12);
        assert_eq!(near.get(6, 5), x.get(2, 1));
    }

    #[test]
    fn unsupported_factor() {
        let x = ImageGrid::zeros(2, 2);
        assert!(bicubic_upscale(&x, 3).is_err());
        assert!(nearest_upscale(&x, 1).is_err());
    }
}
