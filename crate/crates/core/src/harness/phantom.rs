//! Shepp-Logan-style ellipse phantom with a bright bar in its lower part.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// `(intensity, semi-axis x, semi-axis y, center x, center y, rotation in degrees)`
/// in the unit square `[-1, 1]^2`. Intensities add where ellipses overlap.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// `(x_min, x_max, y_min, y_max, value)`, painted over the ellipses.
const BAR: (f64, f64, f64, f64, f64) = (-0.22, 0.22, -0.5, -0.38, 0.9);

/// Deterministic `n x n` phantom with values in `[0, 1]` and a zero background.
pub fn generate_phantom(n: usize) -> Result<ImageGrid> {
    if n < 16 {
        return Err(Error::invalid(format!("phantom size must be at least 16, got {n}")));
    }
    let nf = n as f64;
    Ok(ImageGrid::from_fn(n, n, |row, col| {
        let x = (2.0 * col as f64 + 1.0) / nf - 1.0;
        let y = 1.0 - (2.0 * row as f64 + 1.0) / nf;
        let (x0, x1, y0, y1, bar) = BAR;
        if (x0..=x1).contains(&x) && (y0..=y1).contains(&y) {
            return bar;
        }
        let mut v = 0.0;
        for &(a, ax, ay, cx, cy, deg) in &ELLIPSES {
            let (s, c) = deg.to_radians().sin_cos();
            let (dx, dy) = (x - cx, y - cy);
            let u = dx * c + dy * s;
            let w = -dx * s + dy * c;
            if (u / ax).powi(2) + (w / ay).powi(2) <= 1.0 {
                v += a;
            }
        }
        // exact zero outside the head; clean up rounding of cancelling intensities
        if v.abs() < 1e-12 {
            0.0
        } else {
            v.clamp(0.0, 1.0)
        }
    }))
}
