//! Parallel-beam X-ray transform on a square pixel grid.
//!
//! Pixel `(row, col)` has its center at `x = col - (n-1)/2`, `y = (n-1)/2 - row` (unit pixels,
//! y pointing up). For projection angle `theta` the pixel lands on detector coordinate
//! `t = x cos(theta) + y sin(theta)`. Bin `k` is centered at `t = k - (D-1)/2` and receives
//! `tent((t_k - t) / m) / m` with `m = max(|cos|, |sin|)`. That footprint is linear interpolation
//! along the dominant axis, so a view sums one interpolated sample per crossed row (or column)
//! scaled by the ray length through it. With `m = 1` it is the plain two-bin linear split. The
//! adjoint reads the sinogram back with the same weights, so it is the exact transpose of the
//! forward stencil.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RadonGeometry {
    angles_deg: Vec<f64>,
    detector_count: usize,
    grid_size: usize,
}

impl RadonGeometry {
    /// Geometry with the default detector count `ceil(grid_size * sqrt(2))`.
    pub fn new(angles_deg: Vec<f64>, grid_size: usize) -> Result<Self> {
        Self::with_detectors(angles_deg, grid_size, default_detector_count(grid_size))
    }

    pub fn with_detectors(
        angles_deg: Vec<f64>,
        grid_size: usize,
        detector_count: usize,
    ) -> Result<Self> {
        if grid_size == 0 {
            return Err(Error::invalid("radon grid size must be positive"));
        }
        if angles_deg.is_empty() {
            return Err(Error::invalid("radon geometry needs at least one angle"));
        }
        if detector_count < grid_size {
            return Err(Error::invalid(format!(
                "detector count {detector_count} is smaller than grid size {grid_size}"
            )));
        }
        for &a in &angles_deg {
            if !(a.is_finite() && (0.0..360.0).contains(&a)) {
                return Err(Error::invalid(format!("angle {a} outside [0, 360)")));
            }
        }
        if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("angles must be strictly increasing"));
        }
        Ok(Self {
            angles_deg,
            detector_count,
            grid_size,
        })
    }

    /// Views at `start, start + step, ...` strictly below `stop` (degrees).
    pub fn angular_range(start: f64, stop: f64, step: f64, grid_size: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("angle step must be positive, got {step}")));
        }
        let mut angles = Vec::new();
        let mut i = 0usize;
        loop {
            let a = start + i as f64 * step;
            // tolerate accumulated rounding right at the open end
            if a >= stop - 1e-9 {
                break;
            }
            angles.push(a);
            i += 1;
        }
        Self::new(angles, grid_size)
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn detector_count(&self) -> usize {
        self.detector_count
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Sinogram length: one row of `detector_count` bins per angle.
    pub fn sinogram_len(&self) -> usize {
        self.angles_deg.len() * self.detector_count
    }
}

pub fn default_detector_count(grid_size: usize) -> usize {
    (grid_size as f64 * std::f64::consts::SQRT_2).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadonProjector {
    geometry: RadonGeometry,
    directions: Vec<(f64, f64, f64)>,
}

impl RadonProjector {
    pub(crate) fn new(geometry: RadonGeometry) -> Self {
        let directions = geometry
            .angles_deg
            .iter()
            .map(|a| {
                let r = a.to_radians();
                let (sin, cos) = r.sin_cos();
                (cos, sin, cos.abs().max(sin.abs()))
            })
            .collect();
        Self {
            geometry,
            directions,
        }
    }

    pub fn geometry(&self) -> &RadonGeometry {
        &self.geometry
    }

    /// Calls `visit(pixel_index, k, w_k, w_k1)` for every pixel of one view. Bins `k` and `k + 1`
    /// are the only ones the pixel can reach; either may lie outside `0..D` (with `k >= -1`) and
    /// either weight may be zero. Pixels that miss the detector entirely are skipped.
    #[inline]
    fn for_each_pair(&self, (cos, sin, m): (f64, f64, f64), mut visit: impl FnMut(usize, usize, f64, f64)) {
        let n = self.geometry.grid_size;
        let d = self.geometry.detector_count as f64;
        let half_grid = (n as f64 - 1.0) / 2.0;
        let half_det = (d - 1.0) / 2.0;
        let inv_m = 1.0 / m;
        for row in 0..n {
            let y = half_grid - row as f64;
            let base = y * sin + half_det - half_grid * cos;
            for col in 0..n {
                let u = base + col as f64 * cos;
                // smallest bin strictly inside the footprint (u - m, u + m)
                let k = (u - m).floor() + 1.0;
                if k < -1.0 || k > d - 1.0 {
                    continue;
                }
                let w0 = (1.0 - (k - u).abs() * inv_m).max(0.0) * inv_m;
                let w1 = (1.0 - (k + 1.0 - u).abs() * inv_m).max(0.0) * inv_m;
                // shifted by one so that k = -1 maps to slot 0 of a padded buffer
                visit(row * n + col, (k + 1.0) as usize, w0, w1);
            }
        }
    }

    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.geometry.detector_count;
        let mut padded = vec![0.0; d + 2];
        for (view, &dir) in self.directions.iter().enumerate() {
            padded.iter_mut().for_each(|v| *v = 0.0);
            self.for_each_pair(dir, |pixel, slot, w0, w1| {
                let v = x[pixel];
                padded[slot] += w0 * v;
                padded[slot + 1] += w1 * v;
            });
            out[view * d..(view + 1) * d].copy_from_slice(&padded[1..=d]);
        }
    }

    pub(crate) fn adjoint(&self, v: &[f64], out: &mut [f64]) {
        let d = self.geometry.detector_count;
        let mut padded = vec![0.0; d + 2];
        out.iter_mut().for_each(|x| *x = 0.0);
        for (view, &dir) in self.directions.iter().enumerate() {
            padded[1..=d].copy_from_slice(&v[view * d..(view + 1) * d]);
            self.for_each_pair(dir, |pixel, slot, w0, w1| {
                out[pixel] += w0 * padded[slot] + w1 * padded[slot + 1];
            });
        }
    }
}
