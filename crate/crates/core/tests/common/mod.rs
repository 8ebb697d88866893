//! Dense-matrix oracles for the operators, written from their definitions.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use steerdip::operators::{ConvKernel, LinearOperator, RadonGeometry};
use steerdip::ImageGrid;

/// Row-major `rows x cols` matrix.
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            a: vec![0.0; rows * cols],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.cols + j] += v;
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.a[i * self.cols + j] * x[j]).sum())
            .collect()
    }

    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.a[i * self.cols + j] * y[i]).sum())
            .collect()
    }
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_kernel(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ConvKernel {
    let w: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut w: Vec<f64> = w.iter().map(|v| v / s).collect();
    let residue = 1.0 - w.iter().sum::<f64>();
    w[0] += residue;
    ConvKernel::new(rows, cols, w).unwrap()
}

/// `out[r][c] = sum_{a,b} k[a][b] x[(r - a + cr) mod h][(c - b + cc) mod w]`
pub fn blur_matrix(k: &ConvKernel, h: usize, w: usize) -> Dense {
    let mut m = Dense::zeros(h * w, h * w);
    let (cr, cc) = ((k.rows() / 2) as isize, (k.cols() / 2) as isize);
    for r in 0..h {
        for c in 0..w {
            for a in 0..k.rows() {
                for b in 0..k.cols() {
                    let sr = (r as isize - a as isize + cr).rem_euclid(h as isize) as usize;
                    let sc = (c as isize - b as isize + cc).rem_euclid(w as isize) as usize;
                    m.add(r * w + c, sr * w + sc, k.weight(a, b));
                }
            }
        }
    }
    m
}

pub fn downsample_matrix(k: &ConvKernel, f: usize, h: usize, w: usize) -> Dense {
    let blur = blur_matrix(k, h, w);
    let (rh, rw) = (h / f, w / f);
    let mut m = Dense::zeros(rh * rw, h * w);
    for r in 0..rh {
        for c in 0..rw {
            let src = (r * f) * w + c * f;
            for j in 0..h * w {
                m.add(r * rw + c, j, blur.a[src * h * w + j]);
            }
        }
    }
    m
}

/// Pixel-driven projector written out from its definition: pixel (row, col) sits at
/// `x = col - (n-1)/2`, `y = (n-1)/2 - row` and lands on detector coordinate
/// `u = x cos t + y sin t + (D-1)/2`; bin `k` gets `tent((k - u) / m) / m`, `m = max(|cos t|, |sin t|)`.
pub fn radon_matrix(geometry: &RadonGeometry) -> Dense {
    let n = geometry.grid_size();
    let d = geometry.detector_count();
    let angles = geometry.angles_deg();
    let mut m = Dense::zeros(angles.len() * d, n * n);
    for (v, deg) in angles.iter().enumerate() {
        let t = deg.to_radians();
        for row in 0..n {
            for col in 0..n {
                let x = col as f64 - (n as f64 - 1.0) / 2.0;
                let y = (n as f64 - 1.0) / 2.0 - row as f64;
                let u = x * t.cos() + y * t.sin() + (d as f64 - 1.0) / 2.0;
                // linear interpolation along the dominant axis, seen from the detector
                let width = t.cos().abs().max(t.sin().abs());
                for bin in 0..d {
                    let wt = (1.0 - (bin as f64 - u).abs() / width).max(0.0) / width;
                    if wt > 0.0 {
                        m.add(v * d + bin, row * n + col, wt);
                    }
                }
            }
        }
    }
    m
}

pub fn operators_at(n: usize, rng: &mut ChaCha8Rng) -> Vec<(LinearOperator, Option<Dense>)> {
    let mask_img = ImageGrid::from_fn(n, n, |_, _| if rng.gen_bool(0.6) { 1.0 } else { 0.0 });
    let mut mask_dense = Dense::zeros(n * n, n * n);
    for i in 0..n * n {
        mask_dense.add(i, i, mask_img.values()[i]);
    }
    let mut ident = Dense::zeros(n * n, n * n);
    for i in 0..n * n {
        ident.add(i, i, 1.0);
    }
    let kernel = random_kernel(rng, 3, 5);
    let down_kernel = random_kernel(rng, 3, 3);
    let geometry = RadonGeometry::new(vec![0.0, 17.0, 45.0, 90.0, 133.5, 200.0, 271.0, 359.0], n).unwrap();
    vec![
        (LinearOperator::identity(n, n), Some(ident)),
        (LinearOperator::mask(&mask_img).unwrap(), Some(mask_dense)),
        (
            LinearOperator::blur(kernel.clone(), (n, n)).unwrap(),
            Some(blur_matrix(&kernel, n, n)),
        ),
        (
            LinearOperator::downsample(down_kernel.clone(), 2, (n, n)).unwrap(),
            Some(downsample_matrix(&down_kernel, 2, n, n)),
        ),
        (LinearOperator::radon(geometry.clone()), Some(radon_matrix(&geometry))),
    ]
}

