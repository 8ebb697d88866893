//! Periodic-boundary blur and blur-then-decimate operators.

use super::kernel::ConvKernel;

/// Direction of a periodic filter pass: convolution for the forward map, correlation for its adjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Pass {
    Convolve,
    Correlate,
}

/// Accumulates the periodic convolution (or correlation) of `input` with `kernel` into `out`.
pub(crate) fn circular_filter(
    input: &[f64],
    height: usize,
    width: usize,
    kernel: &ConvKernel,
    pass: Pass,
    out: &mut [f64],
) {
    debug_assert_eq!(input.len(), height * width);
    debug_assert_eq!(out.len(), height * width);
    out.iter_mut().for_each(|v| *v = 0.0);
    let center_r = (kernel.rows() / 2) as isize;
    let center_c = (kernel.cols() / 2) as isize;
    let sign = match pass {
        Pass::Convolve => 1,
        Pass::Correlate => -1,
    };
    for a in 0..kernel.rows() {
        for b in 0..kernel.cols() {
            let weight = kernel.weight(a, b);
            if weight == 0.0 {
                continue;
            }
            // out[r][c] += w * input[r - dr][c - dc]
            let dr = sign * (a as isize - center_r);
            let dc = sign * (b as isize - center_c);
            let shift = dc.rem_euclid(width as isize) as usize;
            for r in 0..height {
                let src_r = (r as isize - dr).rem_euclid(height as isize) as usize;
                let src = &input[src_r * width..(src_r + 1) * width];
                let dst = &mut out[r * width..(r + 1) * width];
                for (d, s) in dst[shift..].iter_mut().zip(&src[..width - shift]) {
                    *d += weight * s;
                }
                for (d, s) in dst[..shift].iter_mut().zip(&src[width - shift..]) {
                    *d += weight * s;
                }
            }
        }
    }
}

/// Periodic 2-D blur.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularBlur {
    pub(crate) kernel: ConvKernel,
    pub(crate) height: usize,
    pub(crate) width: usize,
}

impl CircularBlur {
    pub fn kernel(&self) -> &ConvKernel {
        &self.kernel
    }

    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        circular_filter(x, self.height, self.width, &self.kernel, Pass::Convolve, out);
    }

    pub(crate) fn adjoint(&self, v: &[f64], out: &mut [f64]) {
        circular_filter(v, self.height, self.width, &self.kernel, Pass::Correlate, out);
    }
}

/// Periodic blur followed by keeping every `factor`-th pixel along both axes, starting at (0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Decimation {
    pub(crate) blur: CircularBlur,
    pub(crate) factor: usize,
}

impl Decimation {
    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn kernel(&self) -> &ConvKernel {
        &self.blur.kernel
    }

    pub(crate) fn range_shape(&self) -> (usize, usize) {
        (self.blur.height / self.factor, self.blur.width / self.factor)
    }

    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (h, w) = (self.blur.height, self.blur.width);
        let mut blurred = vec![0.0; h * w];
        self.blur.apply(x, &mut blurred);
        let (rh, rw) = self.range_shape();
        for r in 0..rh {
            for c in 0..rw {
                out[r * rw + c] = blurred[r * self.factor * w + c * self.factor];
            }
        }
    }

    pub(crate) fn adjoint(&self, v: &[f64], out: &mut [f64]) {
        let (h, w) = (self.blur.height, self.blur.width);
        let mut upsampled = vec![0.0; h * w];
        let (rh, rw) = self.range_shape();
        for r in 0..rh {
            for c in 0..rw {
                upsampled[r * self.factor * w + c * self.factor] = v[r * rw + c];
            }
        }
        self.blur.adjoint(&upsampled, out);
    }
}
