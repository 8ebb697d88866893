//! Layer primitives with hand-written backward passes. Activations are stored channel-major
//! (`[channel][row][col]`) for a single sample.

use super::real::Real;

pub(crate) const LEAKY_SLOPE: f64 = 0.2;
pub(crate) const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tensor<T> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), c * h * w);
        Self { c, h, w, data }
    }

    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self::new(c, h, w, vec![T::zero(); c * h * w])
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }
}

/// Convolution with zero padding `k / 2`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub weight: usize,
    pub bias: Option<usize>,
}

impl Conv {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.k * self.k
    }

    pub fn fan_in(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn pad(&self) -> usize {
        self.k / 2
    }

    fn out_dim(&self, n: usize) -> usize {
        (n + 2 * self.pad() - self.k) / self.stride + 1
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1
    }

    /// Output columns `[lo, hi)` whose input column `ox * stride + kj - pad` lies inside `0..w`.
    fn valid_range(&self, kj: usize, w: usize, ow: usize) -> (usize, usize) {
        let (s, pad) = (self.stride, self.pad());
        let lo = if kj >= pad { 0 } else { (pad - kj).div_ceil(s) };
        let hi = if w + pad <= kj { 0 } else { ((w - 1 + pad - kj) / s + 1).min(ow) };
        (lo, hi.max(lo))
    }

    fn im2col<T: Real>(&self, x: &Tensor<T>, oh: usize, ow: usize) -> Vec<T> {
        let (k, s, pad) = (self.k, self.stride, self.pad() as isize);
        let zero = T::zero();
        // filled strictly in layout order so no separate zeroing pass is needed
        let mut cols = Vec::with_capacity(self.fan_in() * oh * ow);
        for ci in 0..x.c {
            let src = &x.data[ci * x.plane()..(ci + 1) * x.plane()];
            for ki in 0..k {
                for kj in 0..k {
                    let (lo, hi) = self.valid_range(kj, x.w, ow);
                    for oy in 0..oh {
                        let iy = (oy * s) as isize + ki as isize - pad;
                        if iy < 0 || iy >= x.h as isize || lo == hi {
                            cols.resize(cols.len() + ow, zero);
                            continue;
                        }
                        let src_row = &src[iy as usize * x.w..(iy as usize + 1) * x.w];
                        let first = lo * s + kj - pad as usize;
                        cols.resize(cols.len() + lo, zero);
                        if s == 1 {
                            cols.extend_from_slice(&src_row[first..first + (hi - lo)]);
                        } else {
                            cols.extend(src_row[first..].iter().step_by(s).take(hi - lo).copied());
                        }
                        cols.resize(cols.len() + ow - hi, zero);
                    }
                }
            }
        }
        cols
    }

    fn col2im<T: Real>(&self, cols: &[T], c: usize, h: usize, w: usize, oh: usize, ow: usize) -> Tensor<T> {
        let (k, s, pad) = (self.k, self.stride, self.pad() as isize);
        let p = oh * ow;
        let mut out = Tensor::zeros(c, h, w);
        for ci in 0..c {
            let dst = &mut out.data[ci * h * w..(ci + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let src = &cols[row * p..(row + 1) * p];
                    let (lo, hi) = self.valid_range(kj, w, ow);
                    if lo == hi {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * s) as isize + ki as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst_row = &mut dst[iy as usize * w..(iy as usize + 1) * w];
                        let src_row = &src[oy * ow + lo..oy * ow + hi];
                        let first = lo * s + kj - pad as usize;
                        if s == 1 {
                            for (d, &v) in dst_row[first..first + (hi - lo)].iter_mut().zip(src_row) {
                                *d += v;
                            }
                        } else {
                            for (d, &v) in dst_row[first..].iter_mut().step_by(s).zip(src_row) {
                                *d += v;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Returns the output and the column buffer needed by `backward`.
    pub fn forward<T: Real>(&self, params: &[T], x: &Tensor<T>) -> (Tensor<T>, Vec<T>) {
        debug_assert_eq!(x.c, self.cin);
        let (oh, ow) = (self.out_dim(x.h), self.out_dim(x.w));
        let p = oh * ow;
        let cols = if self.is_pointwise() {
            x.data.clone()
        } else {
            self.im2col(x, oh, ow)
        };
        let kk = self.fan_in();
        let w = &params[self.weight..self.weight + self.weight_len()];
        let mut out = vec![T::zero(); self.cout * p];
        T::gemm(self.cout, kk, p, w, kk as isize, 1, &cols, p as isize, 1, T::zero(), &mut out, p as isize, 1);
        if let Some(b) = self.bias {
            for (co, chunk) in out.chunks_mut(p).enumerate() {
                let bias = params[b + co];
                chunk.iter_mut().for_each(|v| *v += bias);
            }
        }
        (Tensor::new(self.cout, oh, ow, out), cols)
    }

    /// Accumulates parameter gradients into `grad`; returns the input gradient when requested.
    pub fn backward<T: Real>(
        &self,
        params: &[T],
        cols: &[T],
        in_shape: (usize, usize, usize),
        dout: &Tensor<T>,
        grad: &mut [T],
        need_input_grad: bool,
    ) -> Option<Tensor<T>> {
        let p = dout.plane();
        let kk = self.fan_in();
        {
            let gw = &mut grad[self.weight..self.weight + self.weight_len()];
            // dW += dout * cols^T
            T::gemm(self.cout, p, kk, &dout.data, p as isize, 1, cols, 1, p as isize, T::one(), gw, kk as isize, 1);
        }
        if let Some(b) = self.bias {
            for (co, chunk) in dout.data.chunks(p).enumerate() {
                grad[b + co] += chunk.iter().copied().sum::<T>();
            }
        }
        if !need_input_grad {
            return None;
        }
        let w = &params[self.weight..self.weight + self.weight_len()];
        let mut dcols = vec![T::zero(); kk * p];
        // dcols = W^T * dout
        T::gemm(kk, self.cout, p, w, 1, kk as isize, &dout.data, p as isize, 1, T::zero(), &mut dcols, p as isize, 1);
        let (c, h, w_) = in_shape;
        if self.is_pointwise() {
            Some(Tensor::new(c, h, w_, dcols))
        } else {
            Some(self.col2im(&dcols, c, h, w_, dout.h, dout.w))
        }
    }
}

/// Per-channel normalization over the spatial plane with a learned scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Norm {
    pub c: usize,
    pub gamma: usize,
    pub beta: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct NormTape<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

impl Norm {
    pub fn forward<T: Real>(&self, params: &[T], x: &mut Tensor<T>) -> NormTape<T> {
        let p = x.plane();
        let n = T::of(p as f64);
        let eps = T::of(NORM_EPS);
        let mut xhat = vec![T::zero(); x.data.len()];
        let mut inv_std = Vec::with_capacity(self.c);
        for ch in 0..self.c {
            let v = &mut x.data[ch * p..(ch + 1) * p];
            let mean = v.iter().copied().sum::<T>() / n;
            let var = v.iter().map(|&a| (a - mean) * (a - mean)).sum::<T>() / n;
            let is = T::one() / (var + eps).sqrt();
            let (g, b) = (params[self.gamma + ch], params[self.beta + ch]);
            for (out, xh) in v.iter_mut().zip(&mut xhat[ch * p..(ch + 1) * p]) {
                *xh = (*out - mean) * is;
                *out = g * *xh + b;
            }
            inv_std.push(is);
        }
        NormTape { xhat, inv_std }
    }

    /// Overwrites `dy` with the input gradient.
    pub fn backward<T: Real>(&self, params: &[T], tape: &NormTape<T>, dy: &mut Tensor<T>, grad: &mut [T]) {
        let p = dy.plane();
        let n = T::of(p as f64);
        for ch in 0..self.c {
            let d = &mut dy.data[ch * p..(ch + 1) * p];
            let xh = &tape.xhat[ch * p..(ch + 1) * p];
            let mut sum_dy = T::zero();
            let mut sum_dy_xh = T::zero();
            for (&a, &b) in d.iter().zip(xh) {
                sum_dy += a;
                sum_dy_xh += a * b;
            }
            grad[self.gamma + ch] += sum_dy_xh;
            grad[self.beta + ch] += sum_dy;
            let g = params[self.gamma + ch];
            let scale = g * tape.inv_std[ch] / n;
            // with dxhat = g * dy: dx = inv_std / n * (n dxhat - sum dxhat - xhat sum(dxhat xhat))
            for (a, &b) in d.iter_mut().zip(xh) {
                *a = scale * (n * *a - sum_dy - b * sum_dy_xh);
            }
        }
    }
}

pub(crate) fn leaky_relu<T: Real>(x: &mut Tensor<T>) {
    let slope = T::of(LEAKY_SLOPE);
    x.data.iter_mut().for_each(|v| {
        if *v < T::zero() {
            *v = *v * slope;
        }
    });
}

/// `out` is the activation output; its sign matches the input's.
pub(crate) fn leaky_relu_backward<T: Real>(out: &[T], dy: &mut Tensor<T>) {
    let slope = T::of(LEAKY_SLOPE);
    for (d, &o) in dy.data.iter_mut().zip(out) {
        if o < T::zero() {
            *d = *d * slope;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpsampleMode {
    Bilinear,
    Nearest,
}

/// Source taps `(i0, i1, w0, w1)` for each output index of a x2 upsampling of length `n`
/// (half-pixel centers, edge-clamped).
fn bilinear_taps(n: usize) -> Vec<(usize, usize, f64, f64)> {
    (0..2 * n)
        .map(|i| {
            let src = ((i as f64 + 0.5) / 2.0 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            let f = src - i0 as f64;
            (i0, i1, 1.0 - f, f)
        })
        .collect()
}

pub(crate) fn upsample<T: Real>(x: &Tensor<T>, mode: UpsampleMode) -> Tensor<T> {
    let (oh, ow) = (2 * x.h, 2 * x.w);
    let mut out = Tensor::zeros(x.c, oh, ow);
    match mode {
        UpsampleMode::Nearest => {
            for ch in 0..x.c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        out.data[(ch * oh + oy) * ow + ox] = x.data[(ch * x.h + oy / 2) * x.w + ox / 2];
                    }
                }
            }
        }
        UpsampleMode::Bilinear => {
            let ty = bilinear_taps(x.h);
            let tx = bilinear_taps(x.w);
            let mut rows = vec![T::zero(); x.h * ow];
            for ch in 0..x.c {
                let src = &x.data[ch * x.plane()..(ch + 1) * x.plane()];
                // horizontal pass into `rows`, then blend pairs of rows
                for (y, row) in rows.chunks_mut(ow).enumerate() {
                    let line = &src[y * x.w..(y + 1) * x.w];
                    for (v, &(x0, x1, wx0, wx1)) in row.iter_mut().zip(&tx) {
                        *v = T::of(wx0) * line[x0] + T::of(wx1) * line[x1];
                    }
                }
                let dst = &mut out.data[ch * oh * ow..(ch + 1) * oh * ow];
                for (drow, &(y0, y1, wy0, wy1)) in dst.chunks_mut(ow).zip(&ty) {
                    let (wy0, wy1) = (T::of(wy0), T::of(wy1));
                    let (r0, r1) = (&rows[y0 * ow..(y0 + 1) * ow], &rows[y1 * ow..(y1 + 1) * ow]);
                    for ((d, &a), &b) in drow.iter_mut().zip(r0).zip(r1) {
                        *d = wy0 * a + wy1 * b;
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn upsample_backward<T: Real>(dy: &Tensor<T>, mode: UpsampleMode) -> Tensor<T> {
    let (h, w) = (dy.h / 2, dy.w / 2);
    let mut dx = Tensor::zeros(dy.c, h, w);
    match mode {
        UpsampleMode::Nearest => {
            for ch in 0..dy.c {
                for oy in 0..dy.h {
                    for ox in 0..dy.w {
                        dx.data[(ch * h + oy / 2) * w + ox / 2] += dy.data[(ch * dy.h + oy) * dy.w + ox];
                    }
                }
            }
        }
        UpsampleMode::Bilinear => {
            let ty = bilinear_taps(h);
            let tx = bilinear_taps(w);
            let ow = dy.w;
            let mut rows = vec![T::zero(); h * ow];
            for ch in 0..dy.c {
                rows.iter_mut().for_each(|v| *v = T::zero());
                let src = &dy.data[ch * dy.h * ow..(ch + 1) * dy.h * ow];
                for (grow, &(y0, y1, wy0, wy1)) in src.chunks(ow).zip(&ty) {
                    let (wy0, wy1) = (T::of(wy0), T::of(wy1));
                    for (v, &g) in rows[y0 * ow..(y0 + 1) * ow].iter_mut().zip(grow) {
                        *v += wy0 * g;
                    }
                    for (v, &g) in rows[y1 * ow..(y1 + 1) * ow].iter_mut().zip(grow) {
                        *v += wy1 * g;
                    }
                }
                let dst = &mut dx.data[ch * h * w..(ch + 1) * h * w];
                for (line, row) in dst.chunks_mut(w).zip(rows.chunks(ow)) {
                    for (&g, &(x0, x1, wx0, wx1)) in row.iter().zip(&tx) {
                        line[x0] += T::of(wx0) * g;
                        line[x1] += T::of(wx1) * g;
                    }
                }
            }
        }
    }
    dx
}
