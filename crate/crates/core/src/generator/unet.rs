//! Encoder-decoder with skip branches.
//!
//! Level `i` of the encoder maps its input to a half-resolution feature map
//! (3x3 stride-2 conv, 3x3 conv) and, when `skip[i] > 0`, also emits a 1x1-conv skip branch at
//! the input resolution. The decoder walks back up: upsample x2, concatenate the skip branch
//! (skip channels first), normalize, 3x3 conv, 1x1 conv. A final 1x1 conv maps to the output
//! channels. Every conv followed by a normalization layer carries no bias.

use super::layers::{
    leaky_relu, leaky_relu_backward, upsample, upsample_backward, Conv, Norm, NormTape, Tensor,
    UpsampleMode,
};
use super::real::Real;
use super::{GeneratorConfig, Normalization, OutputActivation};

/// conv -> optional norm -> leaky ReLU
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    conv: Conv,
    norm: Option<Norm>,
}

struct BlockTape<T> {
    cols: Vec<T>,
    in_shape: (usize, usize, usize),
    norm: Option<NormTape<T>>,
    out: Vec<T>,
}

impl Block {
    fn forward<T: Real>(&self, params: &[T], x: &Tensor<T>) -> (Tensor<T>, BlockTape<T>) {
        let (mut y, cols) = self.conv.forward(params, x);
        let norm = self.norm.as_ref().map(|n| n.forward(params, &mut y));
        leaky_relu(&mut y);
        let tape = BlockTape {
            cols,
            in_shape: (x.c, x.h, x.w),
            norm,
            out: y.data.clone(),
        };
        (y, tape)
    }

    fn backward<T: Real>(
        &self,
        params: &[T],
        tape: &BlockTape<T>,
        mut dy: Tensor<T>,
        grad: &mut [T],
        need_input_grad: bool,
    ) -> Option<Tensor<T>> {
        leaky_relu_backward(&tape.out, &mut dy);
        if let (Some(norm), Some(nt)) = (&self.norm, &tape.norm) {
            norm.backward(params, nt, &mut dy, grad);
        }
        self.conv
            .backward(params, &tape.cols, tape.in_shape, &dy, grad, need_input_grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Level {
    skip: Option<Block>,
    down1: Block,
    down2: Block,
    merge_norm: Option<Norm>,
    up1: Block,
    up2: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct UNetLayout {
    levels: Vec<Level>,
    head: Conv,
    upsample: UpsampleMode,
    activation: OutputActivation,
    param_count: usize,
    /// Which parameter ranges hold conv weights (as `(offset, len, fan_in)`), for initialization.
    weight_ranges: Vec<(usize, usize, usize)>,
    bias_ranges: Vec<(usize, usize, usize)>,
    norm_gammas: Vec<(usize, usize)>,
}

struct Allocator {
    next: usize,
    weights: Vec<(usize, usize, usize)>,
    biases: Vec<(usize, usize, usize)>,
    gammas: Vec<(usize, usize)>,
}

impl Allocator {
    fn conv(&mut self, cin: usize, cout: usize, k: usize, stride: usize, bias: bool) -> Conv {
        let weight = self.next;
        let len = cout * cin * k * k;
        self.next += len;
        self.weights.push((weight, len, cin * k * k));
        let bias = bias.then(|| {
            let b = self.next;
            self.next += cout;
            self.biases.push((b, cout, cin * k * k));
            b
        });
        Conv {
            cin,
            cout,
            k,
            stride,
            weight,
            bias,
        }
    }

    fn norm(&mut self, c: usize) -> Norm {
        let gamma = self.next;
        let beta = gamma + c;
        self.next += 2 * c;
        self.gammas.push((gamma, c));
        Norm { c, gamma, beta }
    }

    fn block(&mut self, cin: usize, cout: usize, k: usize, stride: usize, normalize: bool) -> Block {
        let conv = self.conv(cin, cout, k, stride, !normalize);
        let norm = normalize.then(|| self.norm(cout));
        Block { conv, norm }
    }
}

impl UNetLayout {
    pub fn new(config: &GeneratorConfig) -> Self {
        let normalize = config.normalization == Normalization::PerLayer;
        let mut alloc = Allocator {
            next: 0,
            weights: Vec::new(),
            biases: Vec::new(),
            gammas: Vec::new(),
        };
        let depth = config.depth;
        let mut levels = Vec::with_capacity(depth);
        let mut cin = config.input_channels;
        for i in 0..depth {
            let c = config.channels[i];
            let s = config.skip_channels[i];
            let skip = (s > 0).then(|| alloc.block(cin, s, 1, 1, normalize));
            let down1 = alloc.block(cin, c, 3, 2, normalize);
            let down2 = alloc.block(c, c, 3, 1, normalize);
            // decoder input at this level comes from the level below (or the bottleneck)
            let c_up = config.channels[(i + 1).min(depth - 1)];
            let merged = c_up + s;
            let merge_norm = normalize.then(|| alloc.norm(merged));
            let up1 = alloc.block(merged, c, 3, 1, normalize);
            let up2 = alloc.block(c, c, 1, 1, normalize);
            levels.push(Level {
                skip,
                down1,
                down2,
                merge_norm,
                up1,
                up2,
            });
            cin = c;
        }
        let head = alloc.conv(config.channels[0], config.output_channels, 1, 1, true);
        Self {
            levels,
            head,
            upsample: config.upsample,
            activation: config.output_activation,
            param_count: alloc.next,
            weight_ranges: alloc.weights,
            bias_ranges: alloc.biases,
            norm_gammas: alloc.gammas,
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn weight_ranges(&self) -> &[(usize, usize, usize)] {
        &self.weight_ranges
    }

    pub fn bias_ranges(&self) -> &[(usize, usize, usize)] {
        &self.bias_ranges
    }

    pub fn norm_gammas(&self) -> &[(usize, usize)] {
        &self.norm_gammas
    }
}

struct LevelTape<T> {
    skip: Option<BlockTape<T>>,
    down1: BlockTape<T>,
    down2: BlockTape<T>,
    skip_channels: usize,
    merge_norm: Option<NormTape<T>>,
    up1: BlockTape<T>,
    up2: BlockTape<T>,
}

pub(crate) struct Tape<T> {
    levels: Vec<LevelTape<T>>,
    head_cols: Vec<T>,
    head_in: (usize, usize, usize),
    output: Tensor<T>,
}

impl<T: Real> Tape<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }
}

fn concat<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!((a.h, a.w), (b.h, b.w));
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor::new(a.c + b.c, a.h, a.w, data)
}

fn split<T: Real>(x: Tensor<T>, first: usize) -> (Tensor<T>, Tensor<T>) {
    let p = x.plane();
    let (h, w, c) = (x.h, x.w, x.c);
    let mut data = x.data;
    let rest = data.split_off(first * p);
    (Tensor::new(first, h, w, data), Tensor::new(c - first, h, w, rest))
}

fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl UNetLayout {
    pub fn forward<T: Real>(&self, params: &[T], z: Tensor<T>) -> Tape<T> {
        let mut x = z;
        let mut skips = Vec::with_capacity(self.levels.len());
        let mut enc = Vec::with_capacity(self.levels.len());
        for level in &self.levels {
            let skip = level.skip.as_ref().map(|b| b.forward(params, &x));
            let (h1, t1) = level.down1.forward(params, &x);
            let (h2, t2) = level.down2.forward(params, &h1);
            skips.push(skip);
            enc.push((t1, t2));
            x = h2;
        }
        let mut level_tapes: Vec<Option<LevelTape<T>>> = (0..self.levels.len()).map(|_| None).collect();
        for (i, level) in self.levels.iter().enumerate().rev() {
            let up = upsample(&x, self.upsample);
            let (skip_out, skip_tape) = match skips[i].take() {
                Some((s, t)) => (Some(s), Some(t)),
                None => (None, None),
            };
            let skip_channels = skip_out.as_ref().map_or(0, |s| s.c);
            let mut merged = match &skip_out {
                Some(s) => concat(s, &up),
                None => up,
            };
            let merge_tape = level.merge_norm.as_ref().map(|n| n.forward(params, &mut merged));
            let (u1, ut1) = level.up1.forward(params, &merged);
            let (u2, ut2) = level.up2.forward(params, &u1);
            let (t1, t2) = enc.pop().expect("one encoder tape per level");
            level_tapes[i] = Some(LevelTape {
                skip: skip_tape,
                down1: t1,
                down2: t2,
                skip_channels,
                merge_norm: merge_tape,
                up1: ut1,
                up2: ut2,
            });
            x = u2;
        }
        let head_in = (x.c, x.h, x.w);
        let (mut out, head_cols) = self.head.forward(params, &x);
        if self.activation == OutputActivation::Sigmoid {
            out.data.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
        Tape {
            levels: level_tapes.into_iter().map(|t| t.expect("filled")).collect(),
            head_cols,
            head_in,
            output: out,
        }
    }

    /// Gradient of the loss w.r.t. all parameters given `d_output = dL/d(network output)`.
    pub fn backward<T: Real>(&self, params: &[T], tape: &Tape<T>, d_output: Vec<T>) -> Vec<T> {
        let mut grad = vec![T::zero(); self.param_count];
        let out = &tape.output;
        let mut d = Tensor::new(out.c, out.h, out.w, d_output);
        if self.activation == OutputActivation::Sigmoid {
            for (g, &s) in d.data.iter_mut().zip(&out.data) {
                *g = *g * s * (T::one() - s);
            }
        }
        let mut dx = self
            .head
            .backward(params, &tape.head_cols, tape.head_in, &d, &mut grad, true)
            .expect("input grad requested");

        let mut d_skips: Vec<Option<Tensor<T>>> = (0..self.levels.len()).map(|_| None).collect();
        // decoder, top level first
        for (i, (level, lt)) in self.levels.iter().zip(&tape.levels).enumerate() {
            let du1 = level.up2.backward(params, &lt.up2, dx, &mut grad, true).expect("grad");
            let mut dmerged = level.up1.backward(params, &lt.up1, du1, &mut grad, true).expect("grad");
            if let (Some(n), Some(nt)) = (&level.merge_norm, &lt.merge_norm) {
                n.backward(params, nt, &mut dmerged, &mut grad);
            }
            let dup = if lt.skip_channels > 0 {
                let (ds, du) = split(dmerged, lt.skip_channels);
                d_skips[i] = Some(ds);
                du
            } else {
                dmerged
            };
            dx = upsample_backward(&dup, self.upsample);
        }
        // encoder, deepest level first; dx now holds the bottleneck gradient
        for (i, (level, lt)) in self.levels.iter().zip(&tape.levels).enumerate().rev() {
            let need_input = i > 0;
            let dh1 = level.down2.backward(params, &lt.down2, dx, &mut grad, true).expect("grad");
            let din = level.down1.backward(params, &lt.down1, dh1, &mut grad, need_input);
            let dskip_in = match (&level.skip, &lt.skip, d_skips[i].take()) {
                (Some(b), Some(t), Some(ds)) => b.backward(params, t, ds, &mut grad, need_input),
                _ => None,
            };
            if !need_input {
                break;
            }
            let mut din = din.expect("input grad requested");
            if let Some(extra) = dskip_in {
                din.data.iter_mut().zip(&extra.data).for_each(|(a, &b)| *a += b);
            }
            dx = din;
        }
        grad
    }
}
