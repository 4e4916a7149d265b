use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::tensor::gemm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    /// Normalizes over the last (channel) axis.
    Softmax,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "softmax" => Ok(Activation::Softmax),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// Activity penalty `l1 * sum|a| + l2 * sum a^2` on a layer's output,
/// averaged over the samples of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Regularizer {
    pub l1: f64,
    pub l2: f64,
}

impl Regularizer {
    pub const NONE: Regularizer = Regularizer { l1: 0.0, l2: 0.0 };

    pub fn l2(weight: f64) -> Self {
        Regularizer {
            l1: 0.0,
            l2: weight,
        }
    }

    pub fn is_active(&self) -> bool {
        self.l1 != 0.0 || self.l2 != 0.0
    }

    pub(crate) fn penalty(&self, a: &[f64]) -> f64 {
        if !self.is_active() {
            return 0.0;
        }
        a.iter().map(|v| self.l1 * v.abs() + self.l2 * v * v).sum()
    }

    /// Adds `scale * d(penalty)/da` into `grad`.
    pub(crate) fn add_grad(&self, a: &[f64], scale: f64, grad: &mut [f64]) {
        if !self.is_active() {
            return;
        }
        for (g, v) in grad.iter_mut().zip(a) {
            let sign = if *v > 0.0 {
                1.0
            } else if *v < 0.0 {
                -1.0
            } else {
                0.0
            };
            *g += scale * (self.l1 * sign + 2.0 * self.l2 * v);
        }
    }
}

/// One node of the layer chain. Convolutions are 3x3 with zero "same"
/// padding; pooling and upsampling use a factor of 2.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense {
        units: usize,
        activation: Activation,
        reg: Regularizer,
    },
    Conv2d {
        filters: usize,
        activation: Activation,
        reg: Regularizer,
    },
    MaxPool2d,
    Upsample2d,
    /// Appends the channels of an earlier node to the current ones.
    /// Node 0 is the network input; node `k + 1` is the output of layer `k`.
    Concat {
        with: usize,
    },
    Activation {
        activation: Activation,
        reg: Regularizer,
    },
}

pub const KERNEL: usize = 3;
pub const POOL: usize = 2;

impl LayerSpec {
    pub fn dense(units: usize, activation: Activation) -> Self {
        LayerSpec::Dense {
            units,
            activation,
            reg: Regularizer::NONE,
        }
    }

    pub fn conv2d(filters: usize, activation: Activation) -> Self {
        LayerSpec::Conv2d {
            filters,
            activation,
            reg: Regularizer::NONE,
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            LayerSpec::Dense { activation, .. }
            | LayerSpec::Conv2d { activation, .. }
            | LayerSpec::Activation { activation, .. } => *activation,
            _ => Activation::Identity,
        }
    }

    pub fn regularizer(&self) -> Regularizer {
        match self {
            LayerSpec::Dense { reg, .. }
            | LayerSpec::Conv2d { reg, .. }
            | LayerSpec::Activation { reg, .. } => *reg,
            _ => Regularizer::NONE,
        }
    }

    /// Output sample shape given the current node's shape and, for concat,
    /// the shape of the referenced node.
    pub(crate) fn output_shape(
        &self,
        input: &[usize],
        skip: Option<&[usize]>,
    ) -> Result<Vec<usize>> {
        let rank3 = |name: &str| -> Result<(usize, usize, usize)> {
            if input.len() != 3 {
                return Err(Error::Shape(format!(
                    "{name} needs a [height, width, channels] input, got {input:?}"
                )));
            }
            Ok((input[0], input[1], input[2]))
        };
        match self {
            LayerSpec::Dense { units, .. } => {
                if *units == 0 {
                    return Err(Error::Shape("dense layer with zero units".into()));
                }
                let mut out = input.to_vec();
                *out.last_mut().expect("non-empty") = *units;
                Ok(out)
            }
            LayerSpec::Conv2d { filters, .. } => {
                let (h, w, _) = rank3("conv2d")?;
                if *filters == 0 {
                    return Err(Error::Shape("conv2d with zero filters".into()));
                }
                Ok(vec![h, w, *filters])
            }
            LayerSpec::MaxPool2d => {
                let (h, w, c) = rank3("maxpool2d")?;
                if h % POOL != 0 || w % POOL != 0 {
                    return Err(Error::Shape(format!(
                        "maxpool2d needs even spatial dims, got {h}x{w}"
                    )));
                }
                Ok(vec![h / POOL, w / POOL, c])
            }
            LayerSpec::Upsample2d => {
                let (h, w, c) = rank3("upsample2d")?;
                Ok(vec![h * POOL, w * POOL, c])
            }
            LayerSpec::Concat { .. } => {
                let skip = skip.ok_or_else(|| Error::Shape("concat without source".into()))?;
                let r = input.len();
                if skip.len() != r || skip[..r - 1] != input[..r - 1] {
                    return Err(Error::Shape(format!(
                        "concat of {input:?} with {skip:?}: leading dims differ"
                    )));
                }
                let mut out = input.to_vec();
                out[r - 1] += skip[r - 1];
                Ok(out)
            }
            LayerSpec::Activation { .. } => Ok(input.to_vec()),
        }
    }

    /// `(weights, biases)` counts.
    pub(crate) fn param_counts(&self, input: &[usize]) -> (usize, usize) {
        let cin = *input.last().expect("non-empty");
        match self {
            LayerSpec::Dense { units, .. } => (cin * units, *units),
            LayerSpec::Conv2d { filters, .. } => (KERNEL * KERNEL * cin * filters, *filters),
            _ => (0, 0),
        }
    }

    /// Glorot fan-in / fan-out.
    pub(crate) fn fans(&self, input: &[usize]) -> (usize, usize) {
        let cin = *input.last().expect("non-empty");
        match self {
            LayerSpec::Dense { units, .. } => (cin, *units),
            LayerSpec::Conv2d { filters, .. } => (KERNEL * KERNEL * cin, KERNEL * KERNEL * filters),
            _ => (0, 0),
        }
    }
}

// ---------------------------------------------------------------------------
// Activations on row-major `rows x cols` buffers.

pub(crate) fn activate(act: Activation, z: &mut [f64], cols: usize) {
    match act {
        Activation::Identity => {}
        Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::Softmax => {
            for row in z.chunks_exact_mut(cols) {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Turns `dL/da` into `dL/dz` in place, using the activated output `a`.
pub(crate) fn activation_backward(act: Activation, a: &[f64], grad: &mut [f64], cols: usize) {
    match act {
        Activation::Identity => {}
        Activation::Relu => {
            for (g, v) in grad.iter_mut().zip(a) {
                if *v <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        Activation::Sigmoid => {
            for (g, v) in grad.iter_mut().zip(a) {
                *g *= v * (1.0 - v);
            }
        }
        Activation::Softmax => {
            for (grow, arow) in grad.chunks_exact_mut(cols).zip(a.chunks_exact(cols)) {
                let dot: f64 = grow.iter().zip(arow).map(|(g, p)| g * p).sum();
                for (g, p) in grow.iter_mut().zip(arow) {
                    *g = p * (*g - dot);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Kernels. `rows` counts every (sample, pixel) position.

/// `out = x W + b`, `x` is `rows x cin`, `W` is `cin x cout`.
pub(crate) fn dense_forward(
    x: &[f64],
    w: &[f64],
    b: &[f64],
    rows: usize,
    cin: usize,
    out: &mut [f64],
) {
    let cout = b.len();
    for row in out.chunks_exact_mut(cout) {
        row.copy_from_slice(b);
    }
    gemm(rows, cin, cout, x, false, w, false, 1.0, out);
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward(
    x: &[f64],
    w: &[f64],
    dz: &[f64],
    rows: usize,
    cin: usize,
    cout: usize,
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    gemm(cin, rows, cout, x, true, dz, false, 1.0, dw);
    for row in dz.chunks_exact(cout) {
        for (d, g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    if let Some(dx) = dx {
        gemm(rows, cout, cin, dz, false, w, true, 1.0, dx);
    }
}

/// 3x3 patches with zero padding: `[n*h*w, 9*c]`, column `(ky*3 + kx)*c + ch`.
pub(crate) fn im2col(x: &[f64], n: usize, h: usize, w: usize, c: usize) -> Vec<f64> {
    let k = KERNEL * KERNEL * c;
    let mut cols = vec![0.0; n * h * w * k];
    for s in 0..n {
        for i in 0..h {
            for j in 0..w {
                let row = ((s * h + i) * w + j) * k;
                for ky in 0..KERNEL {
                    let ii = i as isize + ky as isize - 1;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let jj = j as isize + kx as isize - 1;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        let src = ((s * h + ii as usize) * w + jj as usize) * c;
                        let dst = row + (ky * KERNEL + kx) * c;
                        cols[dst..dst + c].copy_from_slice(&x[src..src + c]);
                    }
                }
            }
        }
    }
    cols
}

pub(crate) fn col2im(cols: &[f64], n: usize, h: usize, w: usize, c: usize, dx: &mut [f64]) {
    let k = KERNEL * KERNEL * c;
    for s in 0..n {
        for i in 0..h {
            for j in 0..w {
                let row = ((s * h + i) * w + j) * k;
                for ky in 0..KERNEL {
                    let ii = i as isize + ky as isize - 1;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let jj = j as isize + kx as isize - 1;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        let dst = ((s * h + ii as usize) * w + jj as usize) * c;
                        let src = row + (ky * KERNEL + kx) * c;
                        for ch in 0..c {
                            dx[dst + ch] += cols[src + ch];
                        }
                    }
                }
            }
        }
    }
}

/// 2x2 max pooling; returns the flat input index of each selected maximum
/// (first maximum in scan order on ties).
pub(crate) fn maxpool_forward(
    x: &[f64],
    n: usize,
    h: usize,
    w: usize,
    c: usize,
    out: &mut [f64],
) -> Vec<usize> {
    let (oh, ow) = (h / POOL, w / POOL);
    let mut argmax = vec![0; n * oh * ow * c];
    for s in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                for ch in 0..c {
                    let mut best = usize::MAX;
                    let mut best_v = f64::NEG_INFINITY;
                    for di in 0..POOL {
                        for dj in 0..POOL {
                            let idx = ((s * h + i * POOL + di) * w + j * POOL + dj) * c + ch;
                            if best == usize::MAX || x[idx] > best_v {
                                best = idx;
                                best_v = x[idx];
                            }
                        }
                    }
                    let o = ((s * oh + i) * ow + j) * c + ch;
                    out[o] = best_v;
                    argmax[o] = best;
                }
            }
        }
    }
    argmax
}

/// Nearest-neighbour 2x upsampling.
pub(crate) fn upsample_forward(x: &[f64], n: usize, h: usize, w: usize, c: usize, out: &mut [f64]) {
    let (oh, ow) = (h * POOL, w * POOL);
    for s in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                let src = ((s * h + i / POOL) * w + j / POOL) * c;
                let dst = ((s * oh + i) * ow + j) * c;
                out[dst..dst + c].copy_from_slice(&x[src..src + c]);
            }
        }
    }
}

pub(crate) fn upsample_backward(g: &[f64], n: usize, h: usize, w: usize, c: usize, dx: &mut [f64]) {
    let (oh, ow) = (h * POOL, w * POOL);
    for s in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                let dst = ((s * h + i / POOL) * w + j / POOL) * c;
                let src = ((s * oh + i) * ow + j) * c;
                for ch in 0..c {
                    dx[dst + ch] += g[src + ch];
                }
            }
        }
    }
}

/// Row-wise `[a | b]`.
pub(crate) fn concat_forward(a: &[f64], ca: usize, b: &[f64], cb: usize, out: &mut [f64]) {
    let c = ca + cb;
    for ((o, ra), rb) in out
        .chunks_exact_mut(c)
        .zip(a.chunks_exact(ca))
        .zip(b.chunks_exact(cb))
    {
        o[..ca].copy_from_slice(ra);
        o[ca..].copy_from_slice(rb);
    }
}
