//! Layers with hand-written forward and backward passes.
//!
//! Every layer caches what its backward pass needs during `forward`;
//! calling `backward` without a preceding `forward` is a state error.
//! Parameter gradients accumulate until [`Module::zero_grad`].

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::gemm::{gemm, Mat};
use super::tensor::Tensor;
use crate::error::{invalid, Error, Result};

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros_like(&value);
        Self { value, grad }
    }
}

/// Which kind of layer owns a parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv3x3,
    Conv2x2s2,
    TConv2x2s2,
    BatchNorm,
    Conv1x1,
}

pub trait Module {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor>;

    /// Returns the gradient with respect to the last forward input and
    /// accumulates parameter gradients.
    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor>;

    /// Trainable parameters in a fixed order, with stable names.
    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        Vec::new()
    }

    /// Non-trainable state that must be checkpointed (batchnorm running stats).
    fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        Vec::new()
    }

    fn set_training(&mut self, _training: bool) {}

    fn zero_grad(&mut self) {
        for (_, p) in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    fn param_count(&mut self) -> usize {
        self.params_mut().iter().map(|(_, p)| p.value.len()).sum()
    }
}

pub(crate) fn prefixed<'a, T>(
    prefix: &str,
    items: Vec<(String, &'a mut T)>,
) -> impl Iterator<Item = (String, &'a mut T)> + 'a {
    let prefix = prefix.to_string();
    items.into_iter().map(move |(n, p)| (format!("{prefix}.{n}"), p))
}

fn missing_cache(layer: &str) -> Error {
    Error::State(format!("{layer}: backward called before forward"))
}

fn check_grad_shape(layer: &str, grad: &Tensor, expected: [usize; 4]) -> Result<()> {
    if grad.shape() != expected {
        return invalid(format!(
            "{layer}: gradient shape {:?} does not match output shape {expected:?}",
            grad.shape()
        ));
    }
    Ok(())
}

fn normal_tensor(shape: [usize; 4], std: f64, rng: &mut impl Rng) -> Tensor {
    let dist = Normal::new(0.0, std).expect("std is positive");
    let data = (0..shape.iter().product::<usize>()).map(|_| dist.sample(rng)).collect();
    Tensor::from_vec(shape, data).expect("shape is non-empty")
}

/// 2-D cross-correlation with square kernels, via im2col.
#[derive(Debug, Clone)]
pub struct Conv2d {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    pub weight: Param,
    pub bias: Param,
    cache: Option<ConvCache>,
}

#[derive(Debug, Clone)]
struct ConvCache {
    input_shape: [usize; 4],
    out_hw: (usize, usize),
    cols: Vec<Vec<f64>>,
}

impl Conv2d {
    /// Zero-initialized layer; weight shape `(out, in, k, k)`.
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
            return invalid("conv channels, kernel and stride must be >= 1");
        }
        if padding > 1 {
            return invalid(format!("conv padding must be 0 or 1, got {padding}"));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: Param::new(Tensor::zeros([out_channels, in_channels, kernel, kernel])),
            bias: Param::new(Tensor::zeros([1, out_channels, 1, 1])),
            cache: None,
        })
    }

    /// Fan-in scaled normal weights (`gain^2 / fan_in` variance), zero bias.
    pub fn init(mut self, gain: f64, rng: &mut impl Rng) -> Self {
        let fan_in = self.in_channels * self.kernel * self.kernel;
        let std = gain / (fan_in as f64).sqrt();
        self.weight = Param::new(normal_tensor(self.weight.value.shape(), std, rng));
        self
    }

    pub fn kind(&self) -> LayerKind {
        match (self.kernel, self.stride) {
            (1, _) => LayerKind::Conv1x1,
            (2, 2) => LayerKind::Conv2x2s2,
            _ => LayerKind::Conv3x3,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    fn out_dim(&self, size: usize) -> Result<usize> {
        let padded = size + 2 * self.padding;
        if padded < self.kernel || (padded - self.kernel) % self.stride != 0 {
            return invalid(format!(
                "conv k={} s={} p={} does not tile input size {size}",
                self.kernel, self.stride, self.padding
            ));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    fn im2col(&self, x: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
        let (k, s, p) = (self.kernel, self.stride, self.padding as isize);
        let mut cols = vec![0.0; self.in_channels * k * k * oh * ow];
        for c in 0..self.in_channels {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = ((c * k + ki) * k + kj) * oh * ow;
                    for oi in 0..oh {
                        let ii = (oi * s + ki) as isize - p;
                        if ii < 0 || ii >= h as isize {
                            continue;
                        }
                        let src = &plane[ii as usize * w..(ii as usize + 1) * w];
                        let dst = &mut cols[row + oi * ow..row + (oi + 1) * ow];
                        for (oj, d) in dst.iter_mut().enumerate() {
                            let jj = (oj * s + kj) as isize - p;
                            if jj >= 0 && jj < w as isize {
                                *d = src[jj as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], dx: &mut [f64], h: usize, w: usize, oh: usize, ow: usize) {
        let (k, s, p) = (self.kernel, self.stride, self.padding as isize);
        for c in 0..self.in_channels {
            let plane = &mut dx[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = ((c * k + ki) * k + kj) * oh * ow;
                    for oi in 0..oh {
                        let ii = (oi * s + ki) as isize - p;
                        if ii < 0 || ii >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[ii as usize * w..(ii as usize + 1) * w];
                        let src = &cols[row + oi * ow..row + (oi + 1) * ow];
                        for (oj, v) in src.iter().enumerate() {
                            let jj = (oj * s + kj) as isize - p;
                            if jj >= 0 && jj < w as isize {
                                dst[jj as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

impl Module for Conv2d {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let [n, c, h, w] = input.shape();
        if c != self.in_channels {
            return invalid(format!("conv expects {} input channels, got {c}", self.in_channels));
        }
        let (oh, ow) = (self.out_dim(h)?, self.out_dim(w)?);
        let ckk = self.in_channels * self.kernel * self.kernel;
        let mut out = Tensor::zeros([n, self.out_channels, oh, ow]);
        let mut cache = Vec::with_capacity(n);
        for s in 0..n {
            let cols = self.im2col(input.sample(s), h, w, oh, ow);
            let y = out.sample_mut(s);
            for (o, plane) in y.chunks_mut(oh * ow).enumerate() {
                plane.fill(self.bias.value.data()[o]);
            }
            gemm(
                1.0,
                Mat::row_major(self.weight.value.data(), self.out_channels, ckk),
                Mat::row_major(&cols, ckk, oh * ow),
                1.0,
                y,
            );
            cache.push(cols);
        }
        self.cache = Some(ConvCache { input_shape: input.shape(), out_hw: (oh, ow), cols: cache });
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.take().ok_or_else(|| missing_cache("conv2d"))?;
        let [n, _, h, w] = cache.input_shape;
        let (oh, ow) = cache.out_hw;
        check_grad_shape("conv2d", grad_output, [n, self.out_channels, oh, ow])?;
        let ckk = self.in_channels * self.kernel * self.kernel;
        let mut dx = Tensor::zeros(cache.input_shape);
        let mut dcols = vec![0.0; ckk * oh * ow];
        for (s, cols) in cache.cols.iter().enumerate() {
            let dy = grad_output.sample(s);
            gemm(
                1.0,
                Mat::row_major(dy, self.out_channels, oh * ow),
                Mat::row_major(cols, ckk, oh * ow).t(),
                1.0,
                self.weight.grad.data_mut(),
            );
            for (o, plane) in dy.chunks(oh * ow).enumerate() {
                self.bias.grad.data_mut()[o] += plane.iter().sum::<f64>();
            }
            gemm(
                1.0,
                Mat::row_major(self.weight.value.data(), self.out_channels, ckk).t(),
                Mat::row_major(dy, self.out_channels, oh * ow),
                0.0,
                &mut dcols,
            );
            self.col2im(&dcols, dx.sample_mut(s), h, w, oh, ow);
        }
        self.cache = Some(cache);
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        vec![("weight".into(), &mut self.weight), ("bias".into(), &mut self.bias)]
    }
}

/// Transposed convolution with a 2x2 kernel and stride 2 (exact x2 upsampling).
///
/// Weight shape is `(in, out, 2, 2)`, so with shared weights this is the
/// adjoint of a bias-free [`Conv2d`] mapping `out -> in` with kernel 2, stride 2.
#[derive(Debug, Clone)]
pub struct TConv2 {
    in_channels: usize,
    out_channels: usize,
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl TConv2 {
    pub fn new(in_channels: usize, out_channels: usize) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return invalid("transposed conv channels must be >= 1");
        }
        Ok(Self {
            in_channels,
            out_channels,
            weight: Param::new(Tensor::zeros([in_channels, out_channels, 2, 2])),
            bias: Param::new(Tensor::zeros([1, out_channels, 1, 1])),
            input: None,
        })
    }

    /// Each output pixel sees `in_channels` taps; variance `gain^2 / in`.
    pub fn init(mut self, gain: f64, rng: &mut impl Rng) -> Self {
        let std = gain / (self.in_channels as f64).sqrt();
        self.weight = Param::new(normal_tensor(self.weight.value.shape(), std, rng));
        self
    }

    pub fn kind(&self) -> LayerKind {
        LayerKind::TConv2x2s2
    }
}

impl Module for TConv2 {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let [n, c, h, w] = input.shape();
        if c != self.in_channels {
            return invalid(format!("tconv expects {} input channels, got {c}", self.in_channels));
        }
        let co4 = self.out_channels * 4;
        let mut out = Tensor::zeros([n, self.out_channels, 2 * h, 2 * w]);
        let mut taps = vec![0.0; co4 * h * w];
        for s in 0..n {
            gemm(
                1.0,
                Mat::row_major(self.weight.value.data(), c, co4).t(),
                Mat::row_major(input.sample(s), c, h * w),
                0.0,
                &mut taps,
            );
            let y = out.sample_mut(s);
            for o in 0..self.out_channels {
                let b = self.bias.value.data()[o];
                for a in 0..2 {
                    for bb in 0..2 {
                        let tap = &taps[(o * 4 + a * 2 + bb) * h * w..][..h * w];
                        for i in 0..h {
                            let row = &mut y[(o * 2 * h + 2 * i + a) * 2 * w..][..2 * w];
                            for j in 0..w {
                                row[2 * j + bb] = tap[i * w + j] + b;
                            }
                        }
                    }
                }
            }
        }
        self.input = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = self.input.take().ok_or_else(|| missing_cache("tconv2"))?;
        let [n, c, h, w] = input.shape();
        check_grad_shape("tconv2", grad_output, [n, self.out_channels, 2 * h, 2 * w])?;
        let co4 = self.out_channels * 4;
        let mut dx = Tensor::zeros(input.shape());
        let mut dtaps = vec![0.0; co4 * h * w];
        for s in 0..n {
            let dy = grad_output.sample(s);
            for o in 0..self.out_channels {
                let mut bsum = 0.0;
                for a in 0..2 {
                    for bb in 0..2 {
                        let tap = &mut dtaps[(o * 4 + a * 2 + bb) * h * w..][..h * w];
                        for i in 0..h {
                            let row = &dy[(o * 2 * h + 2 * i + a) * 2 * w..][..2 * w];
                            for j in 0..w {
                                tap[i * w + j] = row[2 * j + bb];
                                bsum += row[2 * j + bb];
                            }
                        }
                    }
                }
                self.bias.grad.data_mut()[o] += bsum;
            }
            let x = input.sample(s);
            gemm(
                1.0,
                Mat::row_major(x, c, h * w),
                Mat::row_major(&dtaps, co4, h * w).t(),
                1.0,
                self.weight.grad.data_mut(),
            );
            gemm(
                1.0,
                Mat::row_major(self.weight.value.data(), c, co4),
                Mat::row_major(&dtaps, co4, h * w),
                0.0,
                dx.sample_mut(s),
            );
        }
        self.input = Some(input);
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        vec![("weight".into(), &mut self.weight), ("bias".into(), &mut self.bias)]
    }
}

/// Per-channel batch normalization with running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    channels: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub eps: f64,
    pub momentum: f64,
    training: bool,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

impl BatchNorm2d {
    /// `gamma = 1`, `beta = 0`, running mean 0 and variance 1, training mode.
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::new(Tensor::filled([1, channels, 1, 1], 1.0)),
            beta: Param::new(Tensor::zeros([1, channels, 1, 1])),
            running_mean: Tensor::zeros([1, channels, 1, 1]),
            running_var: Tensor::filled([1, channels, 1, 1], 1.0),
            eps: 1e-5,
            momentum: 0.1,
            training: true,
            cache: None,
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }
}

impl Module for BatchNorm2d {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let [n, c, h, w] = input.shape();
        if c != self.channels {
            return invalid(format!("batchnorm expects {} channels, got {c}", self.channels));
        }
        let m = n * h * w;
        if self.training && m < 2 {
            return Err(Error::DegenerateInput(
                "batchnorm in training mode needs more than one value per channel".into(),
            ));
        }
        let hw = h * w;
        let mut xhat = Tensor::zeros(input.shape());
        let mut out = Tensor::zeros(input.shape());
        let mut inv_stds = Vec::with_capacity(c);
        for ch in 0..c {
            let (mean, var) = if self.training {
                let mut sum = 0.0;
                for s in 0..n {
                    sum += input.sample(s)[ch * hw..(ch + 1) * hw].iter().sum::<f64>();
                }
                let mean = sum / m as f64;
                let mut sq = 0.0;
                for s in 0..n {
                    sq += input.sample(s)[ch * hw..(ch + 1) * hw]
                        .iter()
                        .map(|v| (v - mean) * (v - mean))
                        .sum::<f64>();
                }
                let var = sq / m as f64;
                let unbiased = sq / (m - 1) as f64;
                let rm = &mut self.running_mean.data_mut()[ch];
                *rm = (1.0 - self.momentum) * *rm + self.momentum * mean;
                let rv = &mut self.running_var.data_mut()[ch];
                *rv = (1.0 - self.momentum) * *rv + self.momentum * unbiased;
                (mean, var)
            } else {
                (self.running_mean.data()[ch], self.running_var.data()[ch])
            };
            let inv_std = 1.0 / (var + self.eps).sqrt();
            let (g, b) = (self.gamma.value.data()[ch], self.beta.value.data()[ch]);
            for s in 0..n {
                let base = s * c * hw + ch * hw;
                for i in base..base + hw {
                    let xh = (input.data()[i] - mean) * inv_std;
                    xhat.data_mut()[i] = xh;
                    out.data_mut()[i] = g * xh + b;
                }
            }
            inv_stds.push(inv_std);
        }
        self.cache = Some(BnCache { xhat, inv_std: inv_stds, batch_stats: self.training });
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.take().ok_or_else(|| missing_cache("batchnorm"))?;
        let [n, c, h, w] = cache.xhat.shape();
        check_grad_shape("batchnorm", grad_output, [n, c, h, w])?;
        let hw = h * w;
        let m = (n * hw) as f64;
        let mut dx = Tensor::zeros(cache.xhat.shape());
        for ch in 0..c {
            let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
            for s in 0..n {
                let base = s * c * hw + ch * hw;
                for i in base..base + hw {
                    let dy = grad_output.data()[i];
                    sum_dy += dy;
                    sum_dy_xhat += dy * cache.xhat.data()[i];
                }
            }
            self.gamma.grad.data_mut()[ch] += sum_dy_xhat;
            self.beta.grad.data_mut()[ch] += sum_dy;
            let scale = self.gamma.value.data()[ch] * cache.inv_std[ch];
            for s in 0..n {
                let base = s * c * hw + ch * hw;
                for i in base..base + hw {
                    let dy = grad_output.data()[i];
                    dx.data_mut()[i] = if cache.batch_stats {
                        scale * (dy - sum_dy / m - cache.xhat.data()[i] * sum_dy_xhat / m)
                    } else {
                        scale * dy
                    };
                }
            }
        }
        self.cache = Some(cache);
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        vec![("gamma".into(), &mut self.gamma), ("beta".into(), &mut self.beta)]
    }

    fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("running_mean".into(), &mut self.running_mean),
            ("running_var".into(), &mut self.running_var),
        ]
    }

    fn set_training(&mut self, training: bool) {
        self.training = training;
    }
}

/// `max(0, x)`; the subgradient at exactly 0 is 0.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    positive: Option<(Vec<bool>, [usize; 4])>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Module for Relu {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let mask: Vec<bool> = input.data().iter().map(|&v| v > 0.0).collect();
        let data = input.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        self.positive = Some((mask, input.shape()));
        Tensor::from_vec(input.shape(), data)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (mask, shape) = self.positive.as_ref().ok_or_else(|| missing_cache("relu"))?;
        check_grad_shape("relu", grad_output, *shape)?;
        let data = grad_output
            .data()
            .iter()
            .zip(mask)
            .map(|(&g, &pos)| if pos { g } else { 0.0 })
            .collect();
        Tensor::from_vec(*shape, data)
    }
}

/// 2x2 max pooling, stride 2. Ties route to the first element in row-major order.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    argmax: Option<(Vec<usize>, [usize; 4])>,
}

impl MaxPool2 {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Module for MaxPool2 {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let [n, c, h, w] = input.shape();
        if h % 2 != 0 || w % 2 != 0 {
            return invalid(format!("maxpool needs even spatial dims, got {h}x{w}"));
        }
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros([n, c, oh, ow]);
        let mut argmax = Vec::with_capacity(out.len());
        let x = input.data();
        for plane in 0..n * c {
            let base = plane * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let top = base + 2 * i * w + 2 * j;
                    let mut best = top;
                    for idx in [top + 1, top + w, top + w + 1] {
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                    out.data_mut()[(plane * oh + i) * ow + j] = x[best];
                    argmax.push(best);
                }
            }
        }
        self.argmax = Some((argmax, input.shape()));
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (argmax, shape) = self.argmax.as_ref().ok_or_else(|| missing_cache("maxpool2"))?;
        let [n, c, h, w] = *shape;
        check_grad_shape("maxpool2", grad_output, [n, c, h / 2, w / 2])?;
        let mut dx = Tensor::zeros(*shape);
        for (g, &idx) in grad_output.data().iter().zip(argmax) {
            dx.data_mut()[idx] += g;
        }
        Ok(dx)
    }
}

/// Stacks `a` then `b` along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [na, ca, ha, wa] = a.shape();
    let [nb, cb, hb, wb] = b.shape();
    if (na, ha, wa) != (nb, hb, wb) {
        return invalid(format!("cannot concat {:?} with {:?}", a.shape(), b.shape()));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    for s in 0..na {
        data.extend_from_slice(a.sample(s));
        data.extend_from_slice(b.sample(s));
    }
    Tensor::from_vec([na, ca + cb, ha, wa], data)
}

/// Inverse of [`concat_channels`]: the first `first_channels` go left.
pub fn split_channels(t: &Tensor, first_channels: usize) -> Result<(Tensor, Tensor)> {
    let [n, c, h, w] = t.shape();
    if first_channels == 0 || first_channels >= c {
        return invalid(format!("cannot split {c} channels at {first_channels}"));
    }
    let cut = first_channels * h * w;
    let mut a = Vec::with_capacity(n * cut);
    let mut b = Vec::with_capacity(t.len() - n * cut);
    for s in 0..n {
        let sample = t.sample(s);
        a.extend_from_slice(&sample[..cut]);
        b.extend_from_slice(&sample[cut..]);
    }
    Ok((
        Tensor::from_vec([n, first_channels, h, w], a)?,
        Tensor::from_vec([n, c - first_channels, h, w], b)?,
    ))
}

/// Mean squared error and its gradient `2 (pred - target) / count`.
pub fn mse_loss(prediction: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if prediction.shape() != target.shape() {
        return invalid(format!(
            "mse: prediction {:?} vs target {:?}",
            prediction.shape(),
            target.shape()
        ));
    }
    let count = prediction.len() as f64;
    let mut loss = 0.0;
    let grad = prediction
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / count
        })
        .collect();
    Ok((loss / count, Tensor::from_vec(prediction.shape(), grad)?))
}

/// A chain of modules applied in order.
#[derive(Default)]
pub struct Sequential {
    layers: Vec<Box<dyn Module>>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, layer: impl Module + 'static) -> Self {
        self.layers.push(Box::new(layer));
        self
    }
}

impl Module for Sequential {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mut g = grad_output.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            out.extend(prefixed(&i.to_string(), layer.params_mut()));
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            out.extend(prefixed(&i.to_string(), layer.buffers_mut()));
        }
        out
    }

    fn set_training(&mut self, training: bool) {
        for layer in &mut self.layers {
            layer.set_training(training);
        }
    }
}
