//! The asymmetric U-net and the hybrid network around it.
//!
//! Wiring on the half-resolution front-end output, widths at scale 1:
//!
//! ```text
//! E1  (H/2)  conv3x3 in->16, 16->16                      -> skip1, maxpool
//! E2  (H/4)  conv3x3 16->32, 32->32                      -> skip2, maxpool
//! B   (H/8)  conv3x3 32->64, 64->128, 128->256
//! D1  (H/4)  tconv 256->128, concat skip2 (160), conv3x3 160->128, 128->64
//! D2  (H/2)  tconv 64->32, concat skip1 (48), conv3x3 48->32, 32->16
//! D3  (H)    tconv 16->16, conv3x3 16->16, conv1x1 16->1 (linear)
//! ```
//!
//! Every conv3x3 is followed by batchnorm and ReLU.

use std::f64::consts::SQRT_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{
    concat_channels, prefixed, split_channels, BatchNorm2d, Conv2d, MaxPool2, Module, Param, Relu,
    TConv2,
};
use super::tensor::Tensor;
use crate::error::{invalid, Error, Result};
use crate::image::Image2D;
use crate::qsim::CircuitConfig;
use crate::quanv::quanvolve;

/// Main-path channel widths at scale 1.
pub const MAIN_WIDTHS: [usize; 9] = [16, 32, 64, 128, 256, 128, 64, 32, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FrontEndKind {
    /// Fixed quanvolution; contributes no trainable parameters.
    #[default]
    Quantum,
    /// Trainable 2x2 stride-2 convolution (the classical control).
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub front_end: FrontEndKind,
    pub circuit: CircuitConfig,
    /// Multiplies every main-path width (rounded, at least 1).
    pub width_scale: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            front_end: FrontEndKind::Quantum,
            circuit: CircuitConfig::default(),
            width_scale: 1.0,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn width(&self, base: usize) -> usize {
        ((base as f64 * self.width_scale).round() as usize).max(1)
    }

    /// Channels produced by the front end.
    pub fn feature_channels(&self) -> usize {
        self.circuit.readout.channels()
    }
}

/// conv3x3 (pad 1) + batchnorm + ReLU.
pub struct ConvBlock {
    pub conv: Conv2d,
    pub bn: BatchNorm2d,
    relu: Relu,
}

impl ConvBlock {
    pub fn new(in_channels: usize, out_channels: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(in_channels, out_channels, 3, 1, 1)?.init(SQRT_2, rng),
            bn: BatchNorm2d::new(out_channels),
            relu: Relu::new(),
        })
    }
}

impl Module for ConvBlock {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let x = self.conv.forward(input)?;
        let x = self.bn.forward(&x)?;
        self.relu.forward(&x)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let g = self.relu.backward(grad_output)?;
        let g = self.bn.backward(&g)?;
        self.conv.backward(&g)
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        prefixed("conv", self.conv.params_mut()).chain(prefixed("bn", self.bn.params_mut())).collect()
    }

    fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        prefixed("bn", self.bn.buffers_mut()).collect()
    }

    fn set_training(&mut self, training: bool) {
        self.bn.set_training(training);
    }
}

fn run(blocks: &mut [ConvBlock], x: Tensor) -> Result<Tensor> {
    blocks.iter_mut().try_fold(x, |x, b| b.forward(&x))
}

fn run_back(blocks: &mut [ConvBlock], g: Tensor) -> Result<Tensor> {
    blocks.iter_mut().rev().try_fold(g, |g, b| b.backward(&g))
}

fn blocks_params<'a>(name: &str, blocks: &'a mut [ConvBlock]) -> Vec<(String, &'a mut Param)> {
    let mut out = Vec::new();
    for (i, b) in blocks.iter_mut().enumerate() {
        out.extend(prefixed(&format!("{name}.{i}"), b.params_mut()));
    }
    out
}

fn blocks_buffers<'a>(name: &str, blocks: &'a mut [ConvBlock]) -> Vec<(String, &'a mut Tensor)> {
    let mut out = Vec::new();
    for (i, b) in blocks.iter_mut().enumerate() {
        out.extend(prefixed(&format!("{name}.{i}"), b.buffers_mut()));
    }
    out
}

/// The asymmetric U-net: two poolings, three upsamplings.
pub struct UNet {
    e1: Vec<ConvBlock>,
    pool1: MaxPool2,
    e2: Vec<ConvBlock>,
    pool2: MaxPool2,
    bottleneck: Vec<ConvBlock>,
    up1: TConv2,
    d1: Vec<ConvBlock>,
    up2: TConv2,
    d2: Vec<ConvBlock>,
    up3: TConv2,
    d3: Vec<ConvBlock>,
    head: Conv2d,
    split1: usize,
    split2: usize,
    forward_done: bool,
}

impl UNet {
    pub fn new(in_channels: usize, config: &NetworkConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let [c16, c32, c64, c128, c256, ..] = MAIN_WIDTHS.map(|b| config.width(b));
        Ok(Self {
            e1: vec![ConvBlock::new(in_channels, c16, rng)?, ConvBlock::new(c16, c16, rng)?],
            pool1: MaxPool2::new(),
            e2: vec![ConvBlock::new(c16, c32, rng)?, ConvBlock::new(c32, c32, rng)?],
            pool2: MaxPool2::new(),
            bottleneck: vec![
                ConvBlock::new(c32, c64, rng)?,
                ConvBlock::new(c64, c128, rng)?,
                ConvBlock::new(c128, c256, rng)?,
            ],
            up1: TConv2::new(c256, c128)?.init(SQRT_2, rng),
            d1: vec![ConvBlock::new(c128 + c32, c128, rng)?, ConvBlock::new(c128, c64, rng)?],
            up2: TConv2::new(c64, c32)?.init(SQRT_2, rng),
            d2: vec![ConvBlock::new(c32 + c16, c32, rng)?, ConvBlock::new(c32, c16, rng)?],
            up3: TConv2::new(c16, c16)?.init(SQRT_2, rng),
            d3: vec![ConvBlock::new(c16, c16, rng)?],
            head: Conv2d::new(c16, 1, 1, 1, 0)?.init(1.0, rng),
            split1: c128,
            split2: c32,
            forward_done: false,
        })
    }
}

impl Module for UNet {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let [_, _, h, w] = input.shape();
        if h % 4 != 0 || w % 4 != 0 {
            return invalid(format!("U-net input must be a multiple of 4 in H and W, got {h}x{w}"));
        }
        let skip1 = run(&mut self.e1, input.clone())?;
        let x = self.pool1.forward(&skip1)?;
        let skip2 = run(&mut self.e2, x)?;
        let x = self.pool2.forward(&skip2)?;
        let x = run(&mut self.bottleneck, x)?;
        let x = self.up1.forward(&x)?;
        let x = run(&mut self.d1, concat_channels(&x, &skip2)?)?;
        let x = self.up2.forward(&x)?;
        let x = run(&mut self.d2, concat_channels(&x, &skip1)?)?;
        let x = self.up3.forward(&x)?;
        let x = run(&mut self.d3, x)?;
        let out = self.head.forward(&x)?;
        self.forward_done = true;
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        if !self.forward_done {
            return Err(Error::State("network backward called before forward".into()));
        }
        let g = self.head.backward(grad_output)?;
        let g = run_back(&mut self.d3, g)?;
        let g = self.up3.backward(&g)?;
        let g = run_back(&mut self.d2, g)?;
        let (g, g_skip1) = split_channels(&g, self.split2)?;
        let g = self.up2.backward(&g)?;
        let g = run_back(&mut self.d1, g)?;
        let (g, g_skip2) = split_channels(&g, self.split1)?;
        let g = self.up1.backward(&g)?;
        let g = run_back(&mut self.bottleneck, g)?;
        let mut g = self.pool2.backward(&g)?;
        g.add_assign(&g_skip2);
        let g = run_back(&mut self.e2, g)?;
        let mut g = self.pool1.backward(&g)?;
        g.add_assign(&g_skip1);
        run_back(&mut self.e1, g)
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = blocks_params("e1", &mut self.e1);
        out.extend(blocks_params("e2", &mut self.e2));
        out.extend(blocks_params("bottleneck", &mut self.bottleneck));
        out.extend(prefixed("up1", self.up1.params_mut()));
        out.extend(blocks_params("d1", &mut self.d1));
        out.extend(prefixed("up2", self.up2.params_mut()));
        out.extend(blocks_params("d2", &mut self.d2));
        out.extend(prefixed("up3", self.up3.params_mut()));
        out.extend(blocks_params("d3", &mut self.d3));
        out.extend(prefixed("head", self.head.params_mut()));
        out
    }

    fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = blocks_buffers("e1", &mut self.e1);
        out.extend(blocks_buffers("e2", &mut self.e2));
        out.extend(blocks_buffers("bottleneck", &mut self.bottleneck));
        out.extend(blocks_buffers("d1", &mut self.d1));
        out.extend(blocks_buffers("d2", &mut self.d2));
        out.extend(blocks_buffers("d3", &mut self.d3));
        out
    }

    fn set_training(&mut self, training: bool) {
        for b in self
            .e1
            .iter_mut()
            .chain(&mut self.e2)
            .chain(&mut self.bottleneck)
            .chain(&mut self.d1)
            .chain(&mut self.d2)
            .chain(&mut self.d3)
        {
            b.set_training(training);
        }
    }
}

/// Fixed quanvolution of every sample's single channel.
pub fn quantum_features(images: &Tensor, circuit: &CircuitConfig) -> Result<Tensor> {
    let [n, c, h, w] = images.shape();
    if c != 1 {
        return invalid(format!("quantum front end expects 1 input channel, got {c}"));
    }
    let mut maps = Vec::with_capacity(n);
    for s in 0..n {
        let image = Image2D::new(h, w, images.sample(s).to_vec())?;
        let fm = quanvolve(&image, circuit)?;
        maps.push(Tensor::from_vec([1, fm.channels(), fm.height(), fm.width()], fm.into_data())?);
    }
    Tensor::stack(&maps)
}

enum FrontEnd {
    Quantum(CircuitConfig),
    Classical(Conv2d),
}

/// Front end (quantum or classical) followed by the U-net.
pub struct HybridNetwork {
    config: NetworkConfig,
    front: FrontEnd,
    unet: UNet,
    input_shape: Option<[usize; 4]>,
}

/// Builds the network with seeded fan-in initialization.
///
/// The U-net draws from its own stream, so both front ends start from the
/// same U-net weights for equal seeds.
pub fn build_hybrid_network(config: &NetworkConfig) -> Result<HybridNetwork> {
    if !(config.width_scale.is_finite() && config.width_scale > 0.0) {
        return invalid(format!("width scale must be positive, got {}", config.width_scale));
    }
    config.circuit.validate()?;
    let channels = config.feature_channels();
    let front = match config.front_end {
        FrontEndKind::Quantum => FrontEnd::Quantum(config.circuit),
        FrontEndKind::Classical => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_f00d);
            FrontEnd::Classical(Conv2d::new(1, channels, 2, 2, 0)?.init(1.0, &mut rng))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unet = UNet::new(channels, config, &mut rng)?;
    Ok(HybridNetwork { config: *config, front, unet, input_shape: None })
}

impl HybridNetwork {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn unet_mut(&mut self) -> &mut UNet {
        &mut self.unet
    }

    fn check_input(&self, images: &Tensor) -> Result<()> {
        let [_, c, h, w] = images.shape();
        if c != 1 {
            return invalid(format!("network expects 1 input channel, got {c}"));
        }
        if h % 8 != 0 || w % 8 != 0 {
            return invalid(format!("network input must be a multiple of 8 in H and W, got {h}x{w}"));
        }
        Ok(())
    }

    /// Forward pass from front-end features, skipping the fixed quantum layer.
    ///
    /// Only valid for the quantum front end, whose output does not depend on
    /// any trainable parameter and can therefore be precomputed.
    pub fn forward_from_features(&mut self, features: &Tensor) -> Result<Tensor> {
        if !matches!(self.front, FrontEnd::Quantum(_)) {
            return invalid("precomputed features only apply to the quantum front end");
        }
        let [n, c, h, w] = features.shape();
        if c != self.config.feature_channels() {
            return invalid(format!(
                "expected {} feature channels, got {c}",
                self.config.feature_channels()
            ));
        }
        self.input_shape = Some([n, 1, 2 * h, 2 * w]);
        self.unet.forward(features)
    }
}

impl Module for HybridNetwork {
    fn forward(&mut self, images: &Tensor) -> Result<Tensor> {
        self.check_input(images)?;
        let features = match &mut self.front {
            FrontEnd::Quantum(circuit) => quantum_features(images, circuit)?,
            FrontEnd::Classical(conv) => conv.forward(images)?,
        };
        self.input_shape = Some(images.shape());
        self.unet.forward(&features)
    }

    /// Gradient with respect to the input image. No gradient flows through
    /// the quantum front end, so it returns zeros in that case.
    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let shape = self
            .input_shape
            .ok_or_else(|| Error::State("network backward called before forward".into()))?;
        let g = self.unet.backward(grad_output)?;
        match &mut self.front {
            FrontEnd::Quantum(_) => Ok(Tensor::zeros(shape)),
            FrontEnd::Classical(conv) => conv.backward(&g),
        }
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = Vec::new();
        if let FrontEnd::Classical(conv) = &mut self.front {
            out.extend(prefixed("front", conv.params_mut()));
        }
        out.extend(prefixed("unet", self.unet.params_mut()));
        out
    }

    fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        prefixed("unet", self.unet.buffers_mut()).collect()
    }

    fn set_training(&mut self, training: bool) {
        self.unet.set_training(training);
    }
}
