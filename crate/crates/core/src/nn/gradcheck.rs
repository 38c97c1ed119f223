//! Central finite-difference checks of analytic gradients.
//!
//! The scalar probed is `L = <f(x), R>` for a fixed random tensor `R`, so
//! `dL/df = R` is fed to `backward`. Relative error for a block is
//! `max_i |analytic_i - numeric_i| / max(max_i |analytic_i|, max_i |numeric_i|)`.
//! A block whose analytic and numeric gradients both stay below
//! `abs_floor` is reported as flat and passes: its relative error only
//! measures rounding noise (a conv bias feeding batchnorm is one example).

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::layers::Module;
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    pub tolerance: f64,
    /// Also compare the input gradient.
    pub check_input: bool,
    /// Elements probed per block; `None` probes every element.
    pub max_per_block: Option<usize>,
    /// Gradient magnitude below which a block counts as flat.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            tolerance: 1e-4,
            check_input: true,
            max_per_block: None,
            abs_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub probed: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    /// Both gradients stayed below the absolute floor.
    pub flat: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    /// Largest relative error over the blocks that are not flat.
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().filter(|b| !b.flat).map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.flat || b.max_rel_error < self.tolerance)
    }
}

fn probe(module: &mut dyn Module, input: &Tensor, projection: &Tensor) -> Result<f64> {
    Ok(module.forward(input)?.dot(projection))
}

fn pick(len: usize, limit: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match limit {
        Some(k) if k < len => {
            let mut v = index::sample(rng, len, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..len).collect(),
    }
}

fn block(name: String, pairs: &[(f64, f64)], abs_floor: f64) -> BlockReport {
    let mut max_abs = 0.0f64;
    let mut scale = 0.0f64;
    for &(a, n) in pairs {
        max_abs = max_abs.max((a - n).abs());
        scale = scale.max(a.abs()).max(n.abs());
    }
    let max_rel = if scale > 0.0 { max_abs / scale } else { 0.0 };
    BlockReport {
        name,
        probed: pairs.len(),
        max_abs_error: max_abs,
        max_rel_error: max_rel,
        flat: scale < abs_floor,
    }
}

/// Compares `module`'s backward pass with central differences at `input`.
pub fn gradient_check(
    module: &mut dyn Module,
    input: &Tensor,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let out = module.forward(input)?;
    let projection = Tensor::from_vec(
        out.shape(),
        (0..out.len()).map(|_| StandardNormal.sample(&mut rng)).collect(),
    )?;
    module.zero_grad();
    module.forward(input)?;
    let grad_input = module.backward(&projection)?;

    let analytic: Vec<(String, Tensor)> =
        module.params_mut().into_iter().map(|(n, p)| (n, p.grad.clone())).collect();
    let mut blocks = Vec::new();
    let eps = options.eps;

    for (b, (name, grad)) in analytic.iter().enumerate() {
        let mut pairs = Vec::new();
        for i in pick(grad.len(), options.max_per_block, &mut rng) {
            let original = module.params_mut()[b].1.value.data()[i];
            module.params_mut()[b].1.value.data_mut()[i] = original + eps;
            let plus = probe(module, input, &projection)?;
            module.params_mut()[b].1.value.data_mut()[i] = original - eps;
            let minus = probe(module, input, &projection)?;
            module.params_mut()[b].1.value.data_mut()[i] = original;
            pairs.push((grad.data()[i], (plus - minus) / (2.0 * eps)));
        }
        blocks.push(block(name.clone(), &pairs, options.abs_floor));
    }

    if options.check_input {
        let mut x = input.clone();
        let mut pairs = Vec::new();
        for i in pick(x.len(), options.max_per_block, &mut rng) {
            let original = x.data()[i];
            x.data_mut()[i] = original + eps;
            let plus = probe(module, &x, &projection)?;
            x.data_mut()[i] = original - eps;
            let minus = probe(module, &x, &projection)?;
            x.data_mut()[i] = original;
            pairs.push((grad_input.data()[i], (plus - minus) / (2.0 * eps)));
        }
        blocks.push(block("input".into(), &pairs, options.abs_floor));
    }

    Ok(GradCheckReport { blocks, tolerance: options.tolerance })
}
