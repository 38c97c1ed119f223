//! Conversion between trained state and checkpoint files.

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::formats::{Checkpoint, NamedTensor, TensorFile};
use crate::nn::{build_hybrid_network, Adam, HybridNetwork, Module, Moments};

fn named(name: String, tensor: &crate::nn::Tensor) -> NamedTensor {
    NamedTensor { name, tensor: TensorFile::from_tensor(tensor) }
}

/// Captures network parameters, batchnorm statistics and optimizer state.
pub fn to_checkpoint(
    config: &TrainConfig,
    network: &mut HybridNetwork,
    optimizer: &Adam,
) -> Checkpoint {
    let mut tensors: Vec<NamedTensor> = network
        .params_mut()
        .into_iter()
        .map(|(n, p)| named(format!("param:{n}"), &p.value))
        .collect();
    tensors.extend(network.buffers_mut().into_iter().map(|(n, t)| named(format!("buffer:{n}"), t)));
    for m in &optimizer.moments {
        tensors.push(named(format!("adam.m:{}", m.name), &m.first));
        tensors.push(named(format!("adam.v:{}", m.name), &m.second));
    }
    Checkpoint {
        config_hash: config.config_hash(),
        protocol_hash: config.protocol_hash(),
        config_text: config.resolved_text(),
        lr: optimizer.lr,
        beta1: optimizer.beta1,
        beta2: optimizer.beta2,
        eps: optimizer.eps,
        step: optimizer.step,
        tensors,
    }
}

fn load_tensor(ckpt: &Checkpoint, name: &str, shape: [usize; 4]) -> Result<crate::nn::Tensor> {
    let file = ckpt
        .find(name)
        .ok_or_else(|| Error::Format(format!("checkpoint is missing {name}")))?;
    let tensor = file.to_tensor()?;
    if tensor.shape() != shape {
        return Err(Error::Format(format!(
            "{name}: checkpoint shape {:?} does not match network shape {shape:?}",
            tensor.shape()
        )));
    }
    Ok(tensor)
}

/// Rebuilds the config, network (in eval mode) and optimizer of a checkpoint.
pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(TrainConfig, HybridNetwork, Adam)> {
    let config = TrainConfig::from_text(&ckpt.config_text)
        .map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    if config.config_hash() != ckpt.config_hash {
        return Err(Error::Format("checkpoint config hash does not match its config text".into()));
    }
    let mut network = build_hybrid_network(&config.network_config())?;
    for (name, p) in network.params_mut() {
        p.value = load_tensor(ckpt, &format!("param:{name}"), p.value.shape())?;
    }
    for (name, t) in network.buffers_mut() {
        *t = load_tensor(ckpt, &format!("buffer:{name}"), t.shape())?;
    }
    network.set_training(false);

    let mut optimizer = Adam {
        lr: ckpt.lr,
        beta1: ckpt.beta1,
        beta2: ckpt.beta2,
        eps: ckpt.eps,
        step: ckpt.step,
        moments: Vec::new(),
    };
    if ckpt.step > 0 {
        for (name, p) in network.params_mut() {
            let shape = p.value.shape();
            optimizer.moments.push(Moments {
                first: load_tensor(ckpt, &format!("adam.m:{name}"), shape)?,
                second: load_tensor(ckpt, &format!("adam.v:{name}"), shape)?,
                name,
            });
        }
    }
    Ok((config, network, optimizer))
}
