//! Training loop, inference and evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::dataset::Dataset;
use super::metrics::ImageMetrics;
use crate::error::{invalid, Error, Result};
use crate::image::Image2D;
use crate::nn::{build_hybrid_network, mse_loss, Adam, FrontEndKind, HybridNetwork, Module, Tensor};

/// Xor-ed into the run seed for the per-epoch shuffle stream.
const SHUFFLE_STREAM: u64 = 0x0005_4aff_1e00_0000;

pub struct TrainOutcome {
    pub network: HybridNetwork,
    pub optimizer: Adam,
    /// Mean training MSE of each epoch.
    pub history: Vec<f64>,
}

fn uses_features(network: &HybridNetwork, data: &Dataset) -> bool {
    network.config().front_end == FrontEndKind::Quantum && data.features.is_some()
}

fn forward_batch(network: &mut HybridNetwork, data: &Dataset, batch: &[usize]) -> Result<Tensor> {
    if uses_features(network, data) {
        let features = data.features.as_ref().expect("checked above");
        let items: Vec<Tensor> = batch.iter().map(|&i| features[i].clone()).collect();
        network.forward_from_features(&Tensor::stack(&items)?)
    } else {
        network.forward(&stack_images(batch.iter().map(|&i| &data.pairs[i].input))?)
    }
}

fn stack_images<'a>(images: impl Iterator<Item = &'a Image2D>) -> Result<Tensor> {
    let items = images
        .map(|img| Tensor::from_vec([1, 1, img.height(), img.width()], img.data().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack(&items)
}

fn check_dataset(network: &HybridNetwork, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return invalid("dataset has no pairs");
    }
    if let Some(features) = &data.features {
        if features.len() != data.len() {
            return invalid("feature count does not match pair count");
        }
        let want = network.config().feature_channels();
        if network.config().front_end == FrontEndKind::Quantum
            && features.iter().any(|f| f.channels() != want)
        {
            return invalid(format!("precomputed features must have {want} channels"));
        }
    }
    Ok(())
}

/// Trains a fresh network from `config` on `data`.
pub fn train(config: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    train_with_progress(config, data, |_, _| {})
}

/// Like [`train`], calling `on_epoch(epoch, mean_loss)` after every epoch.
pub fn train_with_progress(
    config: &TrainConfig,
    data: &Dataset,
    on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    let network = build_hybrid_network(&config.network_config())?;
    let optimizer = Adam::new(config.lr);
    continue_training(config, data, network, optimizer, on_epoch)
}

/// Runs `config.epochs` further epochs on an existing network and optimizer.
pub fn continue_training(
    config: &TrainConfig,
    data: &Dataset,
    mut network: HybridNetwork,
    mut optimizer: Adam,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    check_dataset(&network, data)?;
    network.set_training(true);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let prediction = forward_batch(&mut network, data, batch)?;
            let target = stack_images(batch.iter().map(|&i| &data.pairs[i].target))?;
            let (loss, grad) = mse_loss(&prediction, &target)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training loss became {loss} at epoch {epoch}; lower the learning rate or check the data"
                )));
            }
            network.zero_grad();
            network.backward(&grad)?;
            optimizer.step(network.params_mut())?;
            total += loss * batch.len() as f64;
        }
        let mean = total / data.len() as f64;
        history.push(mean);
        on_epoch(epoch, mean);
    }
    network.set_training(false);
    Ok(TrainOutcome { network, optimizer, history })
}

/// Eval-mode reconstructions, one per pair, in the normalized domain.
pub fn predict(network: &mut HybridNetwork, data: &Dataset) -> Result<Vec<Image2D>> {
    check_dataset(network, data)?;
    network.set_training(false);
    (0..data.len())
        .map(|i| {
            let out = forward_batch(network, data, &[i])?;
            if !out.is_finite() {
                return Err(Error::Numeric(format!("network output for pair {i} is not finite")));
            }
            Image2D::new(out.height(), out.width(), out.into_data())
        })
        .collect()
}

/// Per-image and mean metrics of a model and of the zero-filled inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub model: String,
    pub acceleration: f64,
    pub per_image: Vec<ImageMetrics>,
    pub mean: ImageMetrics,
    pub zero_filled: Vec<ImageMetrics>,
    pub zero_filled_mean: ImageMetrics,
}

/// Scores `predictions` against the targets of `data`.
pub fn evaluate_predictions(
    predictions: &[Image2D],
    data: &Dataset,
    model: &str,
    acceleration: f64,
) -> Result<MetricsReport> {
    if predictions.len() != data.len() {
        return invalid(format!("{} predictions for {} pairs", predictions.len(), data.len()));
    }
    let mut per_image = Vec::with_capacity(data.len());
    let mut zero_filled = Vec::with_capacity(data.len());
    for (pred, pair) in predictions.iter().zip(&data.pairs) {
        if pred.dims() != pair.target.dims() {
            return invalid(format!(
                "prediction is {:?} but target is {:?}",
                pred.dims(),
                pair.target.dims()
            ));
        }
        per_image.push(ImageMetrics::compute(pred, &pair.target)?);
        zero_filled.push(ImageMetrics::compute(&pair.input, &pair.target)?);
    }
    Ok(MetricsReport {
        model: model.to_string(),
        acceleration,
        mean: ImageMetrics::mean(&per_image)?,
        zero_filled_mean: ImageMetrics::mean(&zero_filled)?,
        per_image,
        zero_filled,
    })
}

pub fn evaluate(
    network: &mut HybridNetwork,
    data: &Dataset,
    model: &str,
    acceleration: f64,
) -> Result<MetricsReport> {
    let predictions = predict(network, data)?;
    evaluate_predictions(&predictions, data, model, acceleration)
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "model,accel,image,mse,psnr,ssim";

    /// Rows for every image, then `mean`, for the model and then for
    /// `zero_filled`. Values use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        let mut rows = |tag: &str, items: &[ImageMetrics], mean: &ImageMetrics| {
            for (i, m) in items.iter().enumerate() {
                out.push_str(&format!("{tag},{},{i},{},{},{}\n", self.acceleration, m.mse, m.psnr, m.ssim));
            }
            out.push_str(&format!(
                "{tag},{},mean,{},{},{}\n",
                self.acceleration, mean.mse, mean.psnr, mean.ssim
            ));
        };
        rows(&self.model, &self.per_image, &self.mean);
        rows("zero_filled", &self.zero_filled, &self.zero_filled_mean);
        out
    }
}

pub fn loss_history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (e, l) in history.iter().enumerate() {
        out.push_str(&format!("{e},{l}\n"));
    }
    out
}
