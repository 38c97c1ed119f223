//! Data preparation, training, evaluation and the front-end comparison.

mod compare;
mod config;
mod dataset;
mod metrics;
mod persist;
mod train;

pub use compare::{check_arms_match, compare, ArmResult, ComparisonReport, TABLE1_ROWS};
pub use config::{
    front_end_name, parse_front_end, parse_readout, parse_topology, readout_name, topology_name,
    DataSource, PhantomSet, TrainConfig, CONFIG_KEYS,
};
pub use dataset::{
    feature_cache_key, ground_truth_file_name, kspace_file_name, load_kspace_dir, make_pair,
    pad_kspace, phantom_slices, precompute_features, prepare_dataset, prepare_pairs,
    read_prepared, slice_seeds, write_phantom_slices, write_prepared, Dataset, SamplePair, Split,
};
pub use metrics::{
    mse, psnr, psnr_from_mse, psnr_with_range, ssim, ImageMetrics, PSNR_CAP, SSIM_SIGMA, SSIM_WINDOW,
};
pub use persist::{from_checkpoint, to_checkpoint};
pub use train::{
    continue_training, evaluate, evaluate_predictions, loss_history_csv, predict, train,
    train_with_progress, MetricsReport, TrainOutcome,
};

/// Tool version written next to every artifact.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
