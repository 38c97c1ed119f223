//! Hybrid quantum-classical reconstruction of undersampled MRI.
//!
//! A parameter-free 4-qubit quanvolution front end (simulated exactly on a
//! statevector) downsamples a zero-filled image by two; an asymmetric U-net
//! trained from scratch maps the resulting features back to a full
//! resolution image. A trainable 2x2 stride-2 convolution can replace the
//! quantum front end as a classical control.
//!
//! Modules, bottom-up:
//! - [`qsim`]: statevector simulation of the kernel circuit.
//! - [`quanv`]: patch encoding and the sliding-window quanvolution.
//! - [`mri`]: centered unitary FFTs, Cartesian masks, zero filling, SOS, phantoms.
//! - [`nn`]: tensors, layers with explicit backward passes, Adam, the hybrid network.
//! - [`pipeline`]: datasets, training, metrics and the comparison experiment.
//! - [`formats`]: tensor files, run configs, checkpoints and PGM export.

pub mod error;
pub mod formats;
pub mod image;
pub mod mri;
pub mod nn;
pub mod pipeline;
pub mod qsim;
pub mod quanv;

pub use error::{Error, Result};
pub use image::Image2D;
