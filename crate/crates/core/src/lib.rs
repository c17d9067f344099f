//! Fully-convolutional artifact-reduction networks for block-based image and
//! video compression.
//!
//! The crate covers the whole desk-scale pipeline: a dense [`Tensor`] type,
//! zero-padded convolution layers with exact gradients ([`nn`]), canonical
//! VRCNN / AR-CNN / VDSR architectures ([`zoo`]), mini-batch SGD training
//! ([`train`]), a DCT-based codec proxy and tiling ([`dataset`]), PSNR and
//! Bjontegaard metrics ([`metrics`]), and a checksummed binary model format
//! ([`model_file`]).

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model_file;
pub mod nn;
pub mod tensor;
pub mod train;
pub mod zoo;

pub use dataset::{QualityLevel, SamplePair};
pub use error::{Error, ErrorKind, Result};
pub use metrics::{bd_psnr, bd_rate, mse, psnr, RdCurve, RdPoint};
pub use nn::{ModelParams, NetworkSpec};
pub use tensor::{Plane, Shape, Tensor};
pub use train::{train, train_with, NumericMode, TrainConfig, TrainOutcome};
pub use zoo::{build_arcnn, build_vdsr, build_vrcnn, param_count, ModelKind};
