//! Shared fixtures for the criterion benches.

use vrcnn_core::dataset::synthetic_image;
use vrcnn_core::nn::init_params;
use vrcnn_core::{ModelParams, NetworkSpec, Plane, RdCurve, RdPoint, Tensor};

/// Network with freshly initialised parameters.
pub fn model(spec: NetworkSpec, seed: u64) -> (NetworkSpec, ModelParams) {
    let params = init_params(&spec, seed).expect("zoo specs are valid");
    (spec, params)
}

pub fn luma(width: usize, height: usize, seed: u64) -> Plane {
    synthetic_image(width, height, seed)
}

/// One training tile.
pub fn tile(seed: u64) -> Tensor {
    synthetic_image(35, 35, seed).to_tensor()
}

/// Two four-point rate-distortion curves a few percent apart.
pub fn rd_pair() -> (RdCurve, RdCurve) {
    let anchor = [
        (5210.0, 40.31),
        (2480.0, 37.52),
        (1190.0, 34.86),
        (590.0, 32.29),
    ];
    let curve = |scale: f64, lift: f64| {
        RdCurve::new(
            anchor
                .iter()
                .map(|&(r, p)| RdPoint::new(r * scale, p + lift))
                .collect(),
        )
        .expect("monotone curve")
    };
    (curve(1.0, 0.0), curve(0.96, 0.05))
}
