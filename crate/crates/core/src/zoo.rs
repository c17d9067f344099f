//! Canonical architectures and parameter accounting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, BranchSpec, LayerSpec, NetworkSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vrcnn,
    Arcnn,
    Vdsr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Vrcnn, ModelKind::Arcnn, ModelKind::Vdsr];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vrcnn => "vrcnn",
            ModelKind::Arcnn => "arcnn",
            ModelKind::Vdsr => "vdsr",
        }
    }

    pub fn build(self) -> NetworkSpec {
        match self {
            ModelKind::Vrcnn => build_vrcnn(),
            ModelKind::Arcnn => build_arcnn(),
            ModelKind::Vdsr => build_vdsr(),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidSpec(format!(
                    "unknown model {s:?} (expected vrcnn, arcnn, or vdsr)"
                ))
            })
    }
}

/// Variable-filter-size residue network: 64@5x5 | 16@5x5 + 32@3x3 | 16@3x3 + 32@1x1 | 1@3x3, plus input.
pub fn build_vrcnn() -> NetworkSpec {
    use Activation::*;
    NetworkSpec::new(
        "vrcnn",
        vec![
            LayerSpec::single(5, 64, Relu),
            LayerSpec::new(
                vec![BranchSpec::square(5, 16), BranchSpec::square(3, 32)],
                Relu,
            ),
            LayerSpec::new(
                vec![BranchSpec::square(3, 16), BranchSpec::square(1, 32)],
                Relu,
            ),
            LayerSpec::single(3, 1, Linear),
        ],
        true,
    )
    .expect("vrcnn spec is valid")
}

/// Four single-branch layers 64@9x9, 32@7x7, 16@1x1, 1@5x5 without a residue connection.
pub fn build_arcnn() -> NetworkSpec {
    use Activation::*;
    NetworkSpec::new(
        "arcnn",
        vec![
            LayerSpec::single(9, 64, Relu),
            LayerSpec::single(7, 32, Relu),
            LayerSpec::single(1, 16, Relu),
            LayerSpec::single(5, 1, Linear),
        ],
        false,
    )
    .expect("arcnn spec is valid")
}

/// Twenty 3x3 layers, 64 filters wide, with a residue connection.
pub fn build_vdsr() -> NetworkSpec {
    let mut layers = vec![LayerSpec::single(3, 64, Activation::Relu); 19];
    layers.push(LayerSpec::single(3, 1, Activation::Linear));
    NetworkSpec::new("vdsr", layers, true).expect("vdsr spec is valid")
}

/// Per-branch accounting row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BranchCount {
    pub layer: usize,
    pub module: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub in_channels: usize,
    pub filters: usize,
    pub weights: usize,
}

/// One row per conv module (branch), numbered in spec order from 1.
pub fn branch_counts(spec: &NetworkSpec) -> Vec<BranchCount> {
    let mut rows = Vec::new();
    for (i, layer) in spec.layers.iter().enumerate() {
        let in_channels = spec.in_channels(i);
        for b in &layer.branches {
            rows.push(BranchCount {
                layer: i + 1,
                module: rows.len() + 1,
                kernel_h: b.kernel_h,
                kernel_w: b.kernel_w,
                in_channels,
                filters: b.filters,
                weights: in_channels * b.filters * b.kernel_h * b.kernel_w,
            });
        }
    }
    rows
}

/// `(weights, biases)`: weights per branch are
/// `input channels x filters x kernel area`, biases one per filter.
pub fn param_count(spec: &NetworkSpec) -> (usize, usize) {
    branch_counts(spec)
        .iter()
        .fold((0, 0), |(w, b), r| (w + r.weights, b + r.filters))
}

/// Multiply-accumulate operations to filter one `width x height` plane.
/// With stride 1 and same-size outputs every weight is used once per pixel.
pub fn mac_count(spec: &NetworkSpec, width: usize, height: usize) -> u64 {
    param_count(spec).0 as u64 * width as u64 * height as u64
}
