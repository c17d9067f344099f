//! Declarative fully-convolutional networks built from parallel conv branches.
//!
//! Each layer applies every branch to the same input, activates each branch
//! independently, and concatenates the results along the channel axis in
//! branch order. The last layer is linear; a residue network adds the input
//! to the last layer's output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conv::{conv2d_backward, conv2d_forward, ConvParams};
use super::layers::{concat_channels, relu_backward, relu_forward, split_channels};
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub filters: usize,
}

impl BranchSpec {
    pub const fn square(kernel: usize, filters: usize) -> Self {
        BranchSpec {
            kernel_h: kernel,
            kernel_w: kernel,
            filters,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub branches: Vec<BranchSpec>,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(branches: Vec<BranchSpec>, activation: Activation) -> Self {
        LayerSpec {
            branches,
            activation,
        }
    }

    pub fn single(kernel: usize, filters: usize, activation: Activation) -> Self {
        Self::new(vec![BranchSpec::square(kernel, filters)], activation)
    }

    pub fn out_channels(&self) -> usize {
        self.branches.iter().map(|b| b.filters).sum()
    }

    fn branch_sizes(&self) -> Vec<usize> {
        self.branches.iter().map(|b| b.filters).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub residue: bool,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>, residue: bool) -> Result<Self> {
        let spec = NetworkSpec {
            name: name.into(),
            layers,
            residue,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks branch geometry and channel chaining (1 channel in, 1 channel out).
    pub fn validate(&self) -> Result<()> {
        let last = self
            .layers
            .last()
            .ok_or_else(|| Error::InvalidSpec("network has no layers".into()))?;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.branches.is_empty() {
                return Err(Error::InvalidSpec(format!(
                    "layer {} has no branches",
                    i + 1
                )));
            }
            for b in &layer.branches {
                if b.filters == 0 || b.kernel_h % 2 == 0 || b.kernel_w % 2 == 0 {
                    return Err(Error::InvalidSpec(format!(
                        "layer {}: branch {}@{}x{} needs odd kernels and at least one filter",
                        i + 1,
                        b.filters,
                        b.kernel_h,
                        b.kernel_w
                    )));
                }
            }
        }
        if last.out_channels() != 1 {
            return Err(Error::InvalidSpec(format!(
                "last layer must produce 1 channel, produces {}",
                last.out_channels()
            )));
        }
        if last.activation != Activation::Linear {
            return Err(Error::InvalidSpec("last layer must be linear".into()));
        }
        Ok(())
    }

    /// Input channel count of layer `i`.
    pub fn in_channels(&self, i: usize) -> usize {
        if i == 0 {
            1
        } else {
            self.layers[i - 1].out_channels()
        }
    }

    /// Same architecture with the residue connection switched on or off.
    pub fn with_residue(&self, residue: bool) -> Self {
        NetworkSpec {
            residue,
            ..self.clone()
        }
    }
}

/// Weights and biases of every branch, indexed `[layer][branch]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    layers: Vec<Vec<ConvParams>>,
}

impl ModelParams {
    pub fn from_layers(spec: &NetworkSpec, layers: Vec<Vec<ConvParams>>) -> Result<Self> {
        let p = ModelParams { layers };
        p.check(spec)?;
        Ok(p)
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                layer
                    .branches
                    .iter()
                    .map(|b| {
                        ConvParams::zeros(spec.in_channels(i), b.filters, b.kernel_h, b.kernel_w)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelParams { layers })
    }

    /// Zero-filled parameters with the same geometry as `self`.
    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                l.iter()
                    .map(|c| {
                        ConvParams::zeros(
                            c.in_channels(),
                            c.out_channels(),
                            c.kernel_h(),
                            c.kernel_w(),
                        )
                        .expect("geometry already validated")
                    })
                    .collect()
            })
            .collect();
        ModelParams { layers }
    }

    pub fn layers(&self) -> &[Vec<ConvParams>] {
        &self.layers
    }

    pub fn branch(&self, layer: usize, branch: usize) -> &ConvParams {
        &self.layers[layer][branch]
    }

    pub fn branch_mut(&mut self, layer: usize, branch: usize) -> &mut ConvParams {
        &mut self.layers[layer][branch]
    }

    /// Branches in spec order.
    pub fn convs(&self) -> impl Iterator<Item = &ConvParams> {
        self.layers.iter().flatten()
    }

    pub fn convs_mut(&mut self) -> impl Iterator<Item = &mut ConvParams> {
        self.layers.iter_mut().flatten()
    }

    pub fn weight_count(&self) -> usize {
        self.convs().map(ConvParams::weight_count).sum()
    }

    pub fn bias_count(&self) -> usize {
        self.convs().map(|c| c.biases().len()).sum()
    }

    pub fn same_geometry(&self, other: &ModelParams) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_geometry(y))
            })
    }

    /// Elementwise `self += other`.
    pub fn accumulate(&mut self, other: &ModelParams) {
        debug_assert!(self.same_geometry(other));
        for (a, b) in self.convs_mut().zip(other.convs()) {
            for (x, y) in a.weights_mut().iter_mut().zip(b.weights()) {
                *x += y;
            }
            for (x, y) in a.biases_mut().iter_mut().zip(b.biases()) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.convs()
            .all(|c| c.weights().iter().chain(c.biases()).all(|v| v.is_finite()))
    }

    /// Verifies that the parameters have exactly the geometry `spec` implies.
    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        spec.validate()?;
        if self.layers.len() != spec.layers.len() {
            return Err(Error::ParamMismatch(format!(
                "{} parameter layers for a {}-layer network",
                self.layers.len(),
                spec.layers.len()
            )));
        }
        for (i, (convs, layer)) in self.layers.iter().zip(&spec.layers).enumerate() {
            if convs.len() != layer.branches.len() {
                return Err(Error::ParamMismatch(format!(
                    "layer {}: {} parameter branches for {} spec branches",
                    i + 1,
                    convs.len(),
                    layer.branches.len()
                )));
            }
            for (j, (c, b)) in convs.iter().zip(&layer.branches).enumerate() {
                if c.in_channels() != spec.in_channels(i)
                    || c.out_channels() != b.filters
                    || c.kernel_h() != b.kernel_h
                    || c.kernel_w() != b.kernel_w
                {
                    return Err(Error::ParamMismatch(format!(
                        "layer {} branch {}: parameters are {}->{}@{}x{}, spec wants {}->{}@{}x{}",
                        i + 1,
                        j + 1,
                        c.in_channels(),
                        c.out_channels(),
                        c.kernel_h(),
                        c.kernel_w(),
                        spec.in_channels(i),
                        b.filters,
                        b.kernel_h,
                        b.kernel_w
                    )));
                }
            }
        }
        Ok(())
    }
}

/// He-normal weights, zero biases; deterministic in `seed`.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> Result<ModelParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        let convs = layer
            .branches
            .iter()
            .map(|b| {
                ConvParams::he_normal(
                    spec.in_channels(i),
                    b.filters,
                    b.kernel_h,
                    b.kernel_w,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        layers.push(convs);
    }
    Ok(ModelParams { layers })
}

/// Intermediate values retained by [`network_forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Input of every layer; entry 0 is the network input.
    pub layer_inputs: Vec<Tensor>,
    /// Conv output of every branch before activation, `[layer][branch]`.
    pub pre_activations: Vec<Vec<Tensor>>,
}

/// Gradients of a scalar loss with respect to the parameters and the input.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub params: ModelParams,
    pub input: Tensor,
}

fn check_network_input(input: &Tensor) -> Result<()> {
    if input.channels() != 1 {
        return Err(Error::ExpectedSingleChannel(input.channels()));
    }
    Ok(())
}

fn run_forward(
    spec: &NetworkSpec,
    params: &ModelParams,
    input: &Tensor,
    keep: bool,
) -> Result<(Tensor, Option<ForwardTrace>)> {
    params.check(spec)?;
    check_network_input(input)?;
    let mut trace = keep.then(|| ForwardTrace {
        layer_inputs: Vec::with_capacity(spec.layers.len()),
        pre_activations: Vec::with_capacity(spec.layers.len()),
    });
    let mut x = input.clone();
    for (layer, convs) in spec.layers.iter().zip(&params.layers) {
        let pre = convs
            .iter()
            .map(|c| conv2d_forward(&x, c))
            .collect::<Result<Vec<_>>>()?;
        let activated: Vec<Tensor> = match layer.activation {
            Activation::Relu => pre.iter().map(relu_forward).collect(),
            Activation::Linear => pre.clone(),
        };
        let next = concat_channels(&activated)?;
        if let Some(t) = trace.as_mut() {
            t.layer_inputs.push(x);
            t.pre_activations.push(pre);
        }
        x = next;
    }
    if spec.residue {
        x = x.add(input)?;
    } else if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network_forward"));
    }
    Ok((x, trace))
}

/// Runs the network and keeps the activations needed by [`network_backward`].
/// The output has the same height and width as `input`.
pub fn network_forward(
    spec: &NetworkSpec,
    params: &ModelParams,
    input: &Tensor,
) -> Result<(Tensor, ForwardTrace)> {
    let (out, trace) = run_forward(spec, params, input, true)?;
    Ok((out, trace.expect("trace requested")))
}

/// Inference-only forward pass.
pub fn network_infer(spec: &NetworkSpec, params: &ModelParams, input: &Tensor) -> Result<Tensor> {
    Ok(run_forward(spec, params, input, false)?.0)
}

fn check_trace(spec: &NetworkSpec, trace: &ForwardTrace, grad_output: &Tensor) -> Result<()> {
    let n = spec.layers.len();
    if trace.layer_inputs.len() != n || trace.pre_activations.len() != n {
        return Err(Error::StaleActivations(format!(
            "trace holds {} layers, network has {n}",
            trace.layer_inputs.len()
        )));
    }
    let input = &trace.layer_inputs[0];
    let (h, w) = (input.height(), input.width());
    if grad_output.shape() != Shape::new(1, h, w) {
        return Err(Error::StaleActivations(format!(
            "output gradient {} does not match input {}",
            grad_output.shape(),
            input.shape()
        )));
    }
    for (i, layer) in spec.layers.iter().enumerate() {
        if trace.layer_inputs[i].shape() != Shape::new(spec.in_channels(i), h, w) {
            return Err(Error::StaleActivations(format!(
                "layer {} input is {}",
                i + 1,
                trace.layer_inputs[i].shape()
            )));
        }
        let pre = &trace.pre_activations[i];
        if pre.len() != layer.branches.len()
            || pre
                .iter()
                .zip(&layer.branches)
                .any(|(t, b)| t.shape() != Shape::new(b.filters, h, w))
        {
            return Err(Error::StaleActivations(format!(
                "layer {} activations",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Back-propagates `grad_output` (gradient of the loss w.r.t. the network
/// output) through a trace produced by [`network_forward`].
pub fn network_backward(
    spec: &NetworkSpec,
    params: &ModelParams,
    trace: &ForwardTrace,
    grad_output: &Tensor,
) -> Result<Gradients> {
    params.check(spec)?;
    check_trace(spec, trace, grad_output)?;
    let mut grads = params.zeros_like();
    let mut upstream = grad_output.clone();
    for i in (0..spec.layers.len()).rev() {
        let layer = &spec.layers[i];
        let input = &trace.layer_inputs[i];
        let branch_grads = split_channels(&upstream, &layer.branch_sizes())?;
        let mut grad_input: Option<Tensor> = None;
        for (j, g) in branch_grads.into_iter().enumerate() {
            let g = match layer.activation {
                Activation::Relu => relu_backward(&trace.pre_activations[i][j], &g)?,
                Activation::Linear => g,
            };
            let cg = conv2d_backward(input, &params.layers[i][j], &g)?;
            let dst = &mut grads.layers[i][j];
            dst.weights_mut().copy_from_slice(&cg.weights);
            dst.biases_mut().copy_from_slice(&cg.biases);
            grad_input = Some(match grad_input {
                None => cg.input,
                Some(mut acc) => {
                    for (a, b) in acc.data_mut().iter_mut().zip(cg.input.data()) {
                        *a += b;
                    }
                    acc
                }
            });
        }
        upstream = grad_input.expect("layers have at least one branch");
    }
    if spec.residue {
        for (a, b) in upstream.data_mut().iter_mut().zip(grad_output.data()) {
            *a += b;
        }
    }
    Ok(Gradients {
        params: grads,
        input: upstream,
    })
}
