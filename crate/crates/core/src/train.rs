//! Mini-batch SGD with momentum, weight decay, adjustable gradient clipping,
//! and a staged learning-rate schedule.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SamplePair;
use crate::error::{Error, Result};
use crate::model_file::load_model;
use crate::nn::{init_params, network_backward, network_forward, ModelParams, NetworkSpec};
use crate::tensor::Tensor;

/// Environment variable selecting [`NumericMode`].
pub const NUMERIC_MODE_ENV: &str = "VRCNN_NUMERIC_MODE";

/// Added to the init seed for the shuffling stream so that the two never
/// share a ChaCha state.
const SHUFFLE_STREAM: u64 = 0x5348_5546_464c_4531;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericMode {
    /// Single-threaded reference path.
    #[default]
    Deterministic,
    /// Per-sample gradients on the rayon pool, summed in sample order. Gives
    /// the same bits as `Deterministic`.
    Fast,
}

impl NumericMode {
    /// Reads `VRCNN_NUMERIC_MODE`; unset means deterministic.
    pub fn from_env() -> Result<Self> {
        match std::env::var(NUMERIC_MODE_ENV) {
            Err(_) => Ok(NumericMode::Deterministic),
            Ok(v) => v.parse(),
        }
    }
}

impl std::str::FromStr for NumericMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "deterministic" => Ok(NumericMode::Deterministic),
            "fast" => Ok(NumericMode::Fast),
            other => Err(Error::InvalidConfig(format!(
                "{NUMERIC_MODE_ENV}={other:?}: expected \"deterministic\" or \"fast\""
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub clip_tau: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_stage_epochs: usize,
    pub lr_final: f64,
    /// Constant for the whole run.
    pub bias_lr: f64,
    pub seed: u64,
    pub init_from: Option<PathBuf>,
    /// Refuse to train from random initialization.
    pub requires_init: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 0.1,
            clip_tau: 0.01,
            momentum: 0.9,
            weight_decay: 0.0001,
            batch_size: 64,
            epochs: 160,
            lr_stage_epochs: 40,
            lr_final: 0.0001,
            bias_lr: 0.01,
            seed: 0,
            init_from: None,
            requires_init: false,
        }
    }
}

/// Names accepted by [`TrainConfig::preset`].
pub const PRESETS: [&str; 5] = ["qp22", "qp27", "qp32", "qp37", "smoke"];

impl TrainConfig {
    pub fn preset(name: &str) -> Result<TrainConfig> {
        let base = TrainConfig::default();
        let cfg = match name {
            "qp22" => TrainConfig {
                base_lr: 0.001,
                lr_final: 0.001,
                bias_lr: 0.0001,
                epochs: 40,
                lr_stage_epochs: 40,
                requires_init: true,
                ..base
            },
            "qp27" | "qp32" => TrainConfig {
                bias_lr: 0.01,
                ..base
            },
            "qp37" => TrainConfig {
                bias_lr: 0.1,
                ..base
            },
            // Desk-scale run: a few hundred tiles, four short stages. Single-sample
            // batches with a tight clip, so no step adds more than clip_tau to the velocity.
            "smoke" => TrainConfig {
                base_lr: 1e-4,
                lr_final: 1e-6,
                bias_lr: 1e-4,
                clip_tau: 1e-4,
                batch_size: 1,
                epochs: 20,
                lr_stage_epochs: 5,
                ..base
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    /// The QP preset matching `qp`, if there is one.
    pub fn for_qp(qp: i32) -> Result<TrainConfig> {
        Self::preset(&format!("qp{qp}"))
    }

    pub fn from_json(text: &str) -> Result<TrainConfig> {
        let cfg: TrainConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<TrainConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("base_lr", self.base_lr),
            ("clip_tau", self.clip_tau),
            ("lr_final", self.lr_final),
            ("bias_lr", self.bias_lr),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            ));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("lr_stage_epochs", self.lr_stage_epochs),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.base_lr < self.lr_final {
            return bad(format!(
                "base_lr {} is below lr_final {}",
                self.base_lr, self.lr_final
            ));
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.epochs.div_ceil(self.lr_stage_epochs)
    }
}

/// `base_lr * r^stage`, with `r` chosen so the last stage runs at `lr_final`.
/// A single-stage schedule stays at `base_lr`.
pub fn learning_rate(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::EpochOutOfRange {
            epoch,
            epochs: cfg.epochs,
        });
    }
    let stages = cfg.stages();
    let stage = epoch / cfg.lr_stage_epochs;
    if stages == 1 {
        return Ok(cfg.base_lr);
    }
    if stage == stages - 1 {
        return Ok(cfg.lr_final);
    }
    let r = (cfg.lr_final / cfg.base_lr).powf(1.0 / (stages - 1) as f64);
    Ok(cfg.base_lr * r.powi(stage as i32))
}

/// Clamps `g` to `[-tau/alpha, tau/alpha]`.
pub fn clip_update(g: f64, alpha: f64, tau: f64) -> f64 {
    let bound = tau / alpha;
    g.clamp(-bound, bound)
}

/// `(1/N) sum ||out - target||^2` and its gradient `(2/N)(out - target)`.
pub fn mse_loss(outputs: &[Tensor], targets: &[Tensor]) -> Result<(f64, Vec<Tensor>)> {
    if outputs.len() != targets.len() {
        return Err(Error::InvalidTensor(format!(
            "{} outputs but {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::EmptyDataset("empty batch".into()));
    }
    let n = outputs.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(outputs.len());
    for (o, t) in outputs.iter().zip(targets) {
        let diff = o.sub(t)?;
        loss += diff.sum_squares();
        grads.push(diff.scale(2.0 / n)?);
    }
    Ok((loss / n, grads))
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: ModelParams,
    pub velocity: ModelParams,
    pub epoch: usize,
    pub iteration: u64,
    /// `(iteration, batch loss)` per step.
    pub loss_history: Vec<(u64, f64)>,
}

impl TrainState {
    pub fn new(params: ModelParams) -> Self {
        TrainState {
            velocity: params.zeros_like(),
            params,
            epoch: 0,
            iteration: 0,
            loss_history: Vec::new(),
        }
    }
}

fn sample_gradient(
    spec: &NetworkSpec,
    params: &ModelParams,
    input: &Tensor,
    target: &Tensor,
    n: f64,
) -> Result<(f64, ModelParams)> {
    let (out, trace) = network_forward(spec, params, input)?;
    let diff = out.sub(target)?;
    let loss = diff.sum_squares();
    let grads = network_backward(spec, params, &trace, &diff.scale(2.0 / n)?)?;
    Ok((loss, grads.params))
}

/// Batch loss and its gradient with respect to every parameter. The per-sample
/// terms are always summed in batch order.
pub fn batch_gradients(
    spec: &NetworkSpec,
    params: &ModelParams,
    batch: &[(&Tensor, &Tensor)],
    mode: NumericMode,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("empty batch".into()));
    }
    let n = batch.len() as f64;
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    match mode {
        NumericMode::Deterministic => {
            for (x, y) in batch {
                let (l, g) = sample_gradient(spec, params, x, y, n)?;
                loss += l;
                total.accumulate(&g);
            }
        }
        NumericMode::Fast => {
            let parts = batch
                .par_iter()
                .map(|(x, y)| sample_gradient(spec, params, x, y, n))
                .collect::<Result<Vec<_>>>()?;
            for (l, g) in parts {
                loss += l;
                total.accumulate(&g);
            }
        }
    }
    Ok((loss / n, total))
}

/// One momentum update from precomputed gradients.
///
/// Weights: `g' = clip(g + wd*w, lr, tau)`, `v = mu*v - lr*g'`, `w += v`.
/// Biases use `bias_lr` in place of `lr` and no weight decay.
pub fn apply_update(
    state: &mut TrainState,
    grads: &ModelParams,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<()> {
    if !state.params.same_geometry(grads) || !state.params.same_geometry(&state.velocity) {
        return Err(Error::ParamMismatch(
            "gradient or velocity geometry differs from parameters".into(),
        ));
    }
    let (mu, wd, tau, blr) = (cfg.momentum, cfg.weight_decay, cfg.clip_tau, cfg.bias_lr);
    let convs = state
        .params
        .convs_mut()
        .zip(state.velocity.convs_mut())
        .zip(grads.convs());
    for ((p, v), g) in convs {
        for ((w, vw), &gw) in p
            .weights_mut()
            .iter_mut()
            .zip(v.weights_mut())
            .zip(g.weights())
        {
            let gc = clip_update(gw + wd * *w, lr, tau);
            *vw = mu * *vw - lr * gc;
            *w += *vw;
        }
        for ((b, vb), &gb) in p
            .biases_mut()
            .iter_mut()
            .zip(v.biases_mut())
            .zip(g.biases())
        {
            let gc = clip_update(gb, blr, tau);
            *vb = mu * *vb - blr * gc;
            *b += *vb;
        }
    }
    if !state.params.is_finite() {
        return Err(Error::NonFinite("sgd update"));
    }
    Ok(())
}

/// Gradient computation plus update for one mini-batch; returns the batch loss.
pub fn sgd_step(
    state: &mut TrainState,
    spec: &NetworkSpec,
    batch: &[(&Tensor, &Tensor)],
    cfg: &TrainConfig,
    epoch: usize,
    mode: NumericMode,
) -> Result<f64> {
    let lr = learning_rate(epoch, cfg)?;
    let (loss, grads) = batch_gradients(spec, &state.params, batch, mode)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("training loss"));
    }
    apply_update(state, &grads, cfg, lr)?;
    state.iteration += 1;
    state.loss_history.push((state.iteration, loss));
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean per-sample loss over the epoch.
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub epochs: Vec<EpochStats>,
    pub elapsed: Duration,
}

impl TrainOutcome {
    /// Mean epoch loss within each learning-rate stage.
    pub fn stage_losses(&self, cfg: &TrainConfig) -> Vec<f64> {
        self.epochs
            .chunks(cfg.lr_stage_epochs)
            .map(|c| c.iter().map(|e| e.loss).sum::<f64>() / c.len() as f64)
            .collect()
    }
}

fn check_init_compatible(spec: &NetworkSpec, init: &NetworkSpec, path: &Path) -> Result<()> {
    if init.layers != spec.layers || init.residue != spec.residue {
        return Err(Error::IncompatibleInit(format!(
            "{} holds a {} network whose layers do not match {}",
            path.display(),
            init.name,
            spec.name
        )));
    }
    Ok(())
}

fn initial_params(spec: &NetworkSpec, cfg: &TrainConfig) -> Result<ModelParams> {
    match &cfg.init_from {
        Some(path) => {
            let (init_spec, params) = load_model(path)?;
            check_init_compatible(spec, &init_spec, path)?;
            Ok(params)
        }
        None if cfg.requires_init => Err(Error::InvalidConfig(
            "this configuration fine-tunes an existing model (the QP 22 network starts from the trained QP 27 \
             network) and needs init_from"
                .into(),
        )),
        None => init_params(spec, cfg.seed),
    }
}

/// [`train_with`] in the mode named by the environment, without early stop.
pub fn train(
    samples: &[SamplePair],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(samples, spec, cfg, NumericMode::from_env()?, |_| {
        ControlFlow::Continue(())
    })
}

/// Trains for `cfg.epochs` epochs, reshuffling every epoch. `observer` sees
/// each finished epoch and may stop the run early.
pub fn train_with(
    samples: &[SamplePair],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    mode: NumericMode,
    mut observer: impl FnMut(&EpochStats) -> ControlFlow<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset("no training samples".into()));
    }
    let start = Instant::now();
    let mut state = TrainState::new(initial_params(spec, cfg)?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(SHUFFLE_STREAM));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&Tensor, &Tensor)> = chunk
                .iter()
                .map(|&i| (&samples[i].degraded, &samples[i].original))
                .collect();
            sum += sgd_step(&mut state, spec, &batch, cfg, epoch, mode)? * chunk.len() as f64;
        }
        state.epoch = epoch + 1;
        let stats = EpochStats {
            epoch,
            learning_rate: learning_rate(epoch, cfg)?,
            loss: sum / samples.len() as f64,
        };
        log::info!(
            "epoch {} lr {:.3e} loss {:.6}",
            epoch + 1,
            stats.learning_rate,
            stats.loss
        );
        let flow = observer(&stats);
        epochs.push(stats);
        if flow.is_break() {
            break;
        }
    }
    Ok(TrainOutcome {
        state,
        epochs,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, ConvParams, LayerSpec};
    use crate::tensor::Shape;

    fn scalar_spec() -> NetworkSpec {
        NetworkSpec::new(
            "scalar",
            vec![LayerSpec::single(1, 1, Activation::Linear)],
            false,
        )
        .unwrap()
    }

    fn scalar_params(w: f64, b: f64) -> ModelParams {
        let conv = ConvParams::new(1, 1, 1, 1, vec![w], vec![b]).unwrap();
        ModelParams::from_layers(&scalar_spec(), vec![vec![conv]]).unwrap()
    }

    fn t1(v: f64) -> Tensor {
        Tensor::new(Shape::new(1, 1, 1), vec![v]).unwrap()
    }

    fn plain_cfg(lr: f64) -> TrainConfig {
        TrainConfig {
            base_lr: lr,
            lr_final: lr,
            bias_lr: lr,
            clip_tau: 1e12,
            momentum: 0.0,
            weight_decay: 0.0,
            epochs: 1,
            lr_stage_epochs: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule_defaults() {
        let cfg = TrainConfig::default();
        let lr = |e| learning_rate(e, &cfg).unwrap();
        assert_eq!(lr(0), 0.1);
        assert_eq!(lr(39), 0.1);
        assert!((lr(40) - 0.01).abs() < 1e-15);
        assert!((lr(80) - 0.001).abs() < 1e-16);
        assert_eq!(lr(120), 0.0001);
        assert_eq!(lr(159), 0.0001);
        assert!(matches!(
            learning_rate(160, &cfg),
            Err(Error::EpochOutOfRange { .. })
        ));
        let lrs: Vec<f64> = (0..160).map(lr).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_stage_is_constant() {
        let cfg = TrainConfig {
            epochs: 40,
            lr_stage_epochs: 40,
            ..TrainConfig::default()
        };
        assert!((0..40).all(|e| learning_rate(e, &cfg).unwrap() == 0.1));
    }

    #[test]
    fn clipping() {
        assert!((clip_update(0.5, 0.1, 0.01) - 0.1).abs() < 1e-15);
        assert_eq!(clip_update(-0.05, 0.1, 0.01), -0.05);
        assert_eq!(clip_update(3.0, 0.0001, 0.01), 3.0);
        for g in [-7.0, -0.2, 0.0, 0.05, 1.0] {
            let once = clip_update(g, 0.1, 0.01);
            assert_eq!(clip_update(once, 0.1, 0.01), once);
        }
    }

    #[test]
    fn loss_examples() {
        let (l, g) = mse_loss(&[t1(0.5)], &[t1(0.0)]).unwrap();
        assert_eq!(l, 0.25);
        assert_eq!(g[0].data(), &[1.0]);
        let (l, g) = mse_loss(&[t1(0.3)], &[t1(0.3)]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g[0].data(), &[0.0]);
        let (l2, _) = mse_loss(&[t1(0.5), t1(0.5)], &[t1(0.0), t1(0.0)]).unwrap();
        assert_eq!(l2, 0.25);
        assert!(mse_loss(&[t1(0.5)], &[]).is_err());
        let wide = Tensor::zeros(Shape::new(1, 1, 2));
        assert!(mse_loss(&[t1(0.5)], &[wide]).is_err());
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let outs = vec![
            Tensor::new(Shape::new(1, 2, 2), vec![0.1, 0.7, -0.3, 0.4]).unwrap(),
            Tensor::new(Shape::new(1, 2, 2), vec![0.9, 0.2, 0.5, 0.0]).unwrap(),
        ];
        let targets = vec![
            Tensor::new(Shape::new(1, 2, 2), vec![0.2, 0.5, 0.1, 0.4]).unwrap(),
            Tensor::new(Shape::new(1, 2, 2), vec![0.3, 0.3, 0.3, 0.3]).unwrap(),
        ];
        let (_, grads) = mse_loss(&outs, &targets).unwrap();
        let h = 1e-6;
        for n in 0..2 {
            for i in 0..4 {
                let bump = |d: f64| {
                    let mut o = outs.clone();
                    let mut data = o[n].data().to_vec();
                    data[i] += d;
                    o[n] = Tensor::new(o[n].shape(), data).unwrap();
                    mse_loss(&o, &targets).unwrap().0
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let an = grads[n].data()[i];
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut state = TrainState::new(scalar_params(0.7, 0.2));
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        apply_update(&mut state, &scalar_params(0.0, 0.0), &cfg, 0.1).unwrap();
        assert_eq!(state.params, scalar_params(0.7, 0.2));
    }

    #[test]
    fn hand_evaluated_update() {
        let mut state = TrainState::new(scalar_params(1.0, 0.0));
        apply_update(&mut state, &scalar_params(0.01, 0.0), &plain_cfg(0.1), 0.1).unwrap();
        assert!((state.params.branch(0, 0).weights()[0] - 0.999).abs() < 1e-15);
    }

    #[test]
    fn momentum_recurrence() {
        let cfg = TrainConfig {
            momentum: 0.9,
            ..plain_cfg(0.1)
        };
        let g = scalar_params(0.2, 0.0);
        let mut state = TrainState::new(scalar_params(1.0, 0.0));
        apply_update(&mut state, &g, &cfg, 0.1).unwrap();
        let v1 = state.velocity.branch(0, 0).weights()[0];
        assert!((v1 + 0.02).abs() < 1e-15);
        apply_update(&mut state, &g, &cfg, 0.1).unwrap();
        let v2 = state.velocity.branch(0, 0).weights()[0];
        assert_eq!(v2, 0.9 * v1 - 0.1 * 0.2);
    }

    #[test]
    fn biases_skip_weight_decay_and_use_bias_lr() {
        let cfg = TrainConfig {
            weight_decay: 0.5,
            bias_lr: 0.01,
            ..plain_cfg(0.1)
        };
        let mut state = TrainState::new(scalar_params(1.0, 1.0));
        apply_update(&mut state, &scalar_params(0.0, 2.0), &cfg, 0.1).unwrap();
        assert!((state.params.branch(0, 0).weights()[0] - 0.95).abs() < 1e-15);
        assert!((state.params.branch(0, 0).biases()[0] - 0.98).abs() < 1e-15);
    }

    #[test]
    fn sgd_reduces_to_gradient_descent() {
        let spec = scalar_spec();
        let mut state = TrainState::new(scalar_params(0.5, 0.0));
        let (x, y) = (t1(2.0), t1(3.0));
        let cfg = plain_cfg(0.05);
        sgd_step(
            &mut state,
            &spec,
            &[(&x, &y)],
            &cfg,
            0,
            NumericMode::Deterministic,
        )
        .unwrap();
        // L = (w x + b - y)^2, dL/dw = 2 (w x + b - y) x = -8
        assert!((state.params.branch(0, 0).weights()[0] - (0.5 + 0.05 * 8.0)).abs() < 1e-15);
        assert_eq!(state.loss_history, [(1, 4.0)]);
    }

    #[test]
    fn config_validation_and_json() {
        assert!(TrainConfig::default().validate().is_ok());
        for name in PRESETS {
            TrainConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(TrainConfig::preset("qp12").is_err());
        let bad = TrainConfig {
            base_lr: 0.00001,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        let cfg =
            TrainConfig::from_json(r#"{"epochs": 3, "lr_stage_epochs": 1, "seed": 9}"#).unwrap();
        assert_eq!((cfg.epochs, cfg.seed, cfg.batch_size), (3, 9, 64));
        assert!(TrainConfig::from_json(r#"{"epochz": 3}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"momentum": 1.0}"#).is_err());
        let qp22 = TrainConfig::preset("qp22").unwrap();
        assert_eq!(
            (qp22.base_lr, qp22.bias_lr, qp22.epochs),
            (0.001, 0.0001, 40)
        );
        assert_eq!(TrainConfig::for_qp(37).unwrap().bias_lr, 0.1);
    }

    #[test]
    fn numeric_mode_parsing() {
        assert_eq!("fast".parse::<NumericMode>().unwrap(), NumericMode::Fast);
        assert_eq!(
            "Deterministic".parse::<NumericMode>().unwrap(),
            NumericMode::Deterministic
        );
        assert!("turbo".parse::<NumericMode>().is_err());
    }
}
