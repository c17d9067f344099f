//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test -p vrcnn-core --test acceptance -- --nocapture` to see
//! the report lines.

use std::ops::ControlFlow;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrcnn_core::dataset::{build_corpus_from_planes, synthetic_image, Corpus};
use vrcnn_core::metrics::{apply_filter, bd_psnr, bd_rate};
use vrcnn_core::model_file::{encode, payload_len};
use vrcnn_core::nn::{
    init_params, network_backward, network_forward, network_infer, Activation, BranchSpec,
    LayerSpec,
};
use vrcnn_core::train::{train_with, NumericMode, TrainConfig, TrainOutcome};
use vrcnn_core::zoo::{branch_counts, mac_count};
use vrcnn_core::{
    build_arcnn, build_vdsr, build_vrcnn, param_count, psnr, ModelParams, NetworkSpec,
    QualityLevel, RdCurve, RdPoint, Shape, Tensor,
};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "{} criterion {id} ({name}): {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

// ---------------------------------------------------------------------------
// 1. Parameter accounting

#[test]
fn c1_parameter_accounting() {
    let t = Instant::now();
    let weights = |spec: &NetworkSpec| {
        branch_counts(spec)
            .iter()
            .map(|r| r.weights)
            .collect::<Vec<_>>()
    };
    let vrcnn = build_vrcnn();
    let arcnn = build_arcnn();
    let ok = weights(&vrcnn) == [1600, 25600, 18432, 6912, 1536, 432]
        && param_count(&vrcnn).0 == 54512
        && weights(&arcnn) == [5184, 100352, 512, 400]
        && param_count(&arcnn).0 == 106448
        && t.elapsed() < Duration::from_secs(1);
    report(
        1,
        "parameter accounting",
        ok,
        &format!(
            "VRCNN {} / AR-CNN {} weights",
            param_count(&vrcnn).0,
            param_count(&arcnn).0
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 2. Model size

#[test]
fn c2_model_size() {
    let t = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for (spec, kib) in [
        (build_vrcnn(), 213.6),
        (build_arcnn(), 416.3),
        (build_vdsr(), 2601.3),
    ] {
        let params = ModelParams::zeros(&spec).unwrap();
        let payload = payload_len(&params);
        let (w, b) = param_count(&spec);
        let file = encode(&spec, &params).unwrap().len();
        let payload_kib = payload as f64 / 1024.0;
        ok &= payload == 4 * (w + b);
        ok &= (payload_kib * 10.0).round() / 10.0 == kib;
        ok &= file > payload && file - payload < 1024;
        details.push(format!(
            "{} {payload_kib:.1} KiB (+{} B header)",
            spec.name,
            file - payload
        ));
    }
    ok &= t.elapsed() < Duration::from_secs(5);
    report(2, "model size", ok, &details.join(", "));
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 3. Gradient correctness

fn random_tensor(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(
        shape,
        (0..shape.len())
            .map(|_| rng.random_range(0.0..1.0))
            .collect(),
    )
    .unwrap()
}

/// Sum of squared errors; the gradient with respect to the output is `2 (y - t)`.
fn sse(y: &Tensor, target: &Tensor) -> f64 {
    y.data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Signs of every pre-activation, used to detect a finite difference that
/// straddles a ReLU kink.
fn relu_pattern(spec: &NetworkSpec, params: &ModelParams, x: &Tensor) -> Vec<bool> {
    let (_, trace) = network_forward(spec, params, x).unwrap();
    trace
        .pre_activations
        .iter()
        .flatten()
        .flat_map(|t| t.data().iter().map(|&v| v > 0.0))
        .collect()
}

#[derive(Default)]
struct FdStats {
    checked: usize,
    skipped: usize,
    worst: f64,
}

/// Within one ReLU activation pattern the loss is exactly quadratic in any
/// single parameter or input sample, so central differences carry no
/// truncation error and a large step only reduces rounding noise. A step that
/// crosses a kink is retried with the smaller ones.
const FD_STEPS: [f64; 3] = [1e-4, 1e-5, 1e-6];
const FD_TOL: f64 = 1e-4;

fn rel_err(fd: f64, analytic: f64) -> f64 {
    (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-6)
}

/// Weight `k` of a branch, or bias `k - weight_count`.
fn param(p: &mut ModelParams, layer: usize, branch: usize, k: usize) -> &mut f64 {
    let c = p.branch_mut(layer, branch);
    let n_w = c.weight_count();
    if k < n_w {
        &mut c.weights_mut()[k]
    } else {
        &mut c.biases_mut()[k - n_w]
    }
}

struct Problem<'a> {
    spec: &'a NetworkSpec,
    target: &'a Tensor,
    /// Activation pattern at the unperturbed point.
    base: Vec<bool>,
}

impl Problem<'_> {
    /// Relative error of the analytic derivative along `perturb`, or `None`
    /// when every step straddles a kink.
    fn check(&self, analytic: f64, perturb: impl Fn(f64) -> (ModelParams, Tensor)) -> Option<f64> {
        let loss = |d: f64| {
            let (p, x) = perturb(d);
            sse(&network_infer(self.spec, &p, &x).unwrap(), self.target)
        };
        for h in FD_STEPS {
            let err = rel_err((loss(h) - loss(-h)) / (2.0 * h), analytic);
            if err <= FD_TOL {
                return Some(err);
            }
            let kinked = [h, -h].into_iter().any(|d| {
                let (p, x) = perturb(d);
                relu_pattern(self.spec, &p, &x) != self.base
            });
            if !kinked {
                return Some(err);
            }
        }
        None
    }
}

/// Central differences of the loss against every parameter and every input
/// sample.
fn check_gradients(
    spec: &NetworkSpec,
    params: &ModelParams,
    x: &Tensor,
    target: &Tensor,
) -> FdStats {
    let (y, trace) = network_forward(spec, params, x).unwrap();
    let upstream = y.sub(target).unwrap().scale(2.0).unwrap();
    let grads = network_backward(spec, params, &trace, &upstream).unwrap();
    let problem = Problem {
        spec,
        target,
        base: relu_pattern(spec, params, x),
    };
    let mut stats = FdStats::default();
    let mut record = |outcome: Option<f64>| match outcome {
        Some(err) => {
            stats.checked += 1;
            stats.worst = stats.worst.max(err);
        }
        None => stats.skipped += 1,
    };

    for li in 0..spec.layers.len() {
        for bi in 0..spec.layers[li].branches.len() {
            let g = grads.params.branch(li, bi);
            let analytic = g.weights().iter().chain(g.biases());
            for (k, &a) in analytic.enumerate() {
                record(problem.check(a, |d| {
                    let mut p = params.clone();
                    *param(&mut p, li, bi, k) += d;
                    (p, x.clone())
                }));
            }
        }
    }
    for (i, &a) in grads.input.data().iter().enumerate() {
        record(problem.check(a, |d| {
            let mut data = x.data().to_vec();
            data[i] += d;
            (params.clone(), Tensor::new(x.shape(), data).unwrap())
        }));
    }
    stats
}

fn random_spec(rng: &mut ChaCha8Rng, index: usize) -> NetworkSpec {
    const KERNELS: [usize; 5] = [1, 3, 5, 7, 9];
    let depth = rng.random_range(1..=3);
    let mut layers = Vec::with_capacity(depth);
    for d in 0..depth {
        let last = d + 1 == depth;
        let n_branches = if last { 1 } else { rng.random_range(1..=2) };
        let mut branches: Vec<BranchSpec> = (0..n_branches)
            .map(|_| {
                BranchSpec::square(
                    KERNELS[rng.random_range(0..KERNELS.len())],
                    rng.random_range(1..=4),
                )
            })
            .collect();
        if last {
            branches[0].filters = 1;
        }
        let activation = if last {
            Activation::Linear
        } else {
            Activation::Relu
        };
        layers.push(LayerSpec::new(branches, activation));
    }
    NetworkSpec::new(format!("random{index}"), layers, rng.random_bool(0.5)).unwrap()
}

#[test]
fn c3_gradient_correctness() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = FdStats::default();
    let mut merge = |s: FdStats| {
        total.checked += s.checked;
        total.skipped += s.skipped;
        total.worst = total.worst.max(s.worst);
    };
    for i in 0..50 {
        let spec = random_spec(&mut rng, i);
        let mut params = init_params(&spec, i as u64).unwrap();
        for c in params.convs_mut() {
            for b in c.biases_mut() {
                *b = rng.random_range(-0.1..0.1);
            }
        }
        let (h, w) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let x = random_tensor(Shape::new(1, h, w), &mut rng);
        let target = random_tensor(Shape::new(1, h, w), &mut rng);
        merge(check_gradients(&spec, &params, &x, &target));
    }
    let spec = build_vrcnn();
    let mut params = init_params(&spec, 7).unwrap();
    for c in params.convs_mut() {
        for b in c.biases_mut() {
            *b = rng.random_range(-0.1..0.1);
        }
    }
    let x = random_tensor(Shape::new(1, 8, 8), &mut rng);
    let target = random_tensor(Shape::new(1, 8, 8), &mut rng);
    let full = check_gradients(&spec, &params, &x, &target);
    let full_count = param_count(&spec);
    let full_ok = full.checked + full.skipped == full_count.0 + full_count.1 + 64;
    merge(full);

    let elapsed = t.elapsed();
    // A kink may only excuse a handful of components.
    let ok = total.worst <= FD_TOL
        && total.skipped * 1000 <= total.checked
        && full_ok
        && elapsed < Duration::from_secs(120);
    report(
        3,
        "gradient correctness",
        ok,
        &format!(
            "{} components, worst relative error {:.2e}, {} skipped at ReLU kinks, {:.1} s",
            total.checked,
            total.worst,
            total.skipped,
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 4. Residue identity

#[test]
fn c4_residue_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut specs = vec![
        build_vrcnn(),
        build_arcnn().with_residue(true),
        build_vdsr(),
    ];
    specs.extend((0..20).map(|i| random_spec(&mut rng, i).with_residue(true)));
    let mut ok = true;
    for spec in &specs {
        let zero = ModelParams::zeros(spec).unwrap();
        for _ in 0..3 {
            let (h, w) = (rng.random_range(1..40), rng.random_range(1..40));
            let data = (0..h * w).map(|_| rng.random_range(-10.0..10.0)).collect();
            let x = Tensor::new(Shape::new(1, h, w), data).unwrap();
            ok &= network_infer(spec, &zero, &x).unwrap() == x;
        }
    }
    report(
        4,
        "residue identity",
        ok,
        &format!("{} residue networks, exact", specs.len()),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 5. BD-rate oracle

/// Lagrange form of the cubic through four points.
fn lagrange(xs: &[f64; 4], ys: &[f64; 4], x: f64) -> f64 {
    (0..4)
        .map(|i| {
            let basis: f64 = (0..4)
                .filter(|&j| j != i)
                .map(|j| (x - xs[j]) / (xs[i] - xs[j]))
                .product();
            ys[i] * basis
        })
        .sum()
}

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

struct Oracle {
    rate: f64,
    psnr: f64,
}

fn oracle(anchor: &[(f64, f64); 4], test: &[(f64, f64); 4]) -> Oracle {
    // Trapezoid error falls as 1/N^2; 10^4 panels is not enough for curve
    // pairs whose BD-rate is within a few hundredths of a percent of zero.
    const N: usize = 100_000;
    let split = |c: &[(f64, f64); 4]| {
        let lr: [f64; 4] = std::array::from_fn(|i| c[i].0.ln());
        let d: [f64; 4] = std::array::from_fn(|i| c[i].1);
        (lr, d)
    };
    let (lr_a, d_a) = split(anchor);
    let (lr_t, d_t) = split(test);
    let range = |v: &[f64; 4]| {
        (
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };

    // Log-rate as a function of quality over the shared quality range.
    let (lo, hi) = {
        let (a0, a1) = range(&d_a);
        let (t0, t1) = range(&d_t);
        (a0.max(t0), a1.min(t1))
    };
    let ia = trapezoid(|d| lagrange(&d_a, &lr_a, d), lo, hi, N);
    let it = trapezoid(|d| lagrange(&d_t, &lr_t, d), lo, hi, N);
    let rate = ((it - ia) / (hi - lo)).exp_m1() * 100.0;

    let (lo, hi) = {
        let (a0, a1) = range(&lr_a);
        let (t0, t1) = range(&lr_t);
        (a0.max(t0), a1.min(t1))
    };
    let ia = trapezoid(|r| lagrange(&lr_a, &d_a, r), lo, hi, N);
    let it = trapezoid(|r| lagrange(&lr_t, &d_t, r), lo, hi, N);
    Oracle {
        rate,
        psnr: (it - ia) / (hi - lo),
    }
}

fn random_curve(rng: &mut ChaCha8Rng) -> [(f64, f64); 4] {
    let mut rate = rng.random_range(100.0..1000.0);
    let mut quality = rng.random_range(28.0..34.0);
    std::array::from_fn(|_| {
        let p = (rate, quality);
        rate *= rng.random_range(1.5..2.5);
        quality += rng.random_range(1.5..3.5);
        p
    })
}

fn curve(points: &[(f64, f64); 4]) -> RdCurve {
    RdCurve::new(points.iter().map(|&(r, d)| RdPoint::new(r, d)).collect()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn c5_bd_rate_oracle() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_rate, mut worst_psnr) = (0.0f64, 0.0f64);
    let mut pairs = 0;
    while pairs < 100 {
        let a = random_curve(&mut rng);
        // Point-wise jitter small enough to keep the test curve monotone and
        // overlapping the anchor.
        let b = a.map(|(r, d)| {
            (
                r * rng.random_range(0.85..1.15),
                d + rng.random_range(-0.5..0.5),
            )
        });
        let want = oracle(&a, &b);
        let got_rate = bd_rate(&curve(&a), &curve(&b)).unwrap();
        let got_psnr = bd_psnr(&curve(&a), &curve(&b)).unwrap();
        worst_rate = worst_rate.max(rel(got_rate, want.rate));
        worst_psnr = worst_psnr.max(rel(got_psnr, want.psnr));
        pairs += 1;
    }
    let base = [
        (500.0, 31.2),
        (1000.0, 33.9),
        (2000.0, 36.4),
        (4000.0, 38.7),
    ];
    let scaled = base.map(|(r, d)| (r * 0.9, d));
    let uniform = bd_rate(&curve(&base), &curve(&scaled)).unwrap();
    let elapsed = t.elapsed();
    let ok = worst_rate <= 1e-6
        && worst_psnr <= 1e-6
        && (uniform + 10.0).abs() <= 1e-6
        && elapsed < Duration::from_secs(10);
    report(
        5,
        "BD-rate oracle",
        ok,
        &format!(
            "{pairs} pairs, worst relative error rate {worst_rate:.1e} psnr {worst_psnr:.1e}; x0.9 scaling gives {uniform:.9}%"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// Shared smoke corpus for 6, 7 and 9

const TRAIN_IMAGES: u64 = 8;
const HELD_OUT_IMAGES: u64 = 2;

fn corpus(seeds: std::ops::Range<u64>) -> Corpus {
    let images: Vec<_> = seeds
        .map(|s| (format!("synth{s}"), synthetic_image(350, 245, s)))
        .collect();
    build_corpus_from_planes(&images, QualityLevel::new(37).unwrap()).unwrap()
}

fn smoke_corpus() -> &'static (Corpus, Corpus) {
    static CORPUS: OnceLock<(Corpus, Corpus)> = OnceLock::new();
    CORPUS.get_or_init(|| {
        (
            corpus(0..TRAIN_IMAGES),
            corpus(1000..1000 + HELD_OUT_IMAGES),
        )
    })
}

fn smoke_config() -> TrainConfig {
    TrainConfig::preset("smoke").unwrap()
}

// ---------------------------------------------------------------------------
// 6. End-to-end training

#[test]
fn c6_end_to_end_training() {
    let t = Instant::now();
    let (train, held) = smoke_corpus();
    let cfg = smoke_config();
    let spec = build_vrcnn();
    let out = train_with(
        &train.samples,
        &spec,
        &cfg,
        NumericMode::Deterministic,
        |_| ControlFlow::Continue(()),
    )
    .unwrap();

    let (mut before, mut after) = (0.0, 0.0);
    for s in &held.samples {
        let degraded = s.degraded.to_plane().unwrap();
        let original = s.original.to_plane().unwrap();
        before += psnr(&degraded, &original).unwrap();
        after += psnr(
            &apply_filter(&spec, &out.state.params, &degraded).unwrap(),
            &original,
        )
        .unwrap();
    }
    let n = held.samples.len() as f64;
    let gain = (after - before) / n;
    let stages = out.stage_losses(&cfg);
    let monotone = stages.windows(2).all(|w| w[1] < w[0]);
    let elapsed = t.elapsed();
    let ok = train.samples.len() >= 500
        && cfg.epochs >= 20
        && gain >= 0.2
        && monotone
        && elapsed < Duration::from_secs(15 * 60);
    report(
        6,
        "end-to-end training",
        ok,
        &format!(
            "{} tiles, {} epochs; held-out PSNR {:.3} -> {:.3} dB (gain {gain:+.3}); stage losses {:?}; {:.0} s",
            train.samples.len(),
            out.epochs.len(),
            before / n,
            after / n,
            stages.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 7. Residue learning converges faster

fn loss_at_epoch_5(spec: &NetworkSpec) -> f64 {
    let (train, _) = smoke_corpus();
    let out: TrainOutcome = train_with(
        &train.samples,
        spec,
        &smoke_config(),
        NumericMode::Deterministic,
        |e| {
            if e.epoch + 1 >= 5 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        },
    )
    .unwrap();
    assert_eq!(out.epochs.len(), 5);
    out.epochs[4].loss
}

#[test]
fn c7_residue_speedup() {
    let on = loss_at_epoch_5(&build_vrcnn());
    let off = loss_at_epoch_5(&build_vrcnn().with_residue(false));
    let ok = on < off;
    report(
        7,
        "residue speedup",
        ok,
        &format!("epoch-5 loss with residue {on:.6}, without {off:.6}"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 8. Complexity ordering

#[test]
fn c8_complexity_ordering() {
    let (vrcnn, arcnn, vdsr) = (build_vrcnn(), build_arcnn(), build_vdsr());
    let mut ok = true;
    for (w, h) in [(1, 1), (35, 35), (176, 144), (416, 240), (1920, 1080)] {
        let v = mac_count(&vrcnn, w, h);
        ok &= v < mac_count(&arcnn, w, h) && v < mac_count(&vdsr, w, h);
    }
    let frame = synthetic_image(176, 144, 8).to_tensor();
    let time = |spec: &NetworkSpec| {
        let params = init_params(spec, 1).unwrap();
        let t = Instant::now();
        network_infer(spec, &params, &frame).unwrap();
        t.elapsed()
    };
    let mut runs = Vec::new();
    for _ in 0..3 {
        let (tv, td) = (time(&vrcnn), time(&vdsr));
        ok &= tv < td;
        runs.push(format!("{:.3}/{:.3}", tv.as_secs_f64(), td.as_secs_f64()));
    }
    report(
        8,
        "complexity ordering",
        ok,
        &format!(
            "MACs at 176x144 VRCNN {} AR-CNN {} VDSR {}; VRCNN/VDSR seconds {}",
            mac_count(&vrcnn, 176, 144),
            mac_count(&arcnn, 176, 144),
            mac_count(&vdsr, 176, 144),
            runs.join(", ")
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 9. Determinism

#[test]
fn c9_determinism() {
    let images: Vec<_> = (0..2)
        .map(|s| (format!("d{s}"), synthetic_image(105, 70, 50 + s)))
        .collect();
    let corpus = build_corpus_from_planes(&images, QualityLevel::new(37).unwrap()).unwrap();
    let cfg = TrainConfig {
        epochs: 4,
        lr_stage_epochs: 2,
        batch_size: 4,
        seed: 9,
        ..smoke_config()
    };
    let spec = build_vrcnn();
    let run = || {
        let out = train_with(
            &corpus.samples,
            &spec,
            &cfg,
            NumericMode::Deterministic,
            |_| ControlFlow::Continue(()),
        )
        .unwrap();
        let model = encode(&spec, &out.state.params).unwrap();
        let log =
            serde_json::to_vec(&(&corpus.manifest, &out.epochs, &out.state.loss_history)).unwrap();
        (model, log)
    };
    let first = run();
    let repeats: Vec<_> = (0..2).map(|_| run()).collect();
    let ok = repeats.iter().all(|r| *r == first);
    report(
        9,
        "determinism",
        ok,
        &format!(
            "{} model bytes and {} report bytes identical over 3 runs",
            first.0.len(),
            first.1.len()
        ),
    );
    assert!(ok);
}
