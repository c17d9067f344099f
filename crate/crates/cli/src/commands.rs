use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use vrcnn_core::dataset::{
    build_corpus, degrade, save_plane, synthetic_image, PlaneFormat, YuvFrame,
};
use vrcnn_core::metrics::{
    apply_filter, bd_psnr_with, bd_rate_with, evaluate_filter, evaluate_frames, psnr,
    render_bd_table, BdMethod, BdRow, BdTable, RdCurve,
};
use vrcnn_core::model_file::{load_model, payload_len, save_model};
use vrcnn_core::nn::init_params;
use vrcnn_core::train::{train_with, NumericMode, PRESETS};
use vrcnn_core::zoo::{branch_counts, mac_count};
use vrcnn_core::{
    param_count, ModelKind, ModelParams, NetworkSpec, Plane, QualityLevel, TrainConfig,
};

use crate::args::*;
use crate::media::{Layout, Media};
use crate::UsageError;

/// Human-readable text for stdout plus the JSON report.
pub struct Output {
    pub text: String,
    pub json: Value,
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            bail!(UsageError("--threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn merge(base: &mut Value, overrides: Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                b.insert(k, v);
            }
        }
        (b, o) => *b = o,
    }
}

/// A preset name, or a JSON file whose keys override the QP preset.
fn resolve_config(config: Option<&str>, qp: i32) -> Result<TrainConfig> {
    let cfg = match config {
        None => TrainConfig::for_qp(qp)?,
        Some(name) if PRESETS.contains(&name) => TrainConfig::preset(name)?,
        Some(path) => {
            let text =
                std::fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
            let overrides: Value =
                serde_json::from_str(&text).with_context(|| format!("parsing config {path}"))?;
            let mut v = serde_json::to_value(TrainConfig::for_qp(qp)?)?;
            merge(&mut v, overrides);
            serde_json::from_value(v).map_err(|e| UsageError(format!("config {path}: {e}")))?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct TrainLog<'a> {
    model: &'a str,
    qp: i32,
    numeric_mode: NumericMode,
    config: &'a TrainConfig,
    corpus: &'a vrcnn_core::dataset::CorpusManifest,
    epochs: &'a [vrcnn_core::train::EpochStats],
    final_loss: f64,
    model_file: &'a Path,
    bytes_written: u64,
    /// Omitted in deterministic mode so that repeated runs give identical logs.
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_clock_seconds: Option<f64>,
}

pub fn train(a: &TrainArgs) -> Result<Output> {
    let qp: i32 = a.qp.parse()?;
    let q = QualityLevel::new(qp)?;
    let mut cfg = resolve_config(a.config.as_deref(), qp)?;
    if let Some(p) = &a.init_from {
        cfg.init_from = Some(p.clone());
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if cfg.requires_init && cfg.init_from.is_none() {
        bail!(UsageError(
            "QP 22 models are fine-tuned from a trained QP 27 model rather than trained from scratch; \
             train one with --qp 27 and pass it with --init-from"
                .into()
        ));
    }
    let mode = NumericMode::from_env()?;
    let kind = ModelKind::from(a.model);
    let spec = kind.build();
    let corpus = build_corpus(&a.images, q)?;
    eprintln!(
        "{} tiles from {} images at qp {qp}; training {kind} for {} epochs",
        corpus.samples.len(),
        corpus.manifest.files.len(),
        cfg.epochs
    );
    let outcome = train_with(&corpus.samples, &spec, &cfg, mode, |e| {
        eprintln!(
            "epoch {:>4}  lr {:.3e}  loss {:.6}",
            e.epoch + 1,
            e.learning_rate,
            e.loss
        );
        ControlFlow::Continue(())
    })?;
    let bytes = save_model(&spec, &outcome.state.params, &a.out)?;
    let final_loss = outcome.epochs.last().map_or(f64::NAN, |e| e.loss);
    let seconds = outcome.elapsed.as_secs_f64();
    eprintln!("wall clock {seconds:.1} s");
    let log = TrainLog {
        model: kind.name(),
        qp,
        numeric_mode: mode,
        config: &cfg,
        corpus: &corpus.manifest,
        epochs: &outcome.epochs,
        final_loss,
        model_file: &a.out,
        bytes_written: bytes,
        wall_clock_seconds: (mode == NumericMode::Fast).then_some(seconds),
    };
    let json = serde_json::to_value(&log)?;
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".log.json");
        PathBuf::from(p)
    });
    write_json(&log_path, &json)?;
    Ok(Output {
        text: format!(
            "trained {kind} at qp {qp}: {} epochs, final loss {final_loss:.6}\nwrote {} ({bytes} bytes) and {}",
            outcome.epochs.len(),
            a.out.display(),
            log_path.display()
        ),
        json,
    })
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> Result<(NetworkSpec, ModelParams)> {
    load_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn filter_frame(
    pool: &rayon::ThreadPool,
    spec: &NetworkSpec,
    params: &ModelParams,
    frame: &YuvFrame,
    selected: [bool; 3],
) -> Result<YuvFrame> {
    let planes = pool.install(|| {
        frame
            .planes()
            .into_par_iter()
            .zip(selected)
            .map(|(p, on)| {
                if on {
                    apply_filter(spec, params, p)
                } else {
                    Ok(p.clone())
                }
            })
            .collect::<vrcnn_core::Result<Vec<_>>>()
    })?;
    let [y, u, v]: [Plane; 3] = planes.try_into().expect("three planes");
    Ok(YuvFrame::new(y, u, v)?)
}

pub fn apply(a: &ApplyArgs) -> Result<Output> {
    let (spec, params) = load(&a.model_file)?;
    let layout = Layout::resolve(&a.input, &a.format)?;
    let media = Media::read(&a.input, layout)?;
    let pool = thread_pool(a.threads)?;
    let (out, frames, planes) = match &media {
        Media::Plane(p) => {
            if !matches!(a.plane, PlaneArg::Y | PlaneArg::All) {
                bail!(UsageError("single-plane input only has a Y plane".into()));
            }
            (Media::Plane(apply_filter(&spec, &params, p)?), 1, vec!["y"])
        }
        Media::Frames(frames) => {
            let selected = match a.plane {
                PlaneArg::Y => [true, false, false],
                PlaneArg::U => [false, true, false],
                PlaneArg::V => [false, false, true],
                PlaneArg::All => [true, true, true],
            };
            let filtered = frames
                .iter()
                .map(|f| filter_frame(&pool, &spec, &params, f, selected))
                .collect::<Result<Vec<_>>>()?;
            let names = ["y", "u", "v"]
                .into_iter()
                .zip(selected)
                .filter_map(|(n, on)| on.then_some(n))
                .collect();
            (Media::Frames(filtered), frames.len(), names)
        }
    };
    out.write(&a.output, layout)?;
    let (w, h) = match &out {
        Media::Plane(p) => (p.width(), p.height()),
        Media::Frames(f) => (f[0].width(), f[0].height()),
    };
    Ok(Output {
        text: format!(
            "filtered {frames} frame(s), planes {} at {w}x{h} with {}; wrote {}",
            planes.join(","),
            spec.name,
            a.output.display()
        ),
        json: json!({
            "model": spec.name,
            "model_file": a.model_file,
            "input": a.input,
            "output": a.output,
            "width": w,
            "height": h,
            "frames": frames,
            "planes": planes,
        }),
    })
}

pub fn degrade_cmd(a: &DegradeArgs) -> Result<Output> {
    let q = QualityLevel::new(a.qp)?;
    let layout = Layout::resolve(&a.input, &a.format)?;
    let media = Media::read(&a.input, layout)?;
    let out = media.map_planes(|p| Ok(degrade(p, q)))?;
    out.write(&a.output, layout)?;
    let luma = |m: &Media| -> Vec<Plane> {
        match m {
            Media::Plane(p) => vec![p.clone()],
            Media::Frames(f) => f.iter().map(|fr| fr.y.clone()).collect(),
        }
    };
    let (orig, deg) = (luma(&media), luma(&out));
    let mean_psnr = orig
        .iter()
        .zip(&deg)
        .map(|(o, d)| psnr(d, o))
        .collect::<vrcnn_core::Result<Vec<_>>>()?
        .iter()
        .sum::<f64>()
        / orig.len() as f64;
    let psnr_json = if mean_psnr.is_finite() {
        json!(mean_psnr)
    } else {
        json!("inf")
    };
    Ok(Output {
        text: format!(
            "degraded {} at qp {} (step {:.4}); luma PSNR: {} dB; wrote {}",
            a.input.display(),
            q,
            q.qstep(),
            if mean_psnr.is_finite() {
                format!("{mean_psnr:.4}")
            } else {
                "inf".into()
            },
            a.output.display()
        ),
        json: json!({
            "input": a.input,
            "output": a.output,
            "qp": q.qp(),
            "qstep": q.qstep(),
            "frames": orig.len(),
            "luma_psnr": psnr_json,
        }),
    })
}

pub fn eval(a: &EvalArgs) -> Result<Output> {
    let (spec, params) = load(&a.model_file)?;
    let layout = Layout::resolve(&a.degraded, &a.format)?;
    let degraded = Media::read(&a.degraded, layout)?;
    let original = Media::read(&a.original, layout)?;
    let (text, json, csv) = match (&degraded, &original) {
        (Media::Plane(d), Media::Plane(o)) => {
            let r = evaluate_filter(&spec, &params, &[(d.clone(), o.clone())])?;
            (r.to_string(), serde_json::to_value(&r)?, r.to_csv())
        }
        (Media::Frames(d), Media::Frames(o)) => {
            if d.len() != o.len() {
                bail!(vrcnn_core::Error::InvalidDimensions(format!(
                    "{} degraded frames but {} original frames",
                    d.len(),
                    o.len()
                )));
            }
            let pairs: Vec<_> = d.iter().cloned().zip(o.iter().cloned()).collect();
            let r = evaluate_frames(&spec, &params, &pairs)?;
            let mut csv = String::from("plane,");
            csv.push_str(r.y.to_csv().lines().next().unwrap_or_default());
            csv.push('\n');
            for (name, pr) in [("y", &r.y), ("u", &r.u), ("v", &r.v)] {
                for line in pr.to_csv().lines().skip(1) {
                    let _ = writeln!(csv, "{name},{line}");
                }
            }
            (
                r.to_string().trim_end().to_owned(),
                serde_json::to_value(&r)?,
                csv,
            )
        }
        _ => unreachable!("both inputs share one layout"),
    };
    if let Some(path) = &a.csv {
        std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Output { text, json })
}

fn fmt_fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    // Avoid printing "-0.0" for values that round to zero.
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_owned()
    } else {
        s
    }
}

#[derive(Deserialize)]
struct ManifestRow {
    class: String,
    sequence: String,
    plane: String,
    anchor: PathBuf,
    test: PathBuf,
}

fn bd_table(path: &Path, method: BdMethod, any_len: bool) -> Result<BdTable> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<(String, String, [Option<f64>; 3])> = Vec::new();
    for rec in rdr.deserialize::<ManifestRow>() {
        let r = rec.with_context(|| format!("parsing {}", path.display()))?;
        let idx = match r.plane.to_ascii_lowercase().as_str() {
            "y" => 0,
            "u" => 1,
            "v" => 2,
            other => bail!(UsageError(format!(
                "unknown plane {other:?} in {}",
                path.display()
            ))),
        };
        let anchor = RdCurve::from_csv_path(base.join(&r.anchor), any_len)?;
        let test = RdCurve::from_csv_path(base.join(&r.test), any_len)?;
        let value = bd_rate_with(&anchor, &test, method)
            .with_context(|| format!("{} {} plane {}", r.class, r.sequence, r.plane))?;
        let pos = match rows
            .iter()
            .position(|(c, s, _)| *c == r.class && *s == r.sequence)
        {
            Some(p) => p,
            None => {
                rows.push((r.class.clone(), r.sequence.clone(), [None; 3]));
                rows.len() - 1
            }
        };
        rows[pos].2[idx] = Some(value);
    }
    let rows = rows
        .into_iter()
        .map(|(class, sequence, v)| match v {
            [Some(y), Some(u), Some(v)] => Ok(BdRow {
                class,
                sequence,
                y,
                u,
                v,
            }),
            _ => Err(vrcnn_core::Error::InvalidCurve(format!(
                "{class} {sequence} needs y, u, and v rows"
            ))),
        })
        .collect::<vrcnn_core::Result<Vec<_>>>()?;
    BdTable::new(rows).ok_or_else(|| {
        vrcnn_core::Error::EmptyDataset(format!("{} has no rows", path.display())).into()
    })
}

pub fn bdrate(a: &BdrateArgs) -> Result<Output> {
    let method = if a.piecewise {
        BdMethod::Piecewise
    } else {
        BdMethod::Cubic
    };
    if let Some(table) = &a.table {
        let t = bd_table(table, method, a.piecewise)?;
        if let Some(path) = &a.csv {
            std::fs::write(path, t.to_csv())
                .with_context(|| format!("writing {}", path.display()))?;
        }
        return Ok(Output {
            text: render_bd_table(&t).trim_end().to_owned(),
            json: serde_json::to_value(&t)?,
        });
    }
    let (anchor, test) = match (&a.anchor, &a.test) {
        (Some(x), Some(y)) => (x, y),
        _ => bail!(UsageError("--anchor and --test are both required".into())),
    };
    let anchor_c = RdCurve::from_csv_path(anchor, a.piecewise)?;
    let test_c = RdCurve::from_csv_path(test, a.piecewise)?;
    let rate = bd_rate_with(&anchor_c, &test_c, method)?;
    let db = bd_psnr_with(&anchor_c, &test_c, method)?;
    Ok(Output {
        text: format!(
            "BD-rate: {}%\nBD-PSNR: {} dB",
            fmt_fixed(rate, 1),
            fmt_fixed(db, 4)
        ),
        json: json!({
            "anchor": anchor,
            "test": test,
            "method": method,
            "bd_rate_percent": rate,
            "bd_psnr_db": db,
        }),
    })
}

pub fn params(a: &ParamsArgs) -> Result<Output> {
    let kind = ModelKind::from(a.model);
    let spec = kind.build();
    let rows = branch_counts(&spec);
    let (weights, biases) = param_count(&spec);
    let payload = payload_len(&ModelParams::zeros(&spec)?);
    let macs = mac_count(&spec, a.width, a.height);
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{kind}: {} layers, residue {}",
        spec.layers.len(),
        if spec.residue { "on" } else { "off" }
    );
    let _ = writeln!(text, "Biases {biases}");
    let _ = writeln!(
        text,
        "Model payload {payload} bytes ({:.1} KiB) at 32-bit precision",
        payload as f64 / 1024.0
    );
    let _ = writeln!(text, "MACs per {}x{} plane {macs}", a.width, a.height);
    let _ = writeln!(text);
    let _ = writeln!(
        text,
        "{:<6} {:<7} {:<7} {:>8} {:>8} {:>10}",
        "Layer", "Module", "Kernel", "Inputs", "Filters", "Weights"
    );
    for r in &rows {
        let _ = writeln!(
            text,
            "{:<6} {:<7} {:<7} {:>8} {:>8} {:>10}",
            format!("conv{}", r.layer),
            r.module,
            format!("{}x{}", r.kernel_h, r.kernel_w),
            r.in_channels,
            r.filters,
            r.weights
        );
    }
    let _ = write!(text, "Total parameters {weights}");
    Ok(Output {
        text,
        json: json!({
            "model": kind.name(),
            "residue": spec.residue,
            "branches": rows,
            "weights": weights,
            "biases": biases,
            "payload_bytes": payload,
            "width": a.width,
            "height": a.height,
            "macs_per_plane": macs,
        }),
    })
}

#[derive(Serialize)]
struct BenchResult {
    model: String,
    source: String,
    frames: usize,
    seconds_per_frame: f64,
    min_seconds: f64,
    max_seconds: f64,
    /// Luma plus both chroma planes.
    macs_per_frame: u64,
    /// This model's time per frame divided by the first model's.
    relative_time: f64,
}

pub fn bench(a: &BenchArgs) -> Result<Output> {
    if a.frames == 0 {
        bail!(UsageError("--frames must be at least 1".into()));
    }
    if a.model_files.is_empty() && a.model.is_empty() {
        bail!(UsageError(
            "give at least one --model-file or --model".into()
        ));
    }
    let pool = thread_pool(a.threads)?;
    let mut models: Vec<(String, NetworkSpec, ModelParams)> = Vec::new();
    for path in &a.model_files {
        let (spec, params) = load(path)?;
        models.push((path.display().to_string(), spec, params));
    }
    for &m in &a.model {
        let spec = ModelKind::from(m).build();
        let params = init_params(&spec, 0)?;
        models.push((format!("builtin:{}", spec.name), spec, params));
    }
    let frame = |i: usize| -> Result<YuvFrame> {
        let seed = i as u64;
        Ok(YuvFrame::new(
            synthetic_image(a.width, a.height, seed),
            synthetic_image(a.width / 2, a.height / 2, seed + 1000),
            synthetic_image(a.width / 2, a.height / 2, seed + 2000),
        )?)
    };
    let frames: Vec<YuvFrame> = (0..=a.frames).map(frame).collect::<Result<_>>()?;
    let mut results: Vec<BenchResult> = Vec::new();
    for (source, spec, params) in &models {
        // Frame 0 is the warmup.
        filter_frame(&pool, spec, params, &frames[0], [true; 3])?;
        let mut times = Vec::with_capacity(a.frames);
        for f in &frames[1..] {
            let t = Instant::now();
            filter_frame(&pool, spec, params, f, [true; 3])?;
            times.push(t.elapsed().as_secs_f64());
        }
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let (cw, ch) = (a.width / 2, a.height / 2);
        results.push(BenchResult {
            model: spec.name.clone(),
            source: source.clone(),
            frames: a.frames,
            seconds_per_frame: mean,
            min_seconds: times.iter().copied().fold(f64::INFINITY, f64::min),
            max_seconds: times.iter().copied().fold(0.0, f64::max),
            macs_per_frame: mac_count(spec, a.width, a.height) + 2 * mac_count(spec, cw, ch),
            relative_time: mean / results.first().map_or(mean, |r| r.seconds_per_frame),
        });
    }
    let mut text = format!(
        "{} frame(s) of {}x{} YUV 4:2:0 after one warmup frame\n{:<8} {:>12} {:>16} {:>10}  source\n",
        a.frames, a.width, a.height, "model", "s/frame", "MACs/frame", "relative"
    );
    for r in &results {
        let _ = writeln!(
            text,
            "{:<8} {:>12.4} {:>16} {:>9.2}x  {}",
            r.model, r.seconds_per_frame, r.macs_per_frame, r.relative_time, r.source
        );
    }
    Ok(Output {
        text: text.trim_end().to_owned(),
        json: json!({ "width": a.width, "height": a.height, "results": results }),
    })
}

pub fn synth(a: &SynthArgs) -> Result<Output> {
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut files = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let path = a.out.join(format!("synth_{i:04}.pgm"));
        let img = synthetic_image(a.width, a.height, a.seed.wrapping_add(i as u64));
        save_plane(&path, &img, PlaneFormat::Pgm)?;
        files.push(path);
    }
    Ok(Output {
        text: format!(
            "wrote {} {}x{} images to {}",
            a.count,
            a.width,
            a.height,
            a.out.display()
        ),
        json: json!({ "files": files, "width": a.width, "height": a.height }),
    })
}
