//! Distortion metrics, filter evaluation, and Bjontegaard deltas.

mod bjontegaard;
mod table;

use std::fmt;

use serde::{Serialize, Serializer};

use crate::dataset::YuvFrame;
use crate::error::{Error, Result};
use crate::nn::{network_infer, ModelParams, NetworkSpec};
use crate::tensor::Plane;

pub use bjontegaard::{
    bd_psnr, bd_psnr_with, bd_rate, bd_rate_with, BdMethod, Cubic, Pchip, RdCurve, RdPoint,
    CUBIC_POINTS,
};
pub use table::{render_bd_table, BdRow, BdTable};

const PEAK: f64 = 255.0;

fn check_dims(a: &Plane, b: &Plane) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::InvalidDimensions(format!(
            "planes are {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean squared sample difference.
pub fn mse(a: &Plane, b: &Plane) -> Result<f64> {
    check_dims(a, b)?;
    let sum: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| u64::from(x.abs_diff(y)).pow(2))
        .sum();
    Ok(sum as f64 / a.samples().len() as f64)
}

/// `10 log10(255^2 / MSE)`; identical planes give `f64::INFINITY`.
pub fn psnr(a: &Plane, b: &Plane) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(psnr_from_mse(m))
}

pub fn psnr_from_mse(m: f64) -> f64 {
    if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / m).log10()
    }
}

/// Runs the network over one plane and requantizes to 8 bits.
pub fn apply_filter(spec: &NetworkSpec, params: &ModelParams, plane: &Plane) -> Result<Plane> {
    network_infer(spec, params, &plane.to_tensor())?.to_plane()
}

/// Infinite values serialize as the string `"inf"` since JSON has no infinity.
fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_owned()
    } else {
        format!("{v:.4}")
    }
}

/// Difference of two PSNRs where both may be infinite.
fn db_delta(after: f64, before: f64) -> f64 {
    if after == before {
        0.0
    } else {
        after - before
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairResult {
    pub index: usize,
    #[serde(serialize_with = "ser_db")]
    pub psnr_before: f64,
    #[serde(serialize_with = "ser_db")]
    pub psnr_after: f64,
    #[serde(serialize_with = "ser_db")]
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterReport {
    pub model: String,
    pub pairs: Vec<PairResult>,
    #[serde(serialize_with = "ser_db")]
    pub mean_psnr_before: f64,
    #[serde(serialize_with = "ser_db")]
    pub mean_psnr_after: f64,
    #[serde(serialize_with = "ser_db")]
    pub mean_delta: f64,
}

impl FilterReport {
    fn from_pairs(model: &str, pairs: Vec<PairResult>) -> Self {
        let n = pairs.len() as f64;
        let mean = |f: fn(&PairResult) -> f64| pairs.iter().map(f).sum::<f64>() / n;
        let (before, after) = (mean(|p| p.psnr_before), mean(|p| p.psnr_after));
        FilterReport {
            model: model.to_owned(),
            mean_psnr_before: before,
            mean_psnr_after: after,
            mean_delta: if pairs.iter().all(|p| p.delta.is_finite()) {
                mean(|p| p.delta)
            } else {
                db_delta(after, before)
            },
            pairs,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,psnr_before,psnr_after,delta\n");
        for p in &self.pairs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.index,
                fmt_db(p.psnr_before),
                fmt_db(p.psnr_after),
                fmt_db(p.delta)
            ));
        }
        out
    }
}

impl fmt::Display for FilterReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model {}", self.model)?;
        for p in &self.pairs {
            writeln!(
                f,
                "  #{:<4} before PSNR: {} dB  after PSNR: {} dB  delta {} dB",
                p.index,
                fmt_db(p.psnr_before),
                fmt_db(p.psnr_after),
                fmt_db(p.delta)
            )?;
        }
        write!(
            f,
            "mean before PSNR: {} dB  after PSNR: {} dB  delta {} dB",
            fmt_db(self.mean_psnr_before),
            fmt_db(self.mean_psnr_after),
            fmt_db(self.mean_delta)
        )
    }
}

/// PSNR of each degraded plane against its original, before and after filtering.
pub fn evaluate_filter(
    spec: &NetworkSpec,
    params: &ModelParams,
    pairs: &[(Plane, Plane)],
) -> Result<FilterReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("no pairs to evaluate".into()));
    }
    params.check(spec)?;
    let results = pairs
        .iter()
        .enumerate()
        .map(|(index, (degraded, original))| {
            let before = psnr(degraded, original)?;
            let after = psnr(&apply_filter(spec, params, degraded)?, original)?;
            Ok(PairResult {
                index,
                psnr_before: before,
                psnr_after: after,
                delta: db_delta(after, before),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FilterReport::from_pairs(&spec.name, results))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameReport {
    pub y: FilterReport,
    pub u: FilterReport,
    pub v: FilterReport,
}

impl fmt::Display for FrameReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, r) in [("Y", &self.y), ("U", &self.u), ("V", &self.v)] {
            writeln!(
                f,
                "{name}: before PSNR: {} dB  after PSNR: {} dB  delta {} dB",
                fmt_db(r.mean_psnr_before),
                fmt_db(r.mean_psnr_after),
                fmt_db(r.mean_delta)
            )?;
        }
        Ok(())
    }
}

/// Per-plane evaluation over (degraded, original) frame pairs. Chroma goes
/// through the same model as luma.
pub fn evaluate_frames(
    spec: &NetworkSpec,
    params: &ModelParams,
    frames: &[(YuvFrame, YuvFrame)],
) -> Result<FrameReport> {
    let plane = |i: usize| {
        let pairs: Vec<(Plane, Plane)> = frames
            .iter()
            .map(|(d, o)| (d.planes()[i].clone(), o.planes()[i].clone()))
            .collect();
        evaluate_filter(spec, params, &pairs)
    };
    Ok(FrameReport {
        y: plane(0)?,
        u: plane(1)?,
        v: plane(2)?,
    })
}
