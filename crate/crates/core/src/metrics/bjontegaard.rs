//! Bjontegaard delta metrics between two rate-distortion curves.
//!
//! BD-rate fits `log10(rate)` as a function of PSNR for each curve, averages
//! the gap between the fits over the PSNR range both curves cover, and
//! converts the mean log-rate difference to a percentage. BD-PSNR is the same
//! construction with the axes swapped. Two interpolants are offered: the
//! classic single cubic through four points, and piecewise cubic Hermite
//! (monotone, Fritsch-Carlson slopes) for curves of any length.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub bitrate: f64,
    pub psnr: f64,
}

impl RdPoint {
    pub fn new(bitrate: f64, psnr: f64) -> Self {
        RdPoint { bitrate, psnr }
    }
}

/// Points sorted by increasing bitrate, with PSNR strictly increasing too.
#[derive(Clone, Debug, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

/// Number of points per curve for the classic cubic fit.
pub const CUBIC_POINTS: usize = 4;

impl RdCurve {
    /// A curve with exactly four points.
    pub fn new(points: Vec<RdPoint>) -> Result<Self> {
        if points.len() != CUBIC_POINTS {
            return Err(Error::InvalidCurve(format!(
                "expected {CUBIC_POINTS} points, got {} (use the piecewise variant for other counts)",
                points.len()
            )));
        }
        Self::with_any_len(points)
    }

    /// A curve with two or more points, for the piecewise interpolant.
    pub fn with_any_len(mut points: Vec<RdPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidCurve(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        for p in &points {
            if !(p.bitrate.is_finite() && p.bitrate > 0.0) {
                return Err(Error::InvalidCurve(format!(
                    "bitrate {} is not positive",
                    p.bitrate
                )));
            }
            if !p.psnr.is_finite() {
                return Err(Error::InvalidCurve(format!(
                    "psnr {} is not finite",
                    p.psnr
                )));
            }
        }
        points.sort_by(|a, b| a.bitrate.total_cmp(&b.bitrate));
        for pair in points.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.bitrate == b.bitrate {
                return Err(Error::InvalidCurve(format!(
                    "duplicate bitrate {}",
                    a.bitrate
                )));
            }
            if b.psnr <= a.psnr {
                return Err(Error::InvalidCurve(format!(
                    "non-monotonic: bitrate {} -> {} but psnr {} -> {}",
                    a.bitrate, b.bitrate, a.psnr, b.psnr
                )));
            }
        }
        Ok(RdCurve { points })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    /// Reads `qp,bitrate,psnr` rows. With `any_len` false exactly four rows are required.
    pub fn from_csv<R: Read>(reader: R, any_len: bool) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            #[allow(dead_code)]
            qp: i32,
            bitrate: f64,
            psnr: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if headers != ["qp", "bitrate", "psnr"] {
            return Err(Error::InvalidCurve(format!(
                "expected header qp,bitrate,psnr, got {}",
                headers.join(",")
            )));
        }
        let points = rdr
            .deserialize::<Row>()
            .map(|r| {
                r.map(|r| RdPoint::new(r.bitrate, r.psnr))
                    .map_err(Error::from)
            })
            .collect::<Result<Vec<_>>>()?;
        if any_len {
            Self::with_any_len(points)
        } else {
            Self::new(points)
        }
    }

    pub fn from_csv_path(path: impl AsRef<Path>, any_len: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file, any_len)
    }

    /// Same curve with every bitrate multiplied by `factor`.
    pub fn scale_bitrate(&self, factor: f64) -> Result<Self> {
        Self::with_any_len(
            self.points
                .iter()
                .map(|p| RdPoint::new(p.bitrate * factor, p.psnr))
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BdMethod {
    /// One cubic through exactly four points.
    #[default]
    Cubic,
    /// Piecewise cubic Hermite with monotone slopes; any number of points.
    Piecewise,
}

/// `y = sum c[k] (x - center)^k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cubic {
    pub center: f64,
    pub coeffs: [f64; 4],
}

impl Cubic {
    /// The interpolating cubic through four points. The abscissae are centred on
    /// their mean before the Vandermonde system is built, then solved by
    /// Gaussian elimination with partial pivoting.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Cubic> {
        if xs.len() != 4 || ys.len() != 4 {
            return Err(Error::InvalidCurve(format!(
                "cubic fit needs 4 points, got {}",
                xs.len()
            )));
        }
        let center = xs.iter().sum::<f64>() / 4.0;
        let mut a = [[0.0; 5]; 4];
        for (row, (&x, &y)) in a.iter_mut().zip(xs.iter().zip(ys)) {
            let t = x - center;
            *row = [1.0, t, t * t, t * t * t, y];
        }
        for col in 0..4 {
            let pivot = (col..4)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .expect("non-empty range");
            if a[pivot][col].abs() < 1e-300 {
                return Err(Error::Numeric(
                    "singular Vandermonde system (repeated abscissa)".into(),
                ));
            }
            a.swap(col, pivot);
            let (top, rest) = a.split_at_mut(col + 1);
            let pivot_row = &top[col];
            for row in rest {
                let f = row[col] / pivot_row[col];
                for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *v -= f * p;
                }
            }
        }
        let mut coeffs = [0.0; 4];
        for r in (0..4).rev() {
            let tail: f64 = (r + 1..4).map(|c| a[r][c] * coeffs[c]).sum();
            coeffs[r] = (a[r][4] - tail) / a[r][r];
        }
        Ok(Cubic { center, coeffs })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = x - self.center;
        let c = &self.coeffs;
        ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
    }

    fn antiderivative(&self, x: f64) -> f64 {
        let t = x - self.center;
        let c = &self.coeffs;
        (((c[3] / 4.0 * t + c[2] / 3.0) * t + c[1] / 2.0) * t + c[0]) * t
    }

    /// Closed-form integral over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }
}

/// Piecewise cubic Hermite interpolant with shape-preserving slopes.
#[derive(Clone, Debug, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    /// `xs` must be strictly increasing.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Pchip> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InvalidCurve(format!(
                "piecewise fit needs at least 2 points, got {n}"
            )));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCurve(
                "abscissae must be strictly increasing".into(),
            ));
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d.fill(delta[0]);
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Pchip {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes: d,
        })
    }

    /// Local polynomial of segment `i` in `t = x - xs[i]`: `[c0, c1, c2, c3]`.
    fn segment(&self, i: usize) -> [f64; 4] {
        let h = self.xs[i + 1] - self.xs[i];
        let delta = (self.ys[i + 1] - self.ys[i]) / h;
        let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
        [
            self.ys[i],
            d0,
            (3.0 * delta - 2.0 * d0 - d1) / h,
            (d0 + d1 - 2.0 * delta) / (h * h),
        ]
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.xs.len();
        self.xs[1..n - 1].partition_point(|&k| k <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.locate(x);
        let c = self.segment(i);
        let t = x - self.xs[i];
        ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
    }

    /// Exact integral over `[a, b]`, summed segment by segment.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let prim = |c: &[f64; 4], t: f64| {
            (((c[3] / 4.0 * t + c[2] / 3.0) * t + c[1] / 2.0) * t + c[0]) * t
        };
        let mut total = 0.0;
        for i in 0..self.xs.len() - 1 {
            let (x0, x1) = (self.xs[i], self.xs[i + 1]);
            // Outer segments extend to cover any extrapolated part of [a, b].
            let lo = if i == 0 { a } else { a.max(x0) };
            let hi = if i == self.xs.len() - 2 { b } else { b.min(x1) };
            if hi > lo {
                let c = self.segment(i);
                total += prim(&c, hi - x0) - prim(&c, lo - x0);
            }
        }
        total
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

enum Fit {
    Cubic(Cubic),
    Piecewise(Pchip),
}

impl Fit {
    fn new(xs: &[f64], ys: &[f64], method: BdMethod) -> Result<Fit> {
        match method {
            BdMethod::Cubic => Cubic::fit(xs, ys).map(Fit::Cubic),
            BdMethod::Piecewise => Pchip::fit(xs, ys).map(Fit::Piecewise),
        }
    }

    fn integrate(&self, a: f64, b: f64) -> f64 {
        match self {
            Fit::Cubic(c) => c.integrate(a, b),
            Fit::Piecewise(p) => p.integrate(a, b),
        }
    }
}

/// Mean of `test - anchor` over the shared abscissa range.
fn mean_gap(
    anchor: (&[f64], &[f64]),
    test: (&[f64], &[f64]),
    method: BdMethod,
    axis: &str,
) -> Result<f64> {
    let range = |xs: &[f64]| {
        (
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let (a_lo, a_hi) = range(anchor.0);
    let (t_lo, t_hi) = range(test.0);
    let (lo, hi) = (a_lo.max(t_lo), a_hi.min(t_hi));
    if hi <= lo {
        return Err(Error::NoOverlap(format!(
            "{axis} ranges [{a_lo:.4}, {a_hi:.4}] and [{t_lo:.4}, {t_hi:.4}] are disjoint"
        )));
    }
    let fa = Fit::new(anchor.0, anchor.1, method)?;
    let ft = Fit::new(test.0, test.1, method)?;
    Ok((ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo))
}

fn check_method(curve: &RdCurve, method: BdMethod) -> Result<()> {
    if method == BdMethod::Cubic && curve.points.len() != CUBIC_POINTS {
        return Err(Error::InvalidCurve(format!(
            "cubic fit needs {CUBIC_POINTS} points, curve has {}",
            curve.points.len()
        )));
    }
    let span = curve.points.last().unwrap().psnr - curve.points[0].psnr;
    if span < 0.5 {
        log::warn!("PSNR span {span:.3} dB is below 0.5 dB; the fit is poorly conditioned");
    }
    Ok(())
}

fn axes(c: &RdCurve) -> (Vec<f64>, Vec<f64>) {
    (
        c.points.iter().map(|p| p.psnr).collect(),
        c.points.iter().map(|p| p.bitrate.log10()).collect(),
    )
}

/// Average bitrate difference of `test` against `anchor` at equal quality,
/// in percent. Negative values mean `test` needs fewer bits.
pub fn bd_rate_with(anchor: &RdCurve, test: &RdCurve, method: BdMethod) -> Result<f64> {
    check_method(anchor, method)?;
    check_method(test, method)?;
    let (ap, ar) = axes(anchor);
    let (tp, tr) = axes(test);
    let gap = mean_gap((&ap, &ar), (&tp, &tr), method, "PSNR")?;
    let pct = (10f64.powf(gap) - 1.0) * 100.0;
    if !pct.is_finite() {
        return Err(Error::Numeric("BD-rate is not finite".into()));
    }
    Ok(pct)
}

/// Average PSNR difference of `test` against `anchor` at equal bitrate, in dB.
pub fn bd_psnr_with(anchor: &RdCurve, test: &RdCurve, method: BdMethod) -> Result<f64> {
    check_method(anchor, method)?;
    check_method(test, method)?;
    let (ap, ar) = axes(anchor);
    let (tp, tr) = axes(test);
    mean_gap((&ar, &ap), (&tr, &tp), method, "log-rate")
}

pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<f64> {
    bd_rate_with(anchor, test, BdMethod::Cubic)
}

pub fn bd_psnr(anchor: &RdCurve, test: &RdCurve) -> Result<f64> {
    bd_psnr_with(anchor, test, BdMethod::Cubic)
}
