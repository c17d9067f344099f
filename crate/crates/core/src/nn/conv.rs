//! Stride-1, zero-padded 2-D convolution.
//!
//! Narrow inputs lower the convolution to a matrix product over an im2col
//! buffer: row `c * kh * kw + dy * kw + dx` of the buffer holds input channel
//! `c` shifted by `(dy - pad_h, dx - pad_w)`, with zeros outside the image.
//! Weights are stored `[out][in][dy][dx]`, so the weight array is already the
//! row-major left operand. Inputs with many channels instead accumulate one
//! product per kernel tap over a zero-bordered copy of the input.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    in_channels: usize,
    out_channels: usize,
    kernel_h: usize,
    kernel_w: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl ConvParams {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        check_geometry(in_channels, out_channels, kernel_h, kernel_w)?;
        let expected = in_channels * out_channels * kernel_h * kernel_w;
        if weights.len() != expected {
            return Err(Error::ParamMismatch(format!(
                "conv {out_channels}x{in_channels}x{kernel_h}x{kernel_w} needs {expected} weights, got {}",
                weights.len()
            )));
        }
        if biases.len() != out_channels {
            return Err(Error::ParamMismatch(format!(
                "conv with {out_channels} filters needs {out_channels} biases, got {}",
                biases.len()
            )));
        }
        Ok(ConvParams {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            weights,
            biases,
        })
    }

    pub fn zeros(
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
    ) -> Result<Self> {
        check_geometry(in_channels, out_channels, kernel_h, kernel_w)?;
        Ok(ConvParams {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            weights: vec![0.0; in_channels * out_channels * kernel_h * kernel_w],
            biases: vec![0.0; out_channels],
        })
    }

    /// Gaussian weights with standard deviation `sqrt(2 / fan_in)`, zero biases.
    pub fn he_normal<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut p = Self::zeros(in_channels, out_channels, kernel_h, kernel_w)?;
        let std = (2.0 / p.fan_in() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("std is positive and finite");
        for w in &mut p.weights {
            *w = normal.sample(rng);
        }
        Ok(p)
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel_h(&self) -> usize {
        self.kernel_h
    }

    pub fn kernel_w(&self) -> usize {
        self.kernel_w
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    /// `in_channels * out_channels * kernel_h * kernel_w`.
    pub fn weight_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn weight(&self, o: usize, c: usize, dy: usize, dx: usize) -> f64 {
        self.weights[((o * self.in_channels + c) * self.kernel_h + dy) * self.kernel_w + dx]
    }

    pub fn same_geometry(&self, other: &ConvParams) -> bool {
        self.in_channels == other.in_channels
            && self.out_channels == other.out_channels
            && self.kernel_h == other.kernel_h
            && self.kernel_w == other.kernel_w
    }
}

fn check_geometry(
    in_channels: usize,
    out_channels: usize,
    kernel_h: usize,
    kernel_w: usize,
) -> Result<()> {
    if in_channels == 0 || out_channels == 0 {
        return Err(Error::InvalidSpec(format!(
            "channel counts must be positive, got {in_channels} -> {out_channels}"
        )));
    }
    if kernel_h.is_multiple_of(2) || kernel_w.is_multiple_of(2) {
        return Err(Error::InvalidSpec(format!(
            "kernel sizes must be odd and positive, got {kernel_h}x{kernel_w}"
        )));
    }
    Ok(())
}

/// Gradients of one convolution.
#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

fn im2col(input: &Tensor, kh: usize, kw: usize) -> Vec<f64> {
    let Shape {
        channels,
        height,
        width,
    } = input.shape();
    let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
    let hw = height * width;
    let mut cols = vec![0.0; channels * kh * kw * hw];
    for c in 0..channels {
        let src = input.channel(c);
        for dy in 0..kh {
            for dx in 0..kw {
                let row = &mut cols[((c * kh + dy) * kw + dx) * hw..][..hw];
                // Valid output columns are those whose source x = x + dx - pw lies in [0, width).
                let x_lo = pw.saturating_sub(dx);
                let x_hi = (width + pw).saturating_sub(dx).min(width);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..height {
                    let sy = y + dy;
                    if sy < ph || sy - ph >= height {
                        continue;
                    }
                    let sy = sy - ph;
                    let sx_lo = x_lo + dx - pw;
                    let n = x_hi - x_lo;
                    row[y * width + x_lo..y * width + x_hi]
                        .copy_from_slice(&src[sy * width + sx_lo..sy * width + sx_lo + n]);
                }
            }
        }
    }
    cols
}

/// Scatter-adds an im2col-shaped buffer back onto the input grid.
fn col2im(cols: &[f64], shape: Shape, kh: usize, kw: usize) -> Tensor {
    let Shape {
        channels,
        height,
        width,
    } = shape;
    let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
    let hw = height * width;
    let mut out = vec![0.0; shape.len()];
    for c in 0..channels {
        let dst = &mut out[c * hw..(c + 1) * hw];
        for dy in 0..kh {
            for dx in 0..kw {
                let row = &cols[((c * kh + dy) * kw + dx) * hw..][..hw];
                let x_lo = pw.saturating_sub(dx);
                let x_hi = (width + pw).saturating_sub(dx).min(width);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..height {
                    let sy = y + dy;
                    if sy < ph || sy - ph >= height {
                        continue;
                    }
                    let sy = sy - ph;
                    let sx_lo = x_lo + dx - pw;
                    let n = x_hi - x_lo;
                    let d = &mut dst[sy * width + sx_lo..sy * width + sx_lo + n];
                    for (d, s) in d.iter_mut().zip(&row[y * width + x_lo..y * width + x_hi]) {
                        *d += s;
                    }
                }
            }
        }
    }
    Tensor::from_raw(shape, out)
}

/// Row-major `c = alpha * a * b + beta * c` where `a` is `m x k` and `b` is
/// `k x n`, each with explicit (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices cover every index reached through the given strides:
    // a is m x k, b is k x n, c is m x n, each densely packed in one of the two
    // row/column orders, as asserted above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Matrix view into a flat slice: element `(i, j)` lives at `offset + i * rows + j * cols`.
#[derive(Clone, Copy)]
struct View {
    offset: usize,
    rows: usize,
    cols: usize,
}

impl View {
    fn new(offset: usize, rows: usize, cols: usize) -> Self {
        View { offset, rows, cols }
    }

    fn last(&self, r: usize, c: usize) -> usize {
        self.offset + (r - 1) * self.rows + (c - 1) * self.cols
    }
}

/// `c = a * b + beta * c` over strided views; `a` is `m x k`, `b` is `k x n`.
#[allow(clippy::too_many_arguments)]
fn gemm_view(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    av: View,
    b: &[f64],
    bv: View,
    beta: f64,
    c: &mut [f64],
    cv: View,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    assert!(av.last(m, k) < a.len() && bv.last(k, n) < b.len() && cv.last(m, n) < c.len());
    // SAFETY: every view has nonnegative strides and its furthest element is in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr().add(av.offset),
            av.rows as isize,
            av.cols as isize,
            b.as_ptr().add(bv.offset),
            bv.rows as isize,
            bv.cols as isize,
            beta,
            c.as_mut_ptr().add(cv.offset),
            cv.rows as isize,
            cv.cols as isize,
        );
    }
}

/// Zero-bordered copy of the input for the shifted-product path.
///
/// Each channel is laid out on rows of `wide = width + kw - 1` samples,
/// followed by `kw - 1` spare zeros, so that kernel tap `(dy, dx)` for every
/// output position is one contiguous run starting at `dy * wide + dx`. Output
/// is computed on the same wide rows and the extra columns are discarded.
struct Padded {
    wide: usize,
    stride: usize,
    data: Vec<f64>,
}

impl Padded {
    fn new(input: &Tensor, kh: usize, kw: usize) -> Self {
        let (h, w) = (input.height(), input.width());
        let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
        let wide = w + kw - 1;
        let stride = (h + kh - 1) * wide + kw - 1;
        let mut data = vec![0.0; input.channels() * stride];
        for c in 0..input.channels() {
            let src = input.channel(c);
            for y in 0..h {
                let at = c * stride + (y + ph) * wide + pw;
                data[at..at + w].copy_from_slice(&src[y * w..(y + 1) * w]);
            }
        }
        Padded { wide, stride, data }
    }
}

/// Wide channels with runs of `wide` samples cut back to `width`.
fn crop_wide(
    data: &[f64],
    channel_stride: usize,
    wide: usize,
    shape: Shape,
    row0: usize,
    col0: usize,
) -> Tensor {
    let mut out = Vec::with_capacity(shape.len());
    for c in 0..shape.channels {
        for y in 0..shape.height {
            let at = c * channel_stride + (y + row0) * wide + col0;
            out.extend_from_slice(&data[at..at + shape.width]);
        }
    }
    Tensor::from_raw(shape, out)
}

/// Wide-input layers skip im2col, whose buffer grows past cache.
fn use_shifted(params: &ConvParams) -> bool {
    params.in_channels >= 8 && params.kernel_h * params.kernel_w > 1
}

fn forward_shifted(input: &Tensor, params: &ConvParams) -> Tensor {
    let (kh, kw) = (params.kernel_h, params.kernel_w);
    let (o, c, taps) = (params.out_channels, params.in_channels, kh * kw);
    let p = Padded::new(input, kh, kw);
    let n = input.height() * p.wide;
    let mut out = Vec::with_capacity(o * n);
    for &b in &params.biases {
        out.extend(std::iter::repeat_n(b, n));
    }
    for dy in 0..kh {
        for dx in 0..kw {
            gemm_view(
                o,
                c,
                n,
                &params.weights,
                View::new(dy * kw + dx, c * taps, taps),
                &p.data,
                View::new(dy * p.wide + dx, p.stride, 1),
                1.0,
                &mut out,
                View::new(0, n, 1),
            );
        }
    }
    crop_wide(
        &out,
        n,
        p.wide,
        Shape::new(o, input.height(), input.width()),
        0,
        0,
    )
}

fn backward_shifted(input: &Tensor, params: &ConvParams, grad_out: &Tensor) -> ConvGrads {
    let (kh, kw) = (params.kernel_h, params.kernel_w);
    let (o, c, taps) = (params.out_channels, params.in_channels, kh * kw);
    let (h, w) = (input.height(), input.width());
    let p = Padded::new(input, kh, kw);
    let n = h * p.wide;

    // Upstream gradient on wide rows, zero in the discarded columns.
    let mut dy_wide = vec![0.0; o * n];
    for oc in 0..o {
        let src = grad_out.channel(oc);
        for y in 0..h {
            dy_wide[oc * n + y * p.wide..][..w].copy_from_slice(&src[y * w..(y + 1) * w]);
        }
    }

    let mut grad_w = vec![0.0; o * c * taps];
    let mut grad_p = vec![0.0; c * p.stride];
    for dy in 0..kh {
        for dx in 0..kw {
            let tap = dy * kw + dx;
            let shift = dy * p.wide + dx;
            // dW[:, :, tap] (o x c) = dY (o x n) * P_shift^T (n x c)
            gemm_view(
                o,
                n,
                c,
                &dy_wide,
                View::new(0, n, 1),
                &p.data,
                View::new(shift, 1, p.stride),
                0.0,
                &mut grad_w,
                View::new(tap, c * taps, taps),
            );
            // dP_shift (c x n) += W[:, :, tap]^T (c x o) * dY (o x n)
            gemm_view(
                c,
                o,
                n,
                &params.weights,
                View::new(tap, taps, c * taps),
                &dy_wide,
                View::new(0, n, 1),
                1.0,
                &mut grad_p,
                View::new(shift, p.stride, 1),
            );
        }
    }
    let grad_b = (0..o).map(|i| grad_out.channel(i).iter().sum()).collect();
    ConvGrads {
        input: crop_wide(
            &grad_p,
            p.stride,
            p.wide,
            input.shape(),
            (kh - 1) / 2,
            (kw - 1) / 2,
        ),
        weights: grad_w,
        biases: grad_b,
    }
}

fn check_input(input: &Tensor, params: &ConvParams) -> Result<()> {
    if input.channels() != params.in_channels {
        return Err(Error::ShapeMismatch {
            left: input.shape(),
            right: Shape::new(params.in_channels, input.height(), input.width()),
        });
    }
    Ok(())
}

/// Same-size output: `out[o][y][x] = b[o] + sum w[o][c][dy][dx] * in_padded[c][y+dy][x+dx]`.
pub fn conv2d_forward(input: &Tensor, params: &ConvParams) -> Result<Tensor> {
    check_input(input, params)?;
    if use_shifted(params) {
        return Ok(forward_shifted(input, params));
    }
    let (h, w) = (input.height(), input.width());
    let hw = h * w;
    let out_shape = Shape::new(params.out_channels, h, w);
    let mut out = Vec::with_capacity(out_shape.len());
    for &b in &params.biases {
        out.extend(std::iter::repeat_n(b, hw));
    }
    let k = params.fan_in();
    let owned;
    let cols: &[f64] = if params.kernel_h == 1 && params.kernel_w == 1 {
        input.data()
    } else {
        owned = im2col(input, params.kernel_h, params.kernel_w);
        &owned
    };
    gemm(
        params.out_channels,
        k,
        hw,
        &params.weights,
        (k as isize, 1),
        cols,
        (hw as isize, 1),
        1.0,
        &mut out,
    );
    Ok(Tensor::from_raw(out_shape, out))
}

/// Exact gradients of [`conv2d_forward`] given the upstream gradient.
pub fn conv2d_backward(
    input: &Tensor,
    params: &ConvParams,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    check_input(input, params)?;
    let expected = Shape::new(params.out_channels, input.height(), input.width());
    if grad_out.shape() != expected {
        return Err(Error::ShapeMismatch {
            left: grad_out.shape(),
            right: expected,
        });
    }
    if use_shifted(params) {
        return Ok(backward_shifted(input, params, grad_out));
    }
    let hw = input.height() * input.width();
    let k = params.fan_in();
    let o = params.out_channels;
    let single = params.kernel_h == 1 && params.kernel_w == 1;
    let owned;
    let cols: &[f64] = if single {
        input.data()
    } else {
        owned = im2col(input, params.kernel_h, params.kernel_w);
        &owned
    };

    // dW (o x k) = dY (o x hw) * cols^T (hw x k)
    let mut grad_w = vec![0.0; o * k];
    gemm(
        o,
        hw,
        k,
        grad_out.data(),
        (hw as isize, 1),
        cols,
        (1, hw as isize),
        0.0,
        &mut grad_w,
    );

    let grad_b = (0..o).map(|i| grad_out.channel(i).iter().sum()).collect();

    // dcols (k x hw) = W^T (k x o) * dY (o x hw)
    let mut grad_cols = vec![0.0; k * hw];
    gemm(
        k,
        o,
        hw,
        &params.weights,
        (1, k as isize),
        grad_out.data(),
        (hw as isize, 1),
        0.0,
        &mut grad_cols,
    );
    let grad_input = if single {
        Tensor::from_raw(input.shape(), grad_cols)
    } else {
        col2im(&grad_cols, input.shape(), params.kernel_h, params.kernel_w)
    };

    Ok(ConvGrads {
        input: grad_input,
        weights: grad_w,
        biases: grad_b,
    })
}
