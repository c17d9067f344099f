//! Dense feature maps and 8-bit sample planes.
//!
//! A [`Tensor`] is a rank-3 `channels x height x width` array of `f64` stored
//! row-major in `(channel, row, column)` order. Network inputs, targets, and
//! every intermediate activation are tensors. A [`Plane`] is the storage form
//! of one image component (Y, U, or V) as 8-bit samples.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape {
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of samples in one channel.
    pub const fn plane_len(&self) -> usize {
        self.height * self.width
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking dimensions, length, and finiteness.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidTensor(format!(
                "every dimension must be positive, got {shape}"
            )));
        }
        if data.len() != shape.len() {
            return Err(Error::InvalidTensor(format!(
                "{shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Tensor::new"));
        }
        Ok(Tensor { shape, data })
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    /// # Panics
    /// If any dimension is zero or `value` is not finite.
    pub fn filled(shape: Shape, value: f64) -> Self {
        assert!(
            !shape.is_empty(),
            "tensor dimensions must be positive: {shape}"
        );
        assert!(value.is_finite());
        Tensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Internal constructor for buffers produced by arithmetic in this crate.
    pub(crate) fn from_raw(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.shape.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.shape.height + y) * self.shape.width + x]
    }

    fn zip_with(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                left: self.shape,
                right: other.shape,
            });
        }
        let data: Vec<f64> = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(op));
        }
        Ok(Tensor::from_raw(self.shape, data))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Result<Tensor> {
        let data: Vec<f64> = self.data.iter().map(|v| v * factor).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scale"));
        }
        Ok(Tensor::from_raw(self.shape, data))
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Maps a 1-channel tensor back to 8-bit samples: `v * 255`, rounded
    /// half-up, clamped to `[0, 255]`.
    pub fn to_plane(&self) -> Result<Plane> {
        if self.shape.channels != 1 {
            return Err(Error::ExpectedSingleChannel(self.shape.channels));
        }
        let samples = self
            .data
            .iter()
            .map(|&v| quantize_sample(v * 255.0))
            .collect();
        Ok(Plane {
            width: self.shape.width,
            height: self.shape.height,
            samples,
        })
    }
}

/// Rounds half-up and clamps to the 8-bit range.
pub(crate) fn quantize_sample(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// One 8-bit image component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidPlane(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::InvalidPlane(format!(
                "{width}x{height} needs {} samples, got {}",
                width * height,
                samples.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            samples,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0);
        Plane {
            width,
            height,
            samples: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.samples[y * self.width..(y + 1) * self.width]
    }

    /// Copies the `width x height` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Plane> {
        if x + width > self.width || y + height > self.height {
            return Err(Error::InvalidDimensions(format!(
                "crop {width}x{height}+{x}+{y} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut samples = Vec::with_capacity(width * height);
        for row in y..y + height {
            samples.extend_from_slice(&self.row(row)[x..x + width]);
        }
        Plane::new(width, height, samples)
    }

    /// 1-channel tensor with samples scaled to `[0, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.samples.iter().map(|&s| f64::from(s) / 255.0).collect();
        Tensor::from_raw(Shape::new(1, self.height, self.width), data)
    }
}

impl From<&Plane> for Tensor {
    fn from(p: &Plane) -> Self {
        p.to_tensor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(data: &[f64]) -> Tensor {
        Tensor::new(Shape::new(1, 1, data.len()), data.to_vec()).unwrap()
    }

    #[test]
    fn plane_scaling_endpoints() {
        assert_eq!(Plane::filled(1, 1, 255).to_tensor().data(), &[1.0]);
        assert_eq!(Plane::filled(1, 1, 0).to_tensor().data(), &[0.0]);
    }

    #[test]
    fn plane_scaling_matches_rational_division() {
        // 51/255 = 1/5 and 102/255 = 2/5 exactly; f64 division is correctly rounded.
        let p = Plane::new(1, 2, vec![51, 102]).unwrap();
        let v = p.to_tensor();
        assert_eq!(v.shape(), Shape::new(1, 2, 1));
        assert_eq!(v.data(), &[1.0 / 5.0, 2.0 / 5.0]);
    }

    #[test]
    fn to_plane_clamps_and_rounds_half_up() {
        assert_eq!(t(&[1.2]).to_plane().unwrap().samples(), &[255]);
        assert_eq!(t(&[-0.1]).to_plane().unwrap().samples(), &[0]);
        assert_eq!(t(&[0.5]).to_plane().unwrap().samples(), &[128]);
    }

    #[test]
    fn to_plane_rejects_multichannel() {
        let x = Tensor::zeros(Shape::new(2, 1, 1));
        let err = x.to_plane().unwrap_err();
        assert!(err.to_string().contains("expected single channel"), "{err}");
    }

    #[test]
    fn elementwise_ops() {
        assert_eq!(
            t(&[1.0, 2.0]).add(&t(&[3.0, 4.0])).unwrap().data(),
            &[4.0, 6.0]
        );
        let x = t(&[0.3, -7.0, 2.5]);
        assert!(x.sub(&x).unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(t(&[1.0, 2.0]).scale(0.5).unwrap().data(), &[0.5, 1.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = Tensor::zeros(Shape::new(1, 2, 3));
        let b = Tensor::zeros(Shape::new(1, 3, 2));
        let msg = a.add(&b).unwrap_err().to_string();
        assert!(msg.contains("1x2x3") && msg.contains("1x3x2"), "{msg}");
    }

    #[test]
    fn constructor_validates() {
        assert!(Tensor::new(Shape::new(0, 1, 1), vec![]).is_err());
        assert!(Tensor::new(Shape::new(1, 1, 2), vec![1.0]).is_err());
        assert!(Tensor::new(Shape::new(1, 1, 1), vec![f64::NAN]).is_err());
        assert!(t(&[f64::MAX]).scale(10.0).is_err());
        assert!(Plane::new(2, 2, vec![0; 3]).is_err());
    }

    fn plane_strategy() -> impl Strategy<Value = Plane> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h)
                .prop_map(move |s| Plane::new(w, h, s).unwrap())
        })
    }

    proptest! {
        #[test]
        fn plane_tensor_round_trip(p in plane_strategy()) {
            prop_assert_eq!(p.to_tensor().to_plane().unwrap(), p);
        }

        #[test]
        fn add_commutes_and_associates(
            v in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 1..40)
        ) {
            let a = t(&v.iter().map(|x| x.0).collect::<Vec<_>>());
            let b = t(&v.iter().map(|x| x.1).collect::<Vec<_>>());
            let c = t(&v.iter().map(|x| x.2).collect::<Vec<_>>());
            let ab = a.add(&b).unwrap();
            let ba = b.add(&a).unwrap();
            prop_assert_eq!(ab.data(), ba.data());
            let left = ab.add(&c).unwrap();
            let right = a.add(&b.add(&c).unwrap()).unwrap();
            for (l, r) in left.data().iter().zip(right.data()) {
                prop_assert!((l - r).abs() <= 1e-12);
            }
        }
    }
}
