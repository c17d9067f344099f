use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub fn relu_forward(t: &Tensor) -> Tensor {
    Tensor::from_raw(t.shape(), t.data().iter().map(|&v| v.max(0.0)).collect())
}

/// Passes `grad_out` where `input > 0`; the subgradient at exactly zero is zero.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch {
            left: input.shape(),
            right: grad_out.shape(),
        });
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Ok(Tensor::from_raw(input.shape(), data))
}

/// Stacks tensors along the channel axis in argument order.
pub fn concat_channels(parts: &[Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidTensor("cannot concatenate zero tensors".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut channels = 0;
    for p in parts {
        if p.height() != h || p.width() != w {
            return Err(Error::ShapeMismatch {
                left: first.shape(),
                right: p.shape(),
            });
        }
        channels += p.channels();
    }
    if parts.len() == 1 {
        return Ok(first.clone());
    }
    let mut data = Vec::with_capacity(channels * h * w);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Ok(Tensor::from_raw(Shape::new(channels, h, w), data))
}

/// Inverse of [`concat_channels`]: cuts `t` into consecutive channel groups.
pub fn split_channels(t: &Tensor, sizes: &[usize]) -> Result<Vec<Tensor>> {
    let total: usize = sizes.iter().sum();
    if total != t.channels() || sizes.contains(&0) {
        return Err(Error::InvalidTensor(format!(
            "cannot split {} channels into {sizes:?}",
            t.channels()
        )));
    }
    let plane = t.height() * t.width();
    let mut start = 0;
    Ok(sizes
        .iter()
        .map(|&c| {
            let data = t.data()[start * plane..(start + c) * plane].to_vec();
            start += c;
            Tensor::from_raw(Shape::new(c, t.height(), t.width()), data)
        })
        .collect())
}
