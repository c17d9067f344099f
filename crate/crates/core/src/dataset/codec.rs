//! Block-transform codec proxy: 8x8 orthonormal DCT with uniform scalar
//! quantization. It produces the same artifact classes as intra coding at
//! low rates (blocking at block edges, ringing around strong edges) with a
//! quantizer step that follows the usual QP mapping, `2^((qp - 4) / 6)`.

use std::sync::OnceLock;

use crate::tensor::{quantize_sample, Plane};

use super::QualityLevel;

pub const BLOCK: usize = 8;

type Block = [[f64; BLOCK]; BLOCK];

/// Row `k` is the k-th orthonormal DCT-II basis vector.
fn dct_basis() -> &'static Block {
    static BASIS: OnceLock<Block> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; BLOCK]; BLOCK];
        let n = BLOCK as f64;
        for (k, row) in m.iter_mut().enumerate() {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            for (i, v) in row.iter_mut().enumerate() {
                *v = scale
                    * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * n)).cos();
            }
        }
        m
    })
}

/// `a * b` when `ta` is false, `a^T * b` when true.
fn matmul(a: &Block, b: &Block, ta: bool) -> Block {
    let mut out = [[0.0; BLOCK]; BLOCK];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..BLOCK)
                .map(|k| if ta { a[k][i] } else { a[i][k] } * b[k][j])
                .sum();
        }
    }
    out
}

fn transpose(a: &Block) -> Block {
    let mut t = *a;
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            t[j][i] = v;
        }
    }
    t
}

fn forward_dct(block: &Block) -> Block {
    let c = dct_basis();
    // C * B * C^T
    matmul(&matmul(c, block, false), &transpose(c), false)
}

fn inverse_dct(coeffs: &Block) -> Block {
    let c = dct_basis();
    // C^T * X * C
    matmul(&matmul(c, coeffs, true), c, false)
}

/// Quantizes and reconstructs `plane` block by block. Edge blocks are filled
/// by replicating the last row/column, coded, then cropped.
pub fn degrade(plane: &Plane, q: QualityLevel) -> Plane {
    let (w, h) = (plane.width(), plane.height());
    let step = q.qstep();
    let mut out = vec![0u8; w * h];
    for by in (0..h).step_by(BLOCK) {
        for bx in (0..w).step_by(BLOCK) {
            let mut block = [[0.0; BLOCK]; BLOCK];
            for (i, row) in block.iter_mut().enumerate() {
                let y = (by + i).min(h - 1);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = f64::from(plane.get((bx + j).min(w - 1), y));
                }
            }
            let mut coeffs = forward_dct(&block);
            for v in coeffs.iter_mut().flatten() {
                *v = (*v / step).round() * step;
            }
            let rec = inverse_dct(&coeffs);
            for (i, row) in rec.iter().enumerate().take(h - by) {
                for (j, &v) in row.iter().enumerate().take(w - bx) {
                    out[(by + i) * w + bx + j] = quantize_sample(v);
                }
            }
        }
    }
    Plane::new(w, h, out).expect("same dimensions as input")
}
