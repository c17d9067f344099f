//! Procedural test images: multi-octave value noise for a natural-looking
//! spectrum, hard-edged shapes, an oriented texture patch, and mild noise.
//! They stand in for natural photographs when no corpus is at hand and
//! exercise both blocking (smooth areas) and ringing (edges) in the codec
//! proxy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{quantize_sample, Plane};

enum Shape {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Disk { cx: f64, cy: f64, r: f64 },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Shape::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) < r * r,
        }
    }
}

/// Random lattice values, smoothly interpolated between lattice points.
struct ValueNoise {
    cell: f64,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(width: usize, height: usize, cell: f64, rng: &mut impl Rng) -> Self {
        let cols = (width as f64 / cell) as usize + 2;
        let rows = (height as f64 / cell) as usize + 2;
        ValueNoise {
            cell,
            cols,
            lattice: (0..cols * rows)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = (x / self.cell, y / self.cell);
        let (ix, iy) = (gx as usize, gy as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(gx - ix as f64), smooth(gy - iy as f64));
        let v = |cx: usize, cy: usize| self.lattice[cy * self.cols + cx];
        let top = v(ix, iy) * (1.0 - tx) + v(ix + 1, iy) * tx;
        let bottom = v(ix, iy + 1) * (1.0 - tx) + v(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// Deterministic in `(width, height, seed)`.
pub fn synthetic_image(width: usize, height: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);

    let base = rng.random_range(70.0..180.0);
    let gx = rng.random_range(-60.0..60.0) / w;
    let gy = rng.random_range(-60.0..60.0) / h;

    // Coarser octaves carry more energy.
    let octaves: Vec<(ValueNoise, f64)> = [32.0, 16.0, 8.0, 4.0, 2.0]
        .iter()
        .zip([48.0, 30.0, 20.0, 12.0, 6.0])
        .map(|(&cell, amp)| {
            (
                ValueNoise::new(width, height, cell, &mut rng),
                amp * rng.random_range(0.6..1.2),
            )
        })
        .collect();

    let n_shapes = rng.random_range(6..16);
    let shapes: Vec<(Shape, f64)> = (0..n_shapes)
        .map(|_| {
            let shape = if rng.random_bool(0.5) {
                let x0 = rng.random_range(0.0..w);
                let y0 = rng.random_range(0.0..h);
                Shape::Rect {
                    x0,
                    y0,
                    x1: x0 + rng.random_range(4.0..(w / 2.0).max(5.0)),
                    y1: y0 + rng.random_range(4.0..(h / 2.0).max(5.0)),
                }
            } else {
                Shape::Disk {
                    cx: rng.random_range(0.0..w),
                    cy: rng.random_range(0.0..h),
                    r: rng.random_range(3.0..(w.min(h) / 4.0).max(4.0)),
                }
            };
            (shape, rng.random_range(-70.0..70.0))
        })
        .collect();

    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let freq = rng.random_range(0.3..1.2);
    let amp = rng.random_range(10.0..30.0);
    let (fx, fy) = (freq * angle.cos(), freq * angle.sin());
    let (tx, ty) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
    let tr = rng.random_range(0.2..0.5) * w.min(h);

    let mut samples = Vec::with_capacity(width * height);
    for yi in 0..height {
        for xi in 0..width {
            let (x, y) = (xi as f64, yi as f64);
            let mut v = base + gx * x + gy * y;
            for (noise, a) in &octaves {
                v += a * noise.at(x, y);
            }
            // Shapes shift the local level, so edges keep the texture underneath.
            for (s, offset) in &shapes {
                if s.contains(x, y) {
                    v += offset;
                }
            }
            let d2 = ((x - tx).powi(2) + (y - ty).powi(2)) / (tr * tr);
            v += amp * (fx * x + fy * y).sin() * (-d2).exp();
            v += rng.random_range(-2.0..2.0);
            samples.push(quantize_sample(v));
        }
    }
    Plane::new(width, height, samples).expect("dimensions match sample count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_varied() {
        let a = synthetic_image(48, 40, 1);
        assert_eq!(a, synthetic_image(48, 40, 1));
        assert_ne!(a, synthetic_image(48, 40, 2));
        let min = *a.samples().iter().min().unwrap();
        let max = *a.samples().iter().max().unwrap();
        assert!(max - min > 40);
    }

    #[test]
    fn tiny_sizes() {
        for (w, h) in [(1, 1), (2, 7), (9, 3)] {
            assert_eq!(synthetic_image(w, h, 3).samples().len(), w * h);
        }
    }
}
