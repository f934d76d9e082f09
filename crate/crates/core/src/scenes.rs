//! Procedural clean scenes for synthetic paired datasets and self-tests:
//! a shaded background with overlapping flat and shaded shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imgprep::{RasterImage, CHANNELS};

enum Shape {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Disk { cx: f64, cy: f64, r: f64 },
    Band { nx: f64, ny: f64, offset: f64, half_width: f64 },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Shape::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Shape::Band { nx, ny, offset, half_width } => (x * nx + y * ny - offset).abs() <= half_width,
        }
    }
}

fn color(rng: &mut ChaCha8Rng) -> [f64; CHANNELS] {
    [rng.random_range(0.1..0.75), rng.random_range(0.1..0.75), rng.random_range(0.1..0.75)]
}

/// A deterministic `w x h` scene with intensities in roughly `[0.1, 0.8]`.
pub fn test_scene(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (wf, hf) = (w as f64, h as f64);
    let bg0 = color(&mut rng);
    let bg1 = color(&mut rng);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (gx, gy) = (angle.cos(), angle.sin());

    let n_shapes = rng.random_range(4..9);
    let mut shapes = Vec::with_capacity(n_shapes);
    for _ in 0..n_shapes {
        let shape = match rng.random_range(0..3) {
            0 => {
                let x0 = rng.random_range(0.0..0.8) * wf;
                let y0 = rng.random_range(0.0..0.8) * hf;
                Shape::Rect {
                    x0,
                    y0,
                    x1: x0 + rng.random_range(0.1..0.5) * wf,
                    y1: y0 + rng.random_range(0.1..0.5) * hf,
                }
            }
            1 => Shape::Disk {
                cx: rng.random_range(0.1..0.9) * wf,
                cy: rng.random_range(0.1..0.9) * hf,
                r: rng.random_range(0.06..0.25) * wf.min(hf),
            },
            _ => {
                let a: f64 = rng.random_range(0.0..std::f64::consts::PI);
                let (nx, ny) = (a.cos(), a.sin());
                let offset = nx * rng.random_range(0.2..0.8) * wf + ny * rng.random_range(0.2..0.8) * hf;
                Shape::Band { nx, ny, offset, half_width: rng.random_range(0.02..0.08) * wf.min(hf) }
            }
        };
        let shaded = rng.random_bool(0.3);
        shapes.push((shape, color(&mut rng), shaded));
    }

    RasterImage::from_fn(w, h, |x, y, c| {
        let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
        let t = 0.5 + 0.5 * ((xf / wf - 0.5) * gx + (yf / hf - 0.5) * gy);
        let mut v = bg0[c] * (1.0 - t) + bg1[c] * t;
        for (shape, col, shaded) in &shapes {
            if shape.contains(xf, yf) {
                v = if *shaded { col[c] * (0.75 + 0.25 * (yf / hf)) } else { col[c] };
            }
        }
        v.clamp(0.0, 1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_varied() {
        let a = test_scene(64, 48, 3);
        assert_eq!(a, test_scene(64, 48, 3));
        assert_ne!(a, test_scene(64, 48, 4));
        assert_eq!(a.dims(), (64, 48));
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let min = a.data().iter().copied().fold(f64::MAX, f64::min);
        let max = a.data().iter().copied().fold(f64::MIN, f64::max);
        assert!(max - min > 0.1);
    }
}
