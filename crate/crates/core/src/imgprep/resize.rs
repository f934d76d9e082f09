use crate::error::{Error, Result};
use crate::imgprep::raster::{RasterImage, CHANNELS};
use crate::par;

/// Catmull-Rom cubic (`a = -0.5`).
pub(crate) fn cubic_weight(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Four clamped source indices and weights for each output coordinate,
/// using pixel-center alignment.
fn taps(input: usize, output: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|i| {
            let s = (i as f64 + 0.5) * scale - 0.5;
            let base = s.floor();
            let frac = s - base;
            let mut idx = [0usize; 4];
            let mut w = [0f64; 4];
            for k in 0..4 {
                let pos = base as isize + k as isize - 1;
                idx[k] = pos.clamp(0, input as isize - 1) as usize;
                w[k] = cubic_weight(frac - (k as f64 - 1.0));
            }
            (idx, w)
        })
        .collect()
}

/// Separable bicubic resize with clamp-to-edge borders.
pub fn resize_bicubic(img: &RasterImage, out_w: usize, out_h: usize) -> Result<RasterImage> {
    let (w, h) = img.dims();
    if out_w < 4 || out_h < 4 || w < 4 || h < 4 {
        return Err(Error::Dimensions(format!(
            "bicubic resize needs at least 4x4 pixels on both sides (got {w}x{h} -> {out_w}x{out_h})"
        )));
    }
    let xt = taps(w, out_w);
    let yt = taps(h, out_h);
    let src = img.data();

    // horizontal pass: h rows of out_w pixels
    let mut tmp = vec![0.0; out_w * h * CHANNELS];
    par::for_each_chunk_mut(&mut tmp, out_w * CHANNELS, |y, row| {
        let srow = &src[y * w * CHANNELS..(y + 1) * w * CHANNELS];
        for (x, (idx, wt)) in xt.iter().enumerate() {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += wt[k] * srow[idx[k] * CHANNELS + c];
                }
                row[x * CHANNELS + c] = acc;
            }
        }
    });

    let mut out = vec![0.0; out_w * out_h * CHANNELS];
    let stride = out_w * CHANNELS;
    par::for_each_chunk_mut(&mut out, stride, |y, row| {
        let (idx, wt) = &yt[y];
        for (i, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..4 {
                acc += wt[k] * tmp[idx[k] * stride + i];
            }
            *v = acc.clamp(0.0, 1.0);
        }
    });
    RasterImage::new(out_w, out_h, out)
}
