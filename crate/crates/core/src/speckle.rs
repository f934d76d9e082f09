//! Multiplicative laser-speckle forward model.
//!
//! A fully developed speckle pattern is the squared magnitude of a low-passed
//! circular complex Gaussian field. Partial coherence is modeled by blending
//! that pattern with a constant field, which scales the contrast linearly and
//! keeps the mean at one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::imgprep::{RasterImage, CHANNELS};
use crate::par;

const MIN_SIDE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleParams {
    /// Standard deviation, in pixels, of the Gaussian low-pass applied to the complex field.
    pub grain_size: f64,
    /// Target speckle contrast (std/mean) of the multiplicative factor, in `[0, 1]`.
    pub contrast: f64,
    pub per_channel_independent: bool,
    pub seed: u64,
}

impl SpeckleParams {
    pub fn new(grain_size: f64, contrast: f64, seed: u64) -> Self {
        Self { grain_size, contrast, per_channel_independent: true, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grain_size > 0.0 && self.grain_size.is_finite()) {
            return Err(Error::Config(format!("grain size {} must be positive", self.grain_size)));
        }
        if !(0.0..=1.0).contains(&self.contrast) {
            return Err(Error::Config(format!("contrast {} must lie in [0, 1]", self.contrast)));
        }
        Ok(())
    }
}

/// Per-pixel, per-channel multiplicative factors (interleaved like [`RasterImage`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleField {
    width: usize,
    height: usize,
    factors: Vec<f64>,
}

impl SpeckleField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.factors.iter().skip(c).step_by(CHANNELS).copied().collect()
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-0.5 * d * d / (sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Valid-mode separable convolution of a `(w + 2r) x (h + 2r)` plane down to `w x h`.
fn blur_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = kernel.len() / 2;
    let pw = w + 2 * r;
    let ph = h + 2 * r;
    let mut tmp = vec![0.0; w * ph];
    for y in 0..ph {
        let row = &src[y * pw..(y + 1) * pw];
        for x in 0..w {
            tmp[y * w + x] = kernel.iter().zip(&row[x..x + kernel.len()]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel.iter().enumerate().map(|(i, k)| k * tmp[(y + i) * w + x]).sum();
        }
    }
    out
}

/// One fully developed speckle plane (mean exactly 1 up to rounding).
fn developed_plane(w: usize, h: usize, grain: f64, seed: u64, stream: u64) -> Vec<f64> {
    let kernel = gaussian_kernel(grain);
    let r = kernel.len() / 2;
    let n = (w + 2 * r) * (h + 2 * r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for _ in 0..n {
        re.push(StandardNormal.sample(&mut rng));
        im.push(StandardNormal.sample(&mut rng));
    }
    let re = blur_valid(&re, w, h, &kernel);
    let im = blur_valid(&im, w, h, &kernel);
    let mut intensity: Vec<f64> = re.iter().zip(&im).map(|(a, b)| a * a + b * b).collect();
    let mean = par::pairwise_sum(&intensity) / intensity.len() as f64;
    intensity.iter_mut().for_each(|v| *v /= mean);
    intensity
}

/// Draws a speckle field. Channel `c` uses RNG stream `c` of the master seed
/// (stream 0 for all channels when the field is shared), so parallel and
/// sequential synthesis agree bit for bit.
pub fn synthesize_field(w: usize, h: usize, params: &SpeckleParams) -> Result<SpeckleField> {
    params.validate()?;
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(Error::Dimensions(format!("speckle fields need at least {MIN_SIDE}x{MIN_SIDE}, got {w}x{h}")));
    }
    let n = w * h;
    let blend = |s: f64| (1.0 - params.contrast) + params.contrast * s;
    let planes: Vec<Vec<f64>> = if params.contrast == 0.0 {
        vec![vec![1.0; n]; CHANNELS]
    } else if params.per_channel_independent {
        par::map_range(CHANNELS, |c| developed_plane(w, h, params.grain_size, params.seed, c as u64))
    } else {
        vec![developed_plane(w, h, params.grain_size, params.seed, 0); CHANNELS]
    };
    let mut factors = Vec::with_capacity(n * CHANNELS);
    for i in 0..n {
        for p in &planes {
            factors.push(blend(p[i]));
        }
    }
    Ok(SpeckleField { width: w, height: h, factors })
}

/// `clamp(img * field, 0, 1)` per pixel and channel.
pub fn apply_speckle(img: &RasterImage, field: &SpeckleField) -> Result<RasterImage> {
    if img.dims() != (field.width, field.height) {
        return Err(Error::Dimensions(format!(
            "image {:?} does not match field {}x{}",
            img.dims(),
            field.width,
            field.height
        )));
    }
    let data = img.data().iter().zip(&field.factors).map(|(v, f)| (v * f).clamp(0.0, 1.0)).collect();
    RasterImage::new(img.width(), img.height(), data)
}

/// Speckle contrast `std / mean` of one channel, with the population standard deviation.
pub fn speckle_contrast(img: &RasterImage, channel: usize) -> Result<f64> {
    if channel >= CHANNELS {
        return Err(Error::Config(format!("channel {channel} out of range")));
    }
    contrast_of(&img.plane(channel))
}

pub(crate) fn contrast_of(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Degenerate("empty channel".into()));
    }
    let n = values.len() as f64;
    let mean = par::pairwise_sum(values) / n;
    if mean == 0.0 {
        return Err(Error::Degenerate("channel mean is zero".into()));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    Ok((par::pairwise_sum(&sq) / n).sqrt() / mean)
}
