//! Slanted-edge modulation transfer function.
//!
//! Per-row edge positions come from the centroid of the horizontal
//! derivative; a least-squares line through them gives the edge. Every pixel
//! is projected onto the edge normal and binned into an oversampled edge
//! spread function, which is differentiated, Hann-windowed and transformed.

use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::imgprep::{RasterImage, CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtfChannel {
    Luminance,
    Single(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtfConfig {
    /// ESF bins per pixel.
    pub oversample: usize,
    /// Divide out the response of the discrete derivative.
    pub derivative_correction: bool,
    pub max_frequency: f64,
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
}

impl Default for MtfConfig {
    fn default() -> Self {
        Self { oversample: 4, derivative_correction: true, max_frequency: 1.0, min_angle_deg: 1.0, max_angle_deg: 15.0 }
    }
}

/// MTF samples; frequencies in cycles/pixel, ascending from 0, modulus(0) = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MtfCurve {
    pub frequencies: Vec<f64>,
    pub modulus: Vec<f64>,
}

impl MtfCurve {
    pub fn new(frequencies: Vec<f64>, modulus: Vec<f64>) -> Result<Self> {
        if frequencies.len() != modulus.len() || frequencies.len() < 2 {
            return Err(Error::Config("an MTF curve needs at least two matching samples".into()));
        }
        if frequencies[0] != 0.0 || frequencies.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Config("MTF frequencies must start at 0 and strictly ascend".into()));
        }
        Ok(Self { frequencies, modulus })
    }

    pub fn from_fn(frequencies: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let modulus = frequencies.iter().map(|&q| f(q)).collect();
        Self::new(frequencies, modulus)
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn at(&self, f: f64) -> Option<f64> {
        let i = self.frequencies.partition_point(|&q| q <= f);
        if i == 0 || f > *self.frequencies.last()? {
            return None;
        }
        if i == self.frequencies.len() {
            return self.modulus.last().copied();
        }
        let (f0, f1) = (self.frequencies[i - 1], self.frequencies[i]);
        let (m0, m1) = (self.modulus[i - 1], self.modulus[i]);
        Some(m0 + (m1 - m0) * (f - f0) / (f1 - f0))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["freq_cyc_per_px", "modulus"])?;
        for (f, m) in self.frequencies.iter().zip(&self.modulus) {
            w.write_record([f.to_string(), m.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Frequency of the first downward crossing of half modulus, linearly interpolated.
pub fn mtf50(curve: &MtfCurve) -> Result<f64> {
    for i in 0..curve.modulus.len().saturating_sub(1) {
        let (m0, m1) = (curve.modulus[i], curve.modulus[i + 1]);
        if m0 >= 0.5 && m1 < 0.5 {
            let (f0, f1) = (curve.frequencies[i], curve.frequencies[i + 1]);
            return Ok(f0 + (m0 - 0.5) / (m0 - m1) * (f1 - f0));
        }
    }
    Err(Error::NoCrossing)
}

fn analysis_plane(roi: &RasterImage, channel: MtfChannel) -> Result<Vec<f64>> {
    match channel {
        MtfChannel::Luminance => {
            Ok(roi.data().chunks_exact(CHANNELS).map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).collect())
        }
        MtfChannel::Single(c) if c < CHANNELS => Ok(roi.plane(c)),
        MtfChannel::Single(c) => Err(Error::Config(format!("channel {c} out of range"))),
    }
}

/// Fitted edge `x = intercept + slope * y` (pixel-center coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFit {
    pub intercept: f64,
    pub slope: f64,
}

impl EdgeFit {
    pub fn angle_deg(&self) -> f64 {
        self.slope.atan().to_degrees()
    }
}

fn fit_edge(plane: &[f64], w: usize, h: usize) -> Result<EdgeFit> {
    let mut ys = Vec::with_capacity(h);
    let mut xs = Vec::with_capacity(h);
    let mut energy = 0.0;
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        let (mut num, mut den) = (0.0, 0.0);
        for x in 1..w - 1 {
            let d = (0.5 * (row[x + 1] - row[x - 1])).abs();
            num += d * x as f64;
            den += d;
        }
        energy += den;
        if den > 0.0 {
            ys.push(y as f64);
            xs.push(num / den);
        }
    }
    if energy / (h as f64) < 1e-3 || ys.len() < 2 {
        return Err(Error::Edge(format!("no detectable edge (mean row derivative energy {:.2e})", energy / h as f64)));
    }
    let n = ys.len() as f64;
    let my = ys.iter().sum::<f64>() / n;
    let mx = xs.iter().sum::<f64>() / n;
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = ys.iter().zip(&xs).map(|(y, x)| (y - my) * (x - mx)).sum();
    let slope = sxy / syy;
    Ok(EdgeFit { intercept: mx - slope * my, slope })
}

/// Computes the MTF of a region holding one near-vertical slanted edge.
pub fn mtf_slanted_edge(roi: &RasterImage, channel: MtfChannel, cfg: &MtfConfig) -> Result<MtfCurve> {
    let (w, h) = roi.dims();
    if w < 8 || h < 8 {
        return Err(Error::Dimensions(format!("slanted-edge ROI {w}x{h} is too small")));
    }
    if cfg.oversample == 0 {
        return Err(Error::Config("oversample must be positive".into()));
    }
    let plane = analysis_plane(roi, channel)?;
    let edge = fit_edge(&plane, w, h)?;
    let angle = edge.angle_deg().abs();
    if angle < cfg.min_angle_deg || angle > cfg.max_angle_deg {
        return Err(Error::Edge(format!(
            "edge angle {angle:.2} deg outside [{}, {}]",
            cfg.min_angle_deg, cfg.max_angle_deg
        )));
    }

    let cos = 1.0 / (1.0 + edge.slope * edge.slope).sqrt();
    let position = |y: usize| edge.intercept + edge.slope * y as f64;
    // distance range covered by every row
    let (mut lo, mut hi) = (f64::MIN, f64::MAX);
    for y in 0..h {
        lo = lo.max((0.0 - position(y)) * cos);
        hi = hi.min(((w - 1) as f64 - position(y)) * cos);
    }
    let step = 1.0 / cfg.oversample as f64;
    let n_bins = ((hi - lo) / step).floor() as usize;
    if n_bins < 16 {
        return Err(Error::Edge("edge too close to the ROI border".into()));
    }
    let mut sum = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for y in 0..h {
        for x in 0..w {
            let d = (x as f64 - position(y)) * cos;
            let k = ((d - lo) / step).floor();
            if k >= 0.0 && (k as usize) < n_bins {
                sum[k as usize] += plane[y * w + x];
                count[k as usize] += 1;
            }
        }
    }
    let esf = fill_empty_bins(&sum, &count)?;

    // central-difference line spread function
    let lsf: Vec<f64> = (1..n_bins - 1).map(|k| 0.5 * (esf[k + 1] - esf[k - 1])).collect();
    let m = lsf.len();
    let abs_total: f64 = lsf.iter().map(|v| v.abs()).sum();
    if abs_total == 0.0 {
        return Err(Error::Edge("flat edge spread function".into()));
    }
    let center = lsf.iter().enumerate().map(|(k, v)| k as f64 * v.abs()).sum::<f64>() / abs_total;
    let half = center.min((m - 1) as f64 - center).max(1.0);
    let windowed: Vec<Complex<f64>> = lsf
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let t = (k as f64 - center) / half;
            let wgt = if t.abs() <= 1.0 { 0.5 * (1.0 + (std::f64::consts::PI * t).cos()) } else { 0.0 };
            Complex::new(v * wgt, 0.0)
        })
        .collect();

    let mut spectrum = windowed;
    FftPlanner::new().plan_fft_forward(m).process(&mut spectrum);
    let dc = spectrum[0].norm();
    if dc == 0.0 {
        return Err(Error::Edge("zero line-spread integral".into()));
    }
    let span = m as f64 * step;
    let mut frequencies = Vec::new();
    let mut modulus = Vec::new();
    for (k, z) in spectrum.iter().enumerate().take(m / 2 + 1) {
        let f = k as f64 / span;
        if f > cfg.max_frequency + 1e-12 {
            break;
        }
        let mut v = z.norm() / dc;
        if cfg.derivative_correction && k > 0 {
            let arg = 2.0 * std::f64::consts::PI * f * step;
            v /= arg.sin() / arg;
        }
        frequencies.push(f);
        modulus.push(v);
    }
    modulus[0] = 1.0;
    MtfCurve::new(frequencies, modulus)
}

fn fill_empty_bins(sum: &[f64], count: &[usize]) -> Result<Vec<f64>> {
    let known: Vec<usize> = (0..sum.len()).filter(|&k| count[k] > 0).collect();
    if known.len() < 2 {
        return Err(Error::Edge("too few populated ESF bins".into()));
    }
    let mut out = vec![0.0; sum.len()];
    for k in 0..sum.len() {
        out[k] = if count[k] > 0 {
            sum[k] / count[k] as f64
        } else {
            let right = known.partition_point(|&j| j < k);
            let (a, b) = match right {
                0 => (known[0], known[1]),
                r if r == known.len() => (known[r - 2], known[r - 1]),
                r => (known[r - 1], known[r]),
            };
            let (va, vb) = (sum[a] / count[a] as f64, sum[b] / count[b] as f64);
            va + (vb - va) * (k as f64 - a as f64) / (b as f64 - a as f64)
        };
    }
    Ok(out)
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Renders a point-sampled edge from `dark` (left) to `bright` (right) whose
/// column position advances by `tan(angle)` per row, blurred by a Gaussian of
/// standard deviation `blur_sigma` pixels across the edge (`0` gives a hard step).
pub fn synthetic_slanted_edge(w: usize, h: usize, angle_deg: f64, blur_sigma: f64, dark: f64, bright: f64) -> RasterImage {
    let slope = angle_deg.to_radians().tan();
    let cos = 1.0 / (1.0 + slope * slope).sqrt();
    let x0 = (w as f64 - 1.0) / 2.0 - slope * (h as f64 - 1.0) / 2.0;
    RasterImage::from_fn(w, h, |x, y, _| {
        let d = (x as f64 - (x0 + slope * y as f64)) * cos;
        let t = if blur_sigma > 0.0 {
            normal_cdf(d / blur_sigma)
        } else if d >= 0.0 {
            1.0
        } else {
            0.0
        };
        dark + (bright - dark) * t
    })
}
