use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imgprep::{RasterImage, CHANNELS};
use crate::par;

/// How `patch_radius` / `window_radius` are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeConvention {
    /// Values are radii: a radius `r` spans `2r + 1` pixels.
    #[default]
    Radius,
    /// Values are side lengths; the radius used is `side / 2`.
    Diameter,
}

impl fmt::Display for SizeConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeConvention::Radius => "radius",
            SizeConvention::Diameter => "diameter",
        })
    }
}

impl FromStr for SizeConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radius" => Ok(Self::Radius),
            "diameter" => Ok(Self::Diameter),
            other => Err(Error::Config(format!("size convention '{other}' is neither radius nor diameter"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlmConfig {
    pub patch_radius: usize,
    pub window_radius: usize,
    /// Filtering strength `h` on the `[0, 1]` intensity scale.
    pub strength_h: f64,
    pub size_convention: SizeConvention,
}

impl Default for NlmConfig {
    fn default() -> Self {
        Self { patch_radius: 4, window_radius: 5, strength_h: 0.283, size_convention: SizeConvention::Radius }
    }
}

impl NlmConfig {
    /// `(patch, window)` radii after applying the size convention.
    pub fn radii(&self) -> (usize, usize) {
        match self.size_convention {
            SizeConvention::Radius => (self.patch_radius, self.window_radius),
            SizeConvention::Diameter => (self.patch_radius / 2, self.window_radius / 2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength_h > 0.0 && self.strength_h.is_finite()) {
            return Err(Error::Config(format!("NLM strength {} must be positive", self.strength_h)));
        }
        if self.window_radius < self.patch_radius {
            return Err(Error::Config(format!(
                "NLM window {} must not be smaller than the patch {}",
                self.window_radius, self.patch_radius
            )));
        }
        Ok(())
    }
}

// Noise level subtracted from patch distances; none is pre-estimated.
const NOISE_SIGMA: f64 = 0.0;

#[inline]
fn weight(d2: f64, h: f64) -> f64 {
    (-(d2 - 2.0 * NOISE_SIGMA * NOISE_SIGMA).max(0.0) / (h * h)).exp()
}

/// Non-local means over all three channels jointly.
///
/// Each pixel becomes the normalized weighted mean of the pixels in its search
/// window; the weight of a candidate is `exp(-max(d2 - 2 sigma^2, 0) / h^2)`,
/// with `d2` the mean squared difference between the two surrounding patches
/// (clamp-to-edge) and `sigma = 0`.
pub fn nlm_denoise(img: &RasterImage, cfg: &NlmConfig) -> Result<RasterImage> {
    cfg.validate()?;
    let (w, h) = img.dims();
    let (p, r) = cfg.radii();
    let (pi, ri) = (p as isize, r as isize);
    let norm = ((2 * p + 1) * (2 * p + 1) * CHANNELS) as f64;
    let hh = cfg.strength_h;
    const BAND: usize = 8;

    let mut out = vec![0.0; w * h * CHANNELS];
    par::for_each_chunk_mut(&mut out, BAND * w * CHANNELS, |band, chunk| {
        let y0 = band * BAND;
        let rows = chunk.len() / (w * CHANNELS);
        let ext_rows = rows + 2 * p;
        let ext_cols = w + 2 * p;
        let mut num = vec![0.0; rows * w * CHANNELS];
        let mut den = vec![0.0; rows * w];
        let mut diff = vec![0.0; ext_cols];
        let mut prefix = vec![0.0; ext_cols + 1];
        let mut hsum = vec![0.0; ext_rows * w];

        for dy in -ri..=ri {
            for dx in -ri..=ri {
                // horizontal patch sums of the squared difference image
                for er in 0..ext_rows {
                    let yy = y0 as isize + er as isize - pi;
                    for (ec, d) in diff.iter_mut().enumerate() {
                        let xx = ec as isize - pi;
                        let mut s = 0.0;
                        for c in 0..CHANNELS {
                            let a = img.get_clamped(xx, yy, c);
                            let b = img.get_clamped(xx + dx, yy + dy, c);
                            s += (a - b) * (a - b);
                        }
                        *d = s;
                    }
                    for (i, d) in diff.iter().enumerate() {
                        prefix[i + 1] = prefix[i] + d;
                    }
                    for x in 0..w {
                        hsum[er * w + x] = prefix[x + 2 * p + 1] - prefix[x];
                    }
                }
                for row in 0..rows {
                    let y = y0 + row;
                    for x in 0..w {
                        let mut d2 = 0.0;
                        for k in 0..=2 * p {
                            d2 += hsum[(row + k) * w + x];
                        }
                        let wgt = weight(d2 / norm, hh);
                        den[row * w + x] += wgt;
                        for c in 0..CHANNELS {
                            num[(row * w + x) * CHANNELS + c] +=
                                wgt * img.get_clamped(x as isize + dx, y as isize + dy, c);
                        }
                    }
                }
            }
        }
        for (i, v) in chunk.iter_mut().enumerate() {
            *v = (num[i] / den[i / CHANNELS]).clamp(0.0, 1.0);
        }
    });
    RasterImage::new(w, h, out)
}

/// Normalized NLM weights of every candidate `(dx, dy)` in the search window
/// of pixel `(x, y)`, evaluated directly from the definition.
pub fn nlm_pixel_weights(img: &RasterImage, cfg: &NlmConfig, x: usize, y: usize) -> Result<Vec<(isize, isize, f64)>> {
    cfg.validate()?;
    let (p, r) = cfg.radii();
    let (pi, ri) = (p as isize, r as isize);
    let norm = ((2 * p + 1) * (2 * p + 1) * CHANNELS) as f64;
    let (xi, yi) = (x as isize, y as isize);
    let mut weights = Vec::new();
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            let mut d2 = 0.0;
            for j in -pi..=pi {
                for i in -pi..=pi {
                    for c in 0..CHANNELS {
                        let a = img.get_clamped(xi + i, yi + j, c);
                        let b = img.get_clamped(xi + dx + i, yi + dy + j, c);
                        d2 += (a - b) * (a - b);
                    }
                }
            }
            weights.push((dx, dy, weight(d2 / norm, cfg.strength_h)));
        }
    }
    let total: f64 = weights.iter().map(|w| w.2).sum();
    Ok(weights.into_iter().map(|(dx, dy, w)| (dx, dy, w / total)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook quadruple-loop NLM, independent of the banded implementation.
    fn brute_force(img: &RasterImage, p: isize, r: isize, h: f64) -> RasterImage {
        let (w, ht) = img.dims();
        let mut out = img.clone();
        for y in 0..ht as isize {
            for x in 0..w as isize {
                let mut acc = [0.0; 3];
                let mut total = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let mut d2 = 0.0;
                        for j in -p..=p {
                            for i in -p..=p {
                                for c in 0..3 {
                                    let diff = img.get_clamped(x + i, y + j, c) - img.get_clamped(x + dx + i, y + dy + j, c);
                                    d2 += diff * diff;
                                }
                            }
                        }
                        d2 /= ((2 * p + 1) * (2 * p + 1) * 3) as f64;
                        let wgt = (-d2 / (h * h)).exp();
                        total += wgt;
                        for (c, a) in acc.iter_mut().enumerate() {
                            *a += wgt * img.get_clamped(x + dx, y + dy, c);
                        }
                    }
                }
                for c in 0..3 {
                    out.set(x as usize, y as usize, c, acc[c] / total);
                }
            }
        }
        out
    }

    fn two_regions(seed: u64) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RasterImage::from_fn(16, 16, |x, _, _| if x < 8 { 0.25 } else { 0.75 } + rng.random_range(-0.05..0.05))
    }

    #[test]
    fn constant_unchanged() {
        let img = RasterImage::filled(20, 13, 0.3);
        let out = nlm_denoise(&img, &NlmConfig::default()).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.3).abs() < 1e-9));
    }

    #[test]
    fn equals_brute_force_oracle() {
        let img = two_regions(1);
        for cfg in [
            NlmConfig::default(),
            NlmConfig { patch_radius: 1, window_radius: 3, strength_h: 0.1, ..Default::default() },
        ] {
            let out = nlm_denoise(&img, &cfg).unwrap();
            let (p, r) = cfg.radii();
            let oracle = brute_force(&img, p as isize, r as isize, cfg.strength_h);
            for (a, b) in out.data().iter().zip(oracle.data()) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn recovers_region_means() {
        let img = two_regions(2);
        let cfg = NlmConfig { patch_radius: 1, window_radius: 3, strength_h: 0.1, ..Default::default() };
        let out = nlm_denoise(&img, &cfg).unwrap();
        let left: f64 = (0..16).flat_map(|y| (1..6).map(move |x| (x, y))).map(|(x, y)| out.get(x, y, 0)).sum::<f64>() / 80.0;
        let right: f64 = (0..16).flat_map(|y| (10..15).map(move |x| (x, y))).map(|(x, y)| out.get(x, y, 0)).sum::<f64>() / 80.0;
        assert!((left - 0.25).abs() < 0.025, "{left}");
        assert!((right - 0.75).abs() < 0.075, "{right}");
    }

    #[test]
    fn weights_normalize_and_reproduce_output() {
        let img = two_regions(3);
        let cfg = NlmConfig { patch_radius: 2, window_radius: 3, strength_h: 0.2, ..Default::default() };
        let out = nlm_denoise(&img, &cfg).unwrap();
        for (x, y) in [(0, 0), (7, 8), (15, 3), (9, 15)] {
            let wts = nlm_pixel_weights(&img, &cfg, x, y).unwrap();
            let total: f64 = wts.iter().map(|w| w.2).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(wts.iter().all(|w| w.2 > 0.0));
            for c in 0..3 {
                let v: f64 = wts.iter().map(|&(dx, dy, wt)| wt * img.get_clamped(x as isize + dx, y as isize + dy, c)).sum();
                assert!((v - out.get(x, y, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diameter_convention_and_validation() {
        let cfg = NlmConfig { size_convention: SizeConvention::Diameter, ..Default::default() };
        assert_eq!(cfg.radii(), (2, 2));
        assert!(NlmConfig { window_radius: 3, ..Default::default() }.validate().is_err());
        assert!(NlmConfig { strength_h: 0.0, ..Default::default() }.validate().is_err());
    }
}
