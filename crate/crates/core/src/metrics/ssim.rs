use crate::error::{Error, Result};
use crate::imgprep::{RasterImage, CHANNELS};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowWeighting {
    Uniform,
    /// Normalized Gaussian weights with the given standard deviation in pixels.
    Gaussian(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsimChannels {
    /// SSIM of each RGB channel, averaged uniformly.
    Average,
    /// SSIM of Rec. 601 luma only.
    Luminance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub weighting: WindowWeighting,
    pub channels: SsimChannels,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
            weighting: WindowWeighting::Uniform,
            channels: SsimChannels::Average,
        }
    }
}

impl SsimConfig {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::Config(format!("SSIM window {} must be odd", self.window)));
        }
        if !(self.c1() > 0.0 && self.c2() > 0.0) {
            return Err(Error::Config("SSIM stabilizing constants must be positive".into()));
        }
        if let WindowWeighting::Gaussian(s) = self.weighting {
            if !(s > 0.0) {
                return Err(Error::Config(format!("Gaussian SSIM sigma {s} must be positive")));
            }
        }
        Ok(())
    }

    fn weights(&self) -> Vec<f64> {
        let n = self.window;
        let raw: Vec<f64> = match self.weighting {
            WindowWeighting::Uniform => vec![1.0; n],
            WindowWeighting::Gaussian(s) => (0..n)
                .map(|i| {
                    let d = i as f64 - (n / 2) as f64;
                    (-0.5 * d * d / (s * s)).exp()
                })
                .collect(),
        };
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

/// Mean SSIM over every fully contained window (stride 1, no padding).
pub fn ssim(a: &RasterImage, b: &RasterImage, cfg: &SsimConfig) -> Result<f64> {
    cfg.validate()?;
    if a.dims() != b.dims() {
        return Err(Error::Dimensions(format!("cannot compare {:?} with {:?}", a.dims(), b.dims())));
    }
    let (w, h) = a.dims();
    if w < cfg.window || h < cfg.window {
        return Err(Error::Dimensions(format!("{w}x{h} image is smaller than the {0}x{0} SSIM window", cfg.window)));
    }
    let scale = cfg.dynamic_range;
    let planes = |img: &RasterImage| -> Vec<Vec<f64>> {
        match cfg.channels {
            SsimChannels::Average => (0..CHANNELS).map(|c| img.plane(c).iter().map(|v| v * scale).collect()).collect(),
            SsimChannels::Luminance => vec![img
                .data()
                .chunks_exact(CHANNELS)
                .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) * scale)
                .collect()],
        }
    };
    let (pa, pb) = (planes(a), planes(b));
    let values: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| plane_ssim(x, y, w, h, cfg)).collect();
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

fn plane_ssim(x: &[f64], y: &[f64], w: usize, h: usize, cfg: &SsimConfig) -> f64 {
    let win = cfg.window;
    let wt = cfg.weights();
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let (ow, oh) = (w - win + 1, h - win + 1);
    let row_values = par::map_range(oh, |oy| {
        // weighted column sums over the window rows for every column
        let mut cols = vec![[0.0f64; 5]; w];
        for (k, &wk) in wt.iter().enumerate() {
            let r = (oy + k) * w;
            for (cx, acc) in cols.iter_mut().enumerate() {
                let (a, b) = (x[r + cx], y[r + cx]);
                acc[0] += wk * a;
                acc[1] += wk * b;
                acc[2] += wk * a * a;
                acc[3] += wk * b * b;
                acc[4] += wk * a * b;
            }
        }
        let vals: Vec<f64> = (0..ow)
            .map(|ox| {
                let mut s = [0.0f64; 5];
                for (k, &wk) in wt.iter().enumerate() {
                    for (sj, cj) in s.iter_mut().zip(&cols[ox + k]) {
                        *sj += wk * cj;
                    }
                }
                let (mx, my) = (s[0], s[1]);
                let vx = s[2] - mx * mx;
                let vy = s[3] - my * my;
                let cxy = s[4] - mx * my;
                ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
            })
            .collect();
        par::pairwise_sum(&vals)
    });
    par::pairwise_sum(&row_values) / (ow * oh) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(w: usize, h: usize, seed: u64) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RasterImage::from_fn(w, h, |_, _, _| rng.random::<f64>())
    }

    #[test]
    fn self_similarity_is_one() {
        let a = random(24, 19, 1);
        assert!((ssim(&a, &a, &SsimConfig::default()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_black_vs_white_closed_form() {
        let a = RasterImage::filled(11, 11, 0.0);
        let b = RasterImage::filled(11, 11, 1.0);
        let cfg = SsimConfig::default();
        let expected = cfg.c1() / (255.0 * 255.0 + cfg.c1());
        let got = ssim(&a, &b, &cfg).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.0001).abs() < 1e-6);
    }

    #[test]
    fn symmetric_bounded_and_small_images_rejected() {
        let (a, b) = (random(16, 16, 2), random(16, 16, 3));
        let cfg = SsimConfig::default();
        let ab = ssim(&a, &b, &cfg).unwrap();
        assert!((ab - ssim(&b, &a, &cfg).unwrap()).abs() < 1e-15);
        assert!(ab.abs() <= 1.0);
        assert!(ssim(&random(10, 16, 1), &random(10, 16, 2), &cfg).is_err());
        assert!(ssim(&a, &b, &SsimConfig { window: 10, ..cfg }).is_err());
    }

    #[test]
    fn approaches_one_as_perturbation_shrinks() {
        let a = random(32, 32, 4);
        let noise = random(32, 32, 5);
        let cfg = SsimConfig::default();
        let vals: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&amp| {
                let b = RasterImage::new(32, 32, a.data().iter().zip(noise.data()).map(|(x, n)| x + amp * (n - 0.5)).collect()).unwrap();
                ssim(&a, &b, &cfg).unwrap()
            })
            .collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2] && vals[2] < 1.0, "{vals:?}");
    }

    #[test]
    fn gaussian_and_luminance_options_run() {
        let (a, b) = (random(16, 16, 6), random(16, 16, 7));
        let g = SsimConfig { weighting: WindowWeighting::Gaussian(1.5), ..Default::default() };
        let l = SsimConfig { channels: SsimChannels::Luminance, ..Default::default() };
        for cfg in [g, l] {
            let v = ssim(&a, &b, &cfg).unwrap();
            assert!(v.abs() <= 1.0);
            assert!((ssim(&a, &a, &cfg).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
