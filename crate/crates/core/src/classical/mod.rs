//! The four model-based despeckling baselines: median filtering, non-local
//! means, K-SVD dictionary denoising and color BM3D.
//!
//! Every denoiser works on `[0, 1]` intensities, keeps its output in `[0, 1]`
//! and leaves constant images unchanged.

mod cbm3d;
mod dct;
mod ksvd;
mod median;
mod nlm;
mod omp;

use std::fmt;
use std::str::FromStr;

pub use cbm3d::{cbm3d_denoise, cbm3d_denoise_with_diagnostics, Cbm3dConfig, Cbm3dDiagnostics, YUV_FORWARD};
pub use ksvd::{
    ksvd_denoise, ksvd_denoise_with_diagnostics, ksvd_denoise_with_dictionary, overcomplete_dct_dictionary, train_dictionary,
    BlockShape, Dictionary, KsvdConfig, KsvdDiagnostics, OMP_TOLERANCE_FACTOR,
};
pub use median::{median_filter, MedianConfig};
pub use nlm::{nlm_denoise, nlm_pixel_weights, NlmConfig, SizeConvention};
pub use omp::{omp, OmpCode};

use crate::error::{Error, Result};
use crate::imgprep::RasterImage;

/// Parameters of one classical denoiser. Defaults follow the tuned benchmark settings.
#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserConfig {
    Median(MedianConfig),
    Nlm(NlmConfig),
    Ksvd(KsvdConfig),
    Cbm3d(Cbm3dConfig),
}

pub const METHOD_NAMES: [&str; 4] = ["median", "nlm", "ksvd", "cbm3d"];

impl DenoiserConfig {
    /// Default configuration for a method name.
    pub fn default_for(method: &str) -> Result<Self> {
        Ok(match method {
            "median" => DenoiserConfig::Median(MedianConfig::default()),
            "nlm" => DenoiserConfig::Nlm(NlmConfig::default()),
            "ksvd" => DenoiserConfig::Ksvd(KsvdConfig::default()),
            "cbm3d" => DenoiserConfig::Cbm3d(Cbm3dConfig::default()),
            other => return Err(Error::Config(format!("unknown method '{other}' (expected one of {METHOD_NAMES:?})"))),
        })
    }

    /// Parses `k=v,k=v` overrides on top of the method defaults. Keys are the
    /// config field names.
    pub fn parse(method: &str, params: &str) -> Result<Self> {
        let mut cfg = Self::default_for(method)?;
        for item in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("parameter '{item}' is not of the form key=value")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let method = self.method();
        let bad = || Error::Config(format!("{method}: invalid value '{value}' for '{key}'"));
        let unknown = || Error::Config(format!("{method}: unknown parameter '{key}'"));
        fn num<T: FromStr>(v: &str, bad: impl Fn() -> Error) -> Result<T> {
            v.parse().map_err(|_| bad())
        }
        match self {
            DenoiserConfig::Median(c) => match key {
                "kernel" => c.kernel = num(value, bad)?,
                _ => return Err(unknown()),
            },
            DenoiserConfig::Nlm(c) => match key {
                "patch_radius" => c.patch_radius = num(value, bad)?,
                "window_radius" => c.window_radius = num(value, bad)?,
                "strength_h" => c.strength_h = num(value, bad)?,
                "size_convention" => c.size_convention = value.parse()?,
                _ => return Err(unknown()),
            },
            DenoiserConfig::Ksvd(c) => match key {
                "block" => c.block = value.parse()?,
                "dict_size" => c.dict_size = num(value, bad)?,
                "train_blocks" => c.train_blocks = num(value, bad)?,
                "sigma_noise" => c.sigma_noise = num(value, bad)?,
                "sparsity_target" => c.sparsity_target = Some(num(value, bad)?),
                "rounds" => c.rounds = num(value, bad)?,
                "seed" => c.seed = num(value, bad)?,
                "remove_mean" => c.remove_mean = num(value, bad)?,
                _ => return Err(unknown()),
            },
            DenoiserConfig::Cbm3d(c) => match key {
                "sigma" => c.sigma = num(value, bad)?,
                _ => return Err(unknown()),
            },
        }
        Ok(())
    }

    pub fn method(&self) -> &'static str {
        match self {
            DenoiserConfig::Median(_) => "median",
            DenoiserConfig::Nlm(_) => "nlm",
            DenoiserConfig::Ksvd(_) => "ksvd",
            DenoiserConfig::Cbm3d(_) => "cbm3d",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DenoiserConfig::Median(c) => c.validate(),
            DenoiserConfig::Nlm(c) => c.validate(),
            DenoiserConfig::Ksvd(c) => c.validate(),
            DenoiserConfig::Cbm3d(c) => c.validate(),
        }
    }

    pub fn denoise(&self, img: &RasterImage) -> Result<RasterImage> {
        match self {
            DenoiserConfig::Median(c) => median_filter(img, c),
            DenoiserConfig::Nlm(c) => nlm_denoise(img, c),
            DenoiserConfig::Ksvd(c) => ksvd_denoise(img, c),
            DenoiserConfig::Cbm3d(c) => cbm3d_denoise(img, c),
        }
    }
}

/// Renders the parameters as a `k=v,...` string that [`DenoiserConfig::parse`] accepts.
impl fmt::Display for DenoiserConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenoiserConfig::Median(c) => write!(f, "kernel={}", c.kernel),
            DenoiserConfig::Nlm(c) => write!(
                f,
                "patch_radius={},window_radius={},strength_h={},size_convention={}",
                c.patch_radius, c.window_radius, c.strength_h, c.size_convention
            ),
            DenoiserConfig::Ksvd(c) => {
                write!(
                    f,
                    "block={},dict_size={},train_blocks={},sigma_noise={},sparsity_target={},rounds={},seed={},remove_mean={}",
                    c.block,
                    c.dict_size,
                    c.train_blocks,
                    c.sigma_noise,
                    c.effective_sparsity(),
                    c.rounds,
                    c.seed,
                    c.remove_mean
                )
            }
            DenoiserConfig::Cbm3d(c) => write!(f, "sigma={}", c.sigma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_tuned_settings() {
        assert_eq!(DenoiserConfig::default_for("median").unwrap(), DenoiserConfig::Median(MedianConfig { kernel: 7 }));
        let DenoiserConfig::Nlm(n) = DenoiserConfig::default_for("nlm").unwrap() else { panic!() };
        assert_eq!((n.patch_radius, n.window_radius, n.strength_h), (4, 5, 0.283));
        let DenoiserConfig::Ksvd(k) = DenoiserConfig::default_for("ksvd").unwrap() else { panic!() };
        assert_eq!((k.block, k.dict_size, k.train_blocks, k.sigma_noise), (BlockShape::new(5, 5, 3), 1000, 1000, 0.01));
        let DenoiserConfig::Cbm3d(c) = DenoiserConfig::default_for("cbm3d").unwrap() else { panic!() };
        assert_eq!(c.sigma, 83.6);
        assert!(DenoiserConfig::default_for("tv").is_err());
    }

    #[test]
    fn parse_and_display_round_trip() {
        for (m, p) in [
            ("median", "kernel=5"),
            ("nlm", "patch_radius=2, window_radius=7,strength_h=0.1,size_convention=diameter"),
            ("ksvd", "block=4x4x3,dict_size=64,sparsity_target=3,seed=9"),
            ("cbm3d", "sigma=25"),
        ] {
            let cfg = DenoiserConfig::parse(m, p).unwrap();
            assert_eq!(DenoiserConfig::parse(m, &cfg.to_string()).unwrap(), cfg);
        }
    }

    #[test]
    fn parse_errors() {
        assert!(DenoiserConfig::parse("median", "kernel=4").is_err());
        assert!(DenoiserConfig::parse("median", "size=5").is_err());
        assert!(DenoiserConfig::parse("nlm", "strength_h").is_err());
        assert!(DenoiserConfig::parse("nlm", "strength_h=abc").is_err());
        assert!(DenoiserConfig::parse("cbm3d", "sigma=0").is_err());
    }
}
