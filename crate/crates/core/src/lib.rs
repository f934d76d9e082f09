//! Laser speckle reduction toolkit.
//!
//! * [`imgprep`]: raster I/O, bicubic resizing, histogram matching, paired
//!   side-by-side images and group-held-out splits.
//! * [`speckle`]: multiplicative speckle forward model.
//! * [`classical`]: median, non-local means, K-SVD and color BM3D denoisers.
//! * [`metrics`]: PSNR, windowed SSIM, slanted-edge MTF.
//! * [`nn`]: small reverse-mode autodiff engine with spectral normalization and Adam.
//! * [`gan`]: conditional adversarial despeckling network and its training loop.
//! * [`bench`]: benchmark harness, Pareto tuner and report emitters.
//!
//! Inner loops run on rayon when the `parallel` feature is enabled (default);
//! results are identical with and without it.

pub mod bench;
pub mod classical;
pub mod error;
pub mod gan;
pub mod imgprep;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod scenes;
pub mod speckle;

pub use error::{Error, Result};
pub use imgprep::RasterImage;
