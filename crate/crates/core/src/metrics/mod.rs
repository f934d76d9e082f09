//! Image quality metrics: PSNR, windowed SSIM and slanted-edge MTF.

mod mtf;
mod psnr;
mod ssim;

pub use mtf::{mtf50, mtf_slanted_edge, synthetic_slanted_edge, EdgeFit, MtfChannel, MtfConfig, MtfCurve};
pub use psnr::{mse_8bit, psnr, PEAK};
pub use ssim::{ssim, SsimChannels, SsimConfig, WindowWeighting};
