use crate::error::{Error, Result};
use crate::imgprep::{RasterImage, CHANNELS};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MedianConfig {
    /// Odd side length of the square window.
    pub kernel: usize,
}

impl Default for MedianConfig {
    fn default() -> Self {
        Self { kernel: 7 }
    }
}

impl MedianConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel < 3 || self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("median kernel {} must be odd and at least 3", self.kernel)));
        }
        Ok(())
    }
}

/// Per-channel sliding-window median with clamp-to-edge borders.
pub fn median_filter(img: &RasterImage, cfg: &MedianConfig) -> Result<RasterImage> {
    cfg.validate()?;
    let (w, h) = img.dims();
    if cfg.kernel > w.min(h) {
        return Err(Error::Dimensions(format!("median kernel {} exceeds the {w}x{h} image", cfg.kernel)));
    }
    let r = (cfg.kernel / 2) as isize;
    let mut out = vec![0.0; w * h * CHANNELS];
    par::for_each_chunk_mut(&mut out, w * CHANNELS, |y, row| {
        let mut window = Vec::with_capacity(cfg.kernel * cfg.kernel);
        for x in 0..w {
            for c in 0..CHANNELS {
                window.clear();
                for dy in -r..=r {
                    for dx in -r..=r {
                        window.push(img.get_clamped(x as isize + dx, y as isize + dy, c));
                    }
                }
                let mid = window.len() / 2;
                let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
                row[x * CHANNELS + c] = *m;
            }
        }
    });
    RasterImage::new(w, h, out)
}
