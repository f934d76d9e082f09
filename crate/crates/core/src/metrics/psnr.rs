use crate::error::{Error, Result};
use crate::imgprep::{RasterImage, CHANNELS};
use crate::par;

/// Peak intensity on the 8-bit scale.
pub const PEAK: f64 = 255.0;

/// Mean squared error on the 0-255 scale, over all pixels and channels jointly.
pub fn mse_8bit(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Dimensions(format!("cannot compare {:?} with {:?}", a.dims(), b.dims())));
    }
    let row = a.width() * CHANNELS;
    if row == 0 || a.height() == 0 {
        return Err(Error::Dimensions("empty images".into()));
    }
    let (da, db) = (a.data(), b.data());
    let rows = par::map_range(a.height(), |y| {
        let sq: Vec<f64> = da[y * row..(y + 1) * row]
            .iter()
            .zip(&db[y * row..(y + 1) * row])
            .map(|(x, z)| {
                let d = (x - z) * PEAK;
                d * d
            })
            .collect();
        par::pairwise_sum(&sq)
    });
    Ok(par::pairwise_sum(&rows) / da.len() as f64)
}

/// `10 log10(255^2 / MSE)`; identical images are an error.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    let mse = mse_8bit(a, b)?;
    if mse == 0.0 {
        return Err(Error::IdenticalImages);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}
