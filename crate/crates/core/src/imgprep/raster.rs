use std::path::Path;

use image::{ColorType, ImageReader, RgbImage};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// An RGB raster with intensities normalized to `[0, 1]`, stored row-major and
/// channel-interleaved (`data[(y * width + x) * 3 + c]`).
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * CHANNELS {
            return Err(Error::Dimensions(format!(
                "{} values cannot fill a {width}x{height}x{CHANNELS} raster",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height * CHANNELS] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(x, y, c));
                }
            }
        }
        Self { width, height, data }
    }

    /// Builds an image from three row-major planes.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f64>; CHANNELS]) -> Result<Self> {
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::Dimensions(format!("planes do not match {width}x{height}")));
        }
        let mut data = Vec::with_capacity(n * CHANNELS);
        for i in 0..n {
            for p in planes {
                data.push(p[i]);
            }
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * CHANNELS + c] = v;
    }

    /// Clamp-to-edge access with signed coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y, c)
    }

    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(CHANNELS).copied().collect()
    }

    pub fn planes(&self) -> [Vec<f64>; CHANNELS] {
        [self.plane(0), self.plane(1), self.plane(2)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn clamped(&self) -> Self {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Copies the `w`x`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Dimensions(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h * CHANNELS);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * CHANNELS;
            data.extend_from_slice(&self.data[start..start + w * CHANNELS]);
        }
        Ok(Self { width: w, height: h, data })
    }

    /// Quantizes to 8 bits: clamp to `[0,1]`, scale by 255, round half up.
    pub fn to_rgb8(&self) -> RgbImage {
        let bytes = self.data.iter().map(|&v| quantize(v)).collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, bytes).expect("buffer sized by construction")
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
        Self { width: w as usize, height: h as usize, data }
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Loads an 8-bit RGB PNG or JPEG into `[0,1]` intensities.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| Error::Decode { path: path.to_owned(), reason: e.to_string() })?;
    let color = decoded.color();
    let reason = match color {
        ColorType::Rgb8 => None,
        other if other.bytes_per_pixel() / other.channel_count() != 1 => Some(format!(
            "unsupported bit depth {} (expected 8 bits per channel)",
            8 * (other.bytes_per_pixel() / other.channel_count()) as u32
        )),
        other => Some(format!("unsupported channel count {} (expected 3, RGB)", other.channel_count())),
    };
    if let Some(reason) = reason {
        return Err(Error::Decode { path: path.to_owned(), reason });
    }
    Ok(RasterImage::from_rgb8(&decoded.into_rgb8()))
}

/// Writes an 8-bit RGB PNG. Parent directories are created as needed.
pub fn save_png(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    img.to_rgb8()
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Decode { path: path.to_owned(), reason: format!("png encode failed: {e}") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Rgb, Rgba, RgbaImage};

    fn write_rgb(dir: &Path, name: &str, value: u8) -> std::path::PathBuf {
        let p = dir.join(name);
        RgbImage::from_pixel(4, 3, Rgb([value; 3])).save(&p).unwrap();
        p
    }

    #[test]
    fn zero_and_full_scale_files() {
        let dir = tempfile::tempdir().unwrap();
        let zero = load_image(write_rgb(dir.path(), "z.png", 0)).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
        let full = load_image(write_rgb(dir.path(), "f.png", 255)).unwrap();
        assert!(full.data().iter().all(|&v| v == 1.0));
        let mid = load_image(write_rgb(dir.path(), "m.png", 128)).unwrap();
        assert!((mid.get(0, 0, 0) - 0.501_960_784_313_725_5).abs() < 1e-12);
        assert_eq!(mid.dims(), (4, 3));
    }

    #[test]
    fn rejects_missing_and_wrong_channel_count() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_image(dir.path().join("nope.png")), Err(Error::Io { .. })));

        let gray = dir.path().join("g.png");
        GrayImage::new(2, 2).save(&gray).unwrap();
        let err = load_image(&gray).unwrap_err().to_string();
        assert!(err.contains("channel count 1"), "{err}");

        let rgba = dir.path().join("a.png");
        RgbaImage::from_pixel(2, 2, Rgba([1, 2, 3, 4])).save(&rgba).unwrap();
        let err = load_image(&rgba).unwrap_err().to_string();
        assert!(err.contains("channel count 4"), "{err}");

        let deep = dir.path().join("d.png");
        image::ImageBuffer::<Rgb<u16>, Vec<u16>>::new(2, 2).save(&deep).unwrap();
        let err = load_image(&deep).unwrap_err().to_string();
        assert!(err.contains("bit depth 16"), "{err}");
    }

    #[test]
    fn quantization_rounds_half_up_and_clamps() {
        assert_eq!(quantize(-0.3), 0);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(0.5), 128); // 127.5 rounds up
        assert_eq!(quantize(127.49 / 255.0), 127);
    }

    #[test]
    fn png_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let img = RasterImage::from_fn(7, 5, |x, y, c| ((x * 31 + y * 17 + c * 101) % 256) as f64 / 255.0);
        let p = dir.path().join("sub/r.png");
        save_png(&img, &p).unwrap();
        let a = load_image(&p).unwrap();
        save_png(&a, &p).unwrap();
        let b = load_image(&p).unwrap();
        assert_eq!(a, img);
        assert_eq!(a, b);
    }

    #[test]
    fn planes_round_trip() {
        let img = RasterImage::from_fn(3, 2, |x, y, c| (x + 10 * y + 100 * c) as f64);
        let back = RasterImage::from_planes(3, 2, &img.planes()).unwrap();
        assert_eq!(img, back);
        assert!(RasterImage::new(2, 2, vec![0.0; 11]).is_err());
    }
}
