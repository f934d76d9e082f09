use crate::error::{Error, Result};
use crate::imgprep::{RasterImage, CHANNELS};

/// Dense `(batch, channels, height, width)` array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::Shape(format!("shape {shape:?} needs {len} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: [usize; 4], v: f64) -> Self {
        Self { shape, data: vec![v; shape.iter().product()] }
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: [1, 1, 1, 1], data: vec![v] }
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize) -> f64) -> Self {
        let len = shape.iter().product();
        Self { shape, data: (0..len).map(&mut f).collect() }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape[0]
    }

    pub fn c(&self) -> usize {
        self.shape[1]
    }

    pub fn h(&self) -> usize {
        self.shape[2]
    }

    pub fn w(&self) -> usize {
        self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Values of one batch item.
    pub fn item(&self, i: usize) -> &[f64] {
        let s = self.shape[1] * self.shape[2] * self.shape[3];
        &self.data[i * s..(i + 1) * s]
    }

    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        let [_, cc, h, w] = self.shape;
        self.data[((n * cc + c) * h + y) * w + x]
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

    pub fn item_value(&self) -> f64 {
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(self, shape: [usize; 4]) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Stacks images into a batch, mapping `[0, 1]` to `[-1, 1]`.
    pub fn from_images(images: &[&RasterImage]) -> Result<Self> {
        let first = images.first().ok_or_else(|| Error::Shape("empty image batch".into()))?;
        let (w, h) = first.dims();
        let mut data = Vec::with_capacity(images.len() * CHANNELS * w * h);
        for img in images {
            if img.dims() != (w, h) {
                return Err(Error::Shape(format!("batch mixes {w}x{h} and {}x{} images", img.width(), img.height())));
            }
            for c in 0..CHANNELS {
                data.extend(img.data().iter().skip(c).step_by(CHANNELS).map(|v| v * 2.0 - 1.0));
            }
        }
        Self::new([images.len(), CHANNELS, h, w], data)
    }

    /// Inverse of [`Tensor4::from_images`] for batch item `i`, clamping to `[0, 1]`.
    pub fn to_image(&self, i: usize) -> Result<RasterImage> {
        if self.c() != CHANNELS {
            return Err(Error::Shape(format!("expected {CHANNELS} channels, got {}", self.c())));
        }
        let (h, w) = (self.h(), self.w());
        let item = self.item(i);
        RasterImage::new(w, h, (0..w * h * CHANNELS).map(|j| ((item[(j % CHANNELS) * w * h + j / CHANNELS] + 1.0) * 0.5).clamp(0.0, 1.0)).collect())
    }

    /// Concatenates along the batch axis.
    pub fn stack(items: &[Tensor4]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::Shape("empty stack".into()))?;
        let [_, c, h, w] = first.shape;
        let mut data = Vec::new();
        let mut n = 0;
        for t in items {
            if t.shape[1..] != [c, h, w] {
                return Err(Error::Shape(format!("cannot stack {:?} with {:?}", t.shape, first.shape)));
            }
            data.extend_from_slice(&t.data);
            n += t.shape[0];
        }
        Self::new([n, c, h, w], data)
    }

    /// Batch item `i` as a single-item tensor.
    pub fn slice_item(&self, i: usize) -> Self {
        let [_, c, h, w] = self.shape;
        Self { shape: [1, c, h, w], data: self.item(i).to_vec() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_round_trip() {
        let img = RasterImage::from_fn(5, 4, |x, y, c| ((x + 2 * y + 3 * c) % 7) as f64 / 8.0);
        let t = Tensor4::from_images(&[&img, &img]).unwrap();
        assert_eq!(t.shape(), [2, 3, 4, 5]);
        assert_eq!(t.at(1, 2, 3, 4), img.get(4, 3, 2) * 2.0 - 1.0);
        assert_eq!(t.to_image(1).unwrap(), img);
    }

    #[test]
    fn shape_errors() {
        assert!(Tensor4::new([1, 2, 3, 4], vec![0.0; 23]).is_err());
        assert!(Tensor4::stack(&[Tensor4::zeros([1, 1, 2, 2]), Tensor4::zeros([1, 2, 2, 2])]).is_err());
    }
}
