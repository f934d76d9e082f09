use super::network::Generator;
use crate::error::Result;
use crate::imgprep::{RasterImage, CHANNELS};
use crate::nn::{Graph, Tensor4};

fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let r = i % period;
    if r < n {
        r
    } else {
        period - r
    }
}

/// Runs the generator on one image. Sides that are not multiples of
/// `2^depth` are reflect-padded on the right and bottom, and the output is
/// cropped back to the input size.
pub fn infer(gen: &Generator, img: &RasterImage) -> Result<RasterImage> {
    let (w, h) = img.dims();
    let m = gen.spec.multiple();
    let (pw, ph) = (w.div_ceil(m) * m, h.div_ceil(m) * m);
    let padded = if (pw, ph) == (w, h) { img.clone() } else { RasterImage::from_fn(pw, ph, |x, y, c| img.get(reflect(x, w), reflect(y, h), c)) };
    let mut g = Graph::new();
    let x = g.constant(Tensor4::from_images(&[&padded])?);
    let (y, _) = gen.forward(&mut g, x, false)?;
    let out = g.value(y).to_image(0)?;
    if (pw, ph) == (w, h) {
        Ok(out)
    } else {
        out.crop(0, 0, w, h)
    }
}

/// Maps a batch tensor in `[-1, 1]` with 3 channels to images.
pub fn tensor_images(t: &Tensor4) -> Result<Vec<RasterImage>> {
    debug_assert_eq!(t.c(), CHANNELS);
    (0..t.n()).map(|i| t.to_image(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::GeneratorSpec;
    use crate::scenes::test_scene;

    #[test]
    fn reflect_indices() {
        assert_eq!((0..8).map(|i| reflect(i, 4)).collect::<Vec<_>>(), vec![0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect(5, 1), 0);
    }

    #[test]
    fn deterministic_and_size_preserving() {
        let gen = Generator::new(GeneratorSpec { depth: 3, base_channels: 4, ..Default::default() }, 2).unwrap();
        for (w, h) in [(32, 24), (30, 21)] {
            let img = test_scene(w, h, 1);
            let a = infer(&gen, &img).unwrap();
            assert_eq!(a.dims(), (w, h));
            assert_eq!(a, infer(&gen, &img).unwrap());
        }
    }
}
