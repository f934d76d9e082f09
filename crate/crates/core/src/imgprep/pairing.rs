use std::path::PathBuf;

use rand::Rng;

use crate::error::{Error, Result};
use crate::imgprep::raster::{RasterImage, CHANNELS};

/// A speckled input and its speckle-free target, tagged with the physical
/// object it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub input: RasterImage,
    pub target: RasterImage,
    pub group_id: String,
    /// Where the pair lives (or would live) on disk; used in manifests.
    pub path: PathBuf,
}

impl PairedSample {
    pub fn new(input: RasterImage, target: RasterImage, group_id: impl Into<String>, path: impl Into<PathBuf>) -> Result<Self> {
        if input.dims() != target.dims() {
            return Err(Error::Dimensions(format!(
                "input {:?} and target {:?} differ",
                input.dims(),
                target.dims()
            )));
        }
        Ok(Self { input, target, group_id: group_id.into(), path: path.into() })
    }
}

/// Places `input` on the left and `target` on the right of one image.
///
/// Unless `allow_any_size` is set, each half must be square with a
/// power-of-two side.
pub fn pair_side_by_side(input: &RasterImage, target: &RasterImage, allow_any_size: bool) -> Result<RasterImage> {
    if input.dims() != target.dims() {
        return Err(Error::Dimensions(format!("cannot pair {:?} with {:?}", input.dims(), target.dims())));
    }
    let (w, h) = input.dims();
    if !allow_any_size && (w != h || !w.is_power_of_two()) {
        return Err(Error::Dimensions(format!(
            "paired halves must be square with a power-of-two side, got {w}x{h}"
        )));
    }
    let row = w * CHANNELS;
    let mut data = Vec::with_capacity(2 * w * h * CHANNELS);
    for y in 0..h {
        data.extend_from_slice(&input.data()[y * row..(y + 1) * row]);
        data.extend_from_slice(&target.data()[y * row..(y + 1) * row]);
    }
    RasterImage::new(2 * w, h, data)
}

/// Splits a paired image into `(input, target)` halves.
pub fn unpair(paired: &RasterImage) -> Result<(RasterImage, RasterImage)> {
    let (w, h) = paired.dims();
    if w % 2 != 0 || w == 0 {
        return Err(Error::Dimensions(format!("paired image width {w} is not even")));
    }
    let half = w / 2;
    Ok((paired.crop(0, 0, half, h)?, paired.crop(half, 0, half, h)?))
}

/// Crops both halves of a sample at the same uniformly drawn offset.
pub fn random_crop_pair<R: Rng + ?Sized>(sample: &PairedSample, fine_size: usize, rng: &mut R) -> Result<PairedSample> {
    let (w, h) = sample.input.dims();
    if fine_size == 0 || fine_size > w.min(h) {
        return Err(Error::Dimensions(format!("crop size {fine_size} does not fit a {w}x{h} image")));
    }
    let x0 = rng.random_range(0..=w - fine_size);
    let y0 = rng.random_range(0..=h - fine_size);
    Ok(PairedSample {
        input: sample.input.crop(x0, y0, fine_size, fine_size)?,
        target: sample.target.crop(x0, y0, fine_size, fine_size)?,
        group_id: sample.group_id.clone(),
        path: sample.path.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pattern(w: usize, h: usize, k: usize) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y, c| ((x * 5 + y * 3 + c + k) % 17) as f64 / 16.0)
    }

    #[test]
    fn megapixel_pair_doubles_width() {
        let a = RasterImage::filled(1024, 1024, 0.1);
        let b = RasterImage::filled(1024, 1024, 0.9);
        let p = pair_side_by_side(&a, &b, false).unwrap();
        assert_eq!(p.dims(), (2048, 1024));
        assert_eq!(p.get(1023, 5, 0), 0.1);
        assert_eq!(p.get(1024, 5, 0), 0.9);
        let (l, r) = unpair(&p).unwrap();
        assert_eq!((l, r), (a, b));
    }

    #[test]
    fn symmetric_pair_has_equal_halves() {
        let a = pattern(8, 8, 0);
        let (l, r) = unpair(&pair_side_by_side(&a, &a, false).unwrap()).unwrap();
        assert_eq!(l, r);
    }

    #[test]
    fn size_rules() {
        let a = pattern(6, 6, 0);
        assert!(pair_side_by_side(&a, &a, false).is_err());
        assert!(pair_side_by_side(&a, &a, true).is_ok());
        assert!(pair_side_by_side(&pattern(8, 4, 0), &pattern(8, 4, 1), false).is_err());
        assert!(pair_side_by_side(&pattern(8, 8, 0), &pattern(4, 4, 1), true).is_err());
    }

    #[test]
    fn unpair_minimal_and_odd() {
        let img = RasterImage::new(2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let (l, r) = unpair(&img).unwrap();
        assert_eq!(l.data(), &[0.1, 0.2, 0.3]);
        assert_eq!(r.data(), &[0.4, 0.5, 0.6]);
        assert!(unpair(&pattern(3, 2, 0)).is_err());
    }

    proptest! {
        #[test]
        fn pair_unpair_round_trip(w in 1usize..24, h in 1usize..12, k in 0usize..17) {
            let a = pattern(w, h, k);
            let b = pattern(w, h, k + 5);
            let (l, r) = unpair(&pair_side_by_side(&a, &b, true).unwrap()).unwrap();
            prop_assert_eq!(l, a);
            prop_assert_eq!(r, b);
        }
    }

    #[test]
    fn crop_shares_offsets_and_replays() {
        let s = PairedSample::new(pattern(1024, 1024, 0), pattern(1024, 1024, 0), "g", "p.png").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = random_crop_pair(&s, 512, &mut rng).unwrap();
        assert_eq!(c.input.dims(), (512, 512));
        assert_eq!(c.input, c.target);

        let full = random_crop_pair(&s, 1024, &mut rng).unwrap();
        assert_eq!(full.input, s.input);

        let small = PairedSample::new(pattern(40, 30, 0), pattern(40, 30, 3), "g", "p.png").unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| random_crop_pair(&small, 16, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        // the target crop sits at the same offset as the input crop
        for c in run(4) {
            let shifted = pattern(40, 30, 3);
            let found = (0..=24).flat_map(|x| (0..=14).map(move |y| (x, y))).any(|(x, y)| {
                small.input.crop(x, y, 16, 16).unwrap() == c.input && shifted.crop(x, y, 16, 16).unwrap() == c.target
            });
            assert!(found);
        }
        assert!(random_crop_pair(&small, 31, &mut rng).is_err());
    }
}
