use crate::imgprep::raster::{quantize, RasterImage, CHANNELS};

pub const BINS: usize = 256;

/// Per-channel 256-bin histograms.
pub fn channel_histograms(img: &RasterImage) -> [[u64; BINS]; CHANNELS] {
    let mut h = [[0u64; BINS]; CHANNELS];
    for px in img.data().chunks_exact(CHANNELS) {
        for c in 0..CHANNELS {
            h[c][quantize(px[c]) as usize] += 1;
        }
    }
    h
}

fn cumulative(hist: &[u64; BINS]) -> [u64; BINS] {
    let mut out = [0u64; BINS];
    let mut acc = 0;
    for (o, &v) in out.iter_mut().zip(hist) {
        acc += v;
        *o = acc;
    }
    out
}

/// Per-channel CDF matching on 256 bins.
///
/// Each source bin `b` maps to the smallest reference bin `j` with
/// `cdf_ref(j) >= cdf_src(b)`. Comparisons are done on integer counts, so
/// matching an image to itself reproduces its quantized values exactly.
pub fn histogram_match(src: &RasterImage, reference: &RasterImage) -> RasterImage {
    let hs = channel_histograms(src);
    let hr = channel_histograms(reference);
    let n_src = (src.width() * src.height()) as u128;
    let n_ref = (reference.width() * reference.height()) as u128;

    let mut lut = [[0f64; BINS]; CHANNELS];
    for c in 0..CHANNELS {
        let cs = cumulative(&hs[c]);
        let cr = cumulative(&hr[c]);
        let mut j = 0;
        for b in 0..BINS {
            // cdf_ref(j) >= cdf_src(b)  <=>  cr[j] * n_src >= cs[b] * n_ref
            while j + 1 < BINS && (cr[j] as u128) * n_src < (cs[b] as u128) * n_ref {
                j += 1;
            }
            lut[c][b] = j as f64 / 255.0;
        }
    }

    let mut out = src.clone();
    for px in out.data_mut().chunks_exact_mut(CHANNELS) {
        for c in 0..CHANNELS {
            px[c] = lut[c][quantize(px[c]) as usize];
        }
    }
    out
}

/// Largest per-channel gap between the empirical CDFs of two images.
pub fn cdf_sup_distance(a: &RasterImage, b: &RasterImage) -> f64 {
    let ha = channel_histograms(a);
    let hb = channel_histograms(b);
    let na = (a.width() * a.height()) as f64;
    let nb = (b.width() * b.height()) as f64;
    let mut worst: f64 = 0.0;
    for c in 0..CHANNELS {
        let ca = cumulative(&ha[c]);
        let cb = cumulative(&hb[c]);
        for i in 0..BINS {
            worst = worst.max((ca[i] as f64 / na - cb[i] as f64 / nb).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: usize, h: usize, seed: u64, f: impl Fn(f64) -> f64) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RasterImage::from_fn(w, h, |_, _, _| f(rng.random::<f64>()))
    }

    #[test]
    fn self_match_is_bin_identity() {
        let img = noise(23, 17, 1, |u| u);
        let out = histogram_match(&img, &img);
        let requantized = img.map(|v| f64::from(quantize(v)) / 255.0);
        assert_eq!(out, requantized);
    }

    #[test]
    fn constant_reference_collapses_output() {
        let img = noise(16, 16, 2, |u| u);
        let out = histogram_match(&img, &RasterImage::filled(5, 3, 0.5));
        let expected = f64::from(quantize(0.5)) / 255.0;
        assert!(out.data().iter().all(|&v| v == expected));
    }

    #[test]
    fn uniform_noise_to_dark_reference() {
        let src = noise(256, 256, 3, |u| u);
        let dark = noise(200, 150, 4, |u| u * u * u * 0.6);
        let out = histogram_match(&src, &dark);
        assert!(cdf_sup_distance(&out, &dark) <= 2.0 / 256.0);
        // monotone mapping
        let (s, o) = (src.plane(1), out.plane(1));
        let mut pairs: Vec<_> = s.iter().zip(&o).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(b.0));
        assert!(pairs.windows(2).all(|p| p[0].1 <= p[1].1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn matched_cdf_is_close_to_reference(seed in 0u64..10_000, gamma in 0.3f64..3.0, side in 128usize..200) {
            let src = noise(side, side, seed, |u| u);
            let reference = noise(64, 48, seed + 1, |u| u.powf(gamma));
            let out = histogram_match(&src, &reference);
            prop_assert!(cdf_sup_distance(&out, &reference) <= 2.0 / 256.0);
        }
    }
}
