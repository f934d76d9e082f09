//! Color BM3D.
//!
//! The image is moved to a luminance-chrominance space, similar 8x8 blocks
//! are grouped by matching on luminance, and each group is filtered in a 3D
//! transform domain (2D DCT per block, Haar across the group) for all three
//! channels with the shared match positions. Stage 1 hard-thresholds the
//! noisy group; stage 2 Wiener-filters it using the stage-1 result as pilot.

use nalgebra::Matrix3;

use super::dct::{dct_matrix, haar_forward, haar_inverse, transform_2d};
use crate::error::{Error, Result};
use crate::imgprep::{RasterImage, CHANNELS};
use crate::par;

/// RGB to YUV, one output channel per row.
pub const YUV_FORWARD: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [-0.14713, -0.28886, 0.436],
    [0.615, -0.51499, -0.10001],
];

const BLOCK: usize = 8;
const AREA: usize = BLOCK * BLOCK;
const MAX_GROUP: usize = 16;
const SEARCH: usize = 39;
const STEP: usize = 3;
const LAMBDA_3D: f64 = 2.7;
const LAMBDA_2D: f64 = 2.0;
/// Rows of reference blocks filtered together before aggregation.
const BAND: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cbm3dConfig {
    /// Noise standard deviation on the 0-255 scale.
    pub sigma: f64,
}

impl Default for Cbm3dConfig {
    fn default() -> Self {
        Self { sigma: 83.6 }
    }
}

impl Cbm3dConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("cbm3d sigma {} must be positive", self.sigma)));
        }
        Ok(())
    }

    /// Per-channel noise level on the `[0, 1]` scale after the color transform.
    fn channel_sigmas(&self) -> [f64; CHANNELS] {
        let s = self.sigma / 255.0;
        YUV_FORWARD.map(|row| s * row.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    fn strong(&self) -> bool {
        self.sigma > 40.0
    }
}

/// Aggregation checks for the hard-thresholding stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cbm3dDiagnostics {
    pub groups: usize,
    pub min_weight: f64,
    /// Largest deviation from 1 of the per-pixel sum of normalized weights.
    pub max_normalization_error: f64,
}

fn grid(len: usize) -> Vec<usize> {
    let last = len - BLOCK;
    let mut g: Vec<usize> = (0..=last).step_by(STEP).collect();
    if *g.last().expect("non-empty") != last {
        g.push(last);
    }
    g
}

struct Yuv {
    w: usize,
    h: usize,
    planes: [Vec<f64>; CHANNELS],
}

impl Yuv {
    fn block(&self, c: usize, x: usize, y: usize, out: &mut [f64]) {
        for dy in 0..BLOCK {
            let row = (y + dy) * self.w + x;
            out[dy * BLOCK..(dy + 1) * BLOCK].copy_from_slice(&self.planes[c][row..row + BLOCK]);
        }
    }
}

fn to_yuv(img: &RasterImage) -> Yuv {
    let (w, h) = img.dims();
    let rgb = img.planes();
    let planes = YUV_FORWARD.map(|row| (0..w * h).map(|i| row[0] * rgb[0][i] + row[1] * rgb[1][i] + row[2] * rgb[2][i]).collect());
    Yuv { w, h, planes }
}

fn from_yuv(yuv: &Yuv) -> Result<RasterImage> {
    let m = Matrix3::from_fn(|r, c| YUV_FORWARD[r][c]);
    let inv = m.try_inverse().expect("color transform is invertible");
    let p = &yuv.planes;
    let planes: [Vec<f64>; CHANNELS] = std::array::from_fn(|r| {
        (0..yuv.w * yuv.h)
            .map(|i| (inv[(r, 0)] * p[0][i] + inv[(r, 1)] * p[1][i] + inv[(r, 2)] * p[2][i]).clamp(0.0, 1.0))
            .collect()
    });
    RasterImage::from_planes(yuv.w, yuv.h, &planes)
}

/// 2D DCT of the luminance block at every position, optionally hard-thresholded (DC kept).
fn luminance_table(yuv: &Yuv, dct: &[f64], threshold: Option<f64>) -> Vec<f64> {
    let (nx, ny) = (yuv.w - BLOCK + 1, yuv.h - BLOCK + 1);
    par::map_range(ny, |y| {
        let mut row = vec![0.0; nx * AREA];
        let mut blk = [0.0; AREA];
        for x in 0..nx {
            yuv.block(0, x, y, &mut blk);
            let out = &mut row[x * AREA..(x + 1) * AREA];
            transform_2d(dct, BLOCK, &blk, out, false);
            if let Some(t) = threshold {
                out[1..].iter_mut().filter(|v| v.abs() < t).for_each(|v| *v = 0.0);
            }
        }
        row
    })
    .concat()
}

/// Up to [`MAX_GROUP`] positions whose normalized distance (0-255 scale) is
/// within `tau`, closest first, truncated to a power of two. The reference
/// itself is always first.
fn match_blocks(table: &[f64], nx: usize, ny: usize, rx: usize, ry: usize, tau: f64) -> Vec<(usize, usize)> {
    let half = SEARCH / 2;
    let limit = tau * AREA as f64 / (255.0 * 255.0);
    let reference = &table[(ry * nx + rx) * AREA..][..AREA];
    let mut found: Vec<(f64, usize, usize)> = Vec::new();
    for y in ry.saturating_sub(half)..=(ry + half).min(ny - 1) {
        for x in rx.saturating_sub(half)..=(rx + half).min(nx - 1) {
            let cand = &table[(y * nx + x) * AREA..][..AREA];
            let mut d = 0.0;
            for (a, b) in reference.iter().zip(cand) {
                d += (a - b) * (a - b);
                if d > limit {
                    break;
                }
            }
            if d <= limit {
                found.push((d, y, x));
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    // ties at distance 0 must still put the reference first
    if let Some(i) = found.iter().position(|&(_, y, x)| (x, y) == (rx, ry)) {
        let r = found.remove(i);
        found.insert(0, r);
    }
    found.truncate(MAX_GROUP);
    let n = 1 << (usize::BITS - 1 - found.len().leading_zeros());
    found.truncate(n);
    found.into_iter().map(|(_, y, x)| (x, y)).collect()
}

struct GroupEstimate {
    positions: Vec<(usize, usize)>,
    blocks: [Vec<f64>; CHANNELS],
    weights: [f64; CHANNELS],
}

fn stack(yuv: &Yuv, c: usize, positions: &[(usize, usize)], dct: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; positions.len() * AREA];
    let mut blk = [0.0; AREA];
    for (i, &(x, y)) in positions.iter().enumerate() {
        yuv.block(c, x, y, &mut blk);
        transform_2d(dct, BLOCK, &blk, &mut s[i * AREA..(i + 1) * AREA], false);
    }
    haar_forward(&mut s, positions.len(), AREA);
    s
}

fn unstack(mut s: Vec<f64>, n: usize, dct: &[f64]) -> Vec<f64> {
    haar_inverse(&mut s, n, AREA);
    let mut out = vec![0.0; n * AREA];
    for i in 0..n {
        transform_2d(dct, BLOCK, &s[i * AREA..(i + 1) * AREA], &mut out[i * AREA..(i + 1) * AREA], true);
    }
    out
}

fn hard_threshold_group(noisy: &Yuv, positions: Vec<(usize, usize)>, sigmas: &[f64; CHANNELS], dct: &[f64]) -> GroupEstimate {
    let n = positions.len();
    let mut weights = [0.0; CHANNELS];
    let blocks = std::array::from_fn(|c| {
        let mut s = stack(noisy, c, &positions, dct);
        let t = LAMBDA_3D * sigmas[c];
        let mut retained = 1usize;
        for v in s[1..].iter_mut() {
            if v.abs() < t {
                *v = 0.0;
            } else {
                retained += 1;
            }
        }
        weights[c] = 1.0 / retained as f64;
        unstack(s, n, dct)
    });
    GroupEstimate { positions, blocks, weights }
}

fn wiener_group(noisy: &Yuv, pilot: &Yuv, positions: Vec<(usize, usize)>, sigmas: &[f64; CHANNELS], dct: &[f64]) -> GroupEstimate {
    let n = positions.len();
    let mut weights = [0.0; CHANNELS];
    let blocks = std::array::from_fn(|c| {
        let mut s = stack(noisy, c, &positions, dct);
        let p = stack(pilot, c, &positions, dct);
        let var = sigmas[c] * sigmas[c];
        let mut energy = 1.0;
        for (v, q) in s[1..].iter_mut().zip(&p[1..]) {
            let omega = q * q / (q * q + var);
            *v *= omega;
            energy += omega * omega;
        }
        weights[c] = 1.0 / energy;
        unstack(s, n, dct)
    });
    GroupEstimate { positions, blocks, weights }
}

struct Accumulator {
    num: [Vec<f64>; CHANNELS],
    den: [Vec<f64>; CHANNELS],
}

impl Accumulator {
    fn new(len: usize) -> Self {
        Self { num: std::array::from_fn(|_| vec![0.0; len]), den: std::array::from_fn(|_| vec![0.0; len]) }
    }

    fn add(&mut self, w: usize, g: &GroupEstimate) {
        for (i, &(x, y)) in g.positions.iter().enumerate() {
            for c in 0..CHANNELS {
                let blk = &g.blocks[c][i * AREA..(i + 1) * AREA];
                for dy in 0..BLOCK {
                    let row = (y + dy) * w + x;
                    for dx in 0..BLOCK {
                        self.num[c][row + dx] += g.weights[c] * blk[dy * BLOCK + dx];
                        self.den[c][row + dx] += g.weights[c];
                    }
                }
            }
        }
    }

    fn finish(self, w: usize, h: usize) -> Yuv {
        let planes = std::array::from_fn(|c| self.num[c].iter().zip(&self.den[c]).map(|(n, d)| n / d).collect());
        Yuv { w, h, planes }
    }
}

/// Runs one stage over all reference blocks; returns the estimate and the
/// match positions and weights of every group.
/// Positions of one group and its per-channel aggregation weights.
type GroupRecord = (Vec<(usize, usize)>, [f64; CHANNELS]);

fn run_stage<F>(yuv: &Yuv, table: &[f64], tau: f64, filter: F) -> (Yuv, Vec<GroupRecord>)
where
    F: Fn(Vec<(usize, usize)>) -> GroupEstimate + Sync,
{
    let (w, h) = (yuv.w, yuv.h);
    let (nx, ny) = (w - BLOCK + 1, h - BLOCK + 1);
    let (xs, ys) = (grid(w), grid(h));
    let mut acc = Accumulator::new(w * h);
    let mut record = Vec::new();
    for band in ys.chunks(BAND) {
        let refs: Vec<(usize, usize)> = band.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
        let groups = par::map_slice(&refs, |&(rx, ry)| filter(match_blocks(table, nx, ny, rx, ry, tau)));
        for g in &groups {
            acc.add(w, g);
        }
        record.extend(groups.into_iter().map(|g| (g.positions, g.weights)));
    }
    (acc.finish(w, h), record)
}

fn denoise(img: &RasterImage, cfg: &Cbm3dConfig) -> Result<(RasterImage, Cbm3dDiagnostics)> {
    cfg.validate()?;
    let (w, h) = img.dims();
    if w < BLOCK || h < BLOCK {
        return Err(Error::Dimensions(format!("cbm3d needs at least {BLOCK}x{BLOCK} pixels, got {w}x{h}")));
    }
    let dct = dct_matrix(BLOCK);
    let sigmas = cfg.channel_sigmas();
    let noisy = to_yuv(img);

    let (tau1, tau2) = if cfg.strong() { (5000.0, 3500.0) } else { (2500.0, 400.0) };
    let prefilter = cfg.strong().then(|| LAMBDA_2D * sigmas[0]);
    let table = luminance_table(&noisy, &dct, prefilter);
    let (basic, record) = run_stage(&noisy, &table, tau1, |pos| hard_threshold_group(&noisy, pos, &sigmas, &dct));
    drop(table);

    let table = luminance_table(&basic, &dct, None);
    let (fine, _) = run_stage(&noisy, &table, tau2, |pos| wiener_group(&noisy, &basic, pos, &sigmas, &dct));

    let diag = stage_diagnostics(w, h, &record);
    Ok((from_yuv(&fine)?, diag))
}

fn stage_diagnostics(w: usize, h: usize, record: &[GroupRecord]) -> Cbm3dDiagnostics {
    let mut den = vec![[0.0; CHANNELS]; w * h];
    let mut min_weight = f64::INFINITY;
    let each = |f: &mut dyn FnMut(usize, &[f64; CHANNELS])| {
        for (positions, weights) in record {
            for &(x, y) in positions {
                for dy in 0..BLOCK {
                    for dx in 0..BLOCK {
                        f((y + dy) * w + x + dx, weights);
                    }
                }
            }
        }
    };
    each(&mut |p, ws| {
        for c in 0..CHANNELS {
            den[p][c] += ws[c];
            min_weight = min_weight.min(ws[c]);
        }
    });
    let mut sums = vec![[0.0; CHANNELS]; w * h];
    each(&mut |p, ws| {
        for c in 0..CHANNELS {
            sums[p][c] += ws[c] / den[p][c];
        }
    });
    let max_normalization_error = sums.iter().flatten().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    Cbm3dDiagnostics { groups: record.len(), min_weight, max_normalization_error }
}

pub fn cbm3d_denoise(img: &RasterImage, cfg: &Cbm3dConfig) -> Result<RasterImage> {
    denoise(img, cfg).map(|(out, _)| out)
}

pub fn cbm3d_denoise_with_diagnostics(img: &RasterImage, cfg: &Cbm3dConfig) -> Result<(RasterImage, Cbm3dDiagnostics)> {
    denoise(img, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;
    use crate::scenes::test_scene;
    use crate::speckle::{apply_speckle, synthesize_field, SpeckleParams};

    #[test]
    fn grid_covers_the_last_block() {
        assert_eq!(grid(8), vec![0]);
        assert_eq!(grid(14), vec![0, 3, 6]);
        assert_eq!(grid(16), vec![0, 3, 6, 8]);
    }

    #[test]
    fn groups_are_powers_of_two_led_by_the_reference() {
        let img = test_scene(40, 40, 2);
        let yuv = to_yuv(&img);
        let table = luminance_table(&yuv, &dct_matrix(BLOCK), None);
        for (rx, ry) in [(0, 0), (10, 20), (32, 32)] {
            let g = match_blocks(&table, 33, 33, rx, ry, 2500.0);
            assert!(g.len().is_power_of_two() && g.len() <= MAX_GROUP);
            assert_eq!(g[0], (rx, ry));
        }
    }

    #[test]
    fn constant_image_unchanged() {
        for sigma in [10.0, 83.6] {
            let img = RasterImage::from_fn(24, 20, |_, _, c| [0.2, 0.5, 0.7][c]);
            let out = cbm3d_denoise(&img, &Cbm3dConfig { sigma }).unwrap();
            for (a, b) in out.data().iter().zip(img.data()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn aggregation_weights_normalize() {
        let img = test_scene(48, 40, 4);
        let (out, d) = cbm3d_denoise_with_diagnostics(&img, &Cbm3dConfig { sigma: 30.0 }).unwrap();
        assert!(d.min_weight > 0.0);
        assert!(d.max_normalization_error < 1e-12);
        assert!(d.groups > 0);
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn reduces_speckle_on_a_test_pattern() {
        let clean = test_scene(64, 64, 11);
        let field = synthesize_field(64, 64, &SpeckleParams::new(2.0, 0.6, 3)).unwrap();
        let noisy = apply_speckle(&clean, &field).unwrap();
        let before = psnr(&noisy, &clean).unwrap();
        let out = cbm3d_denoise(&noisy, &Cbm3dConfig::default()).unwrap();
        let after = psnr(&out, &clean).unwrap();
        assert!(after >= before + 2.0, "before {before:.2} after {after:.2}");
    }

    #[test]
    fn schedule_independent() {
        let img = test_scene(40, 36, 9);
        let cfg = Cbm3dConfig { sigma: 50.0 };
        let a = cbm3d_denoise(&img, &cfg).unwrap();
        let b = par::sequential(|| cbm3d_denoise(&img, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_tiny_images() {
        assert!(cbm3d_denoise(&RasterImage::filled(7, 20, 0.5), &Cbm3dConfig::default()).is_err());
    }
}
