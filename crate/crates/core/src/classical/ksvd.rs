//! K-SVD dictionary denoising.
//!
//! A dictionary initialized with overcomplete DCT atoms is adapted to blocks
//! sampled from the noisy image by alternating OMP sparse coding with rank-1
//! SVD atom updates. Every overlapping block is then coded against the
//! trained dictionary and the reconstructions are averaged.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::omp::{omp, OmpCode};
use crate::error::{Error, Result};
use crate::imgprep::{RasterImage, CHANNELS};
use crate::par;

/// OMP stops once the residual norm drops to `factor * sigma * sqrt(block volume)`.
pub const OMP_TOLERANCE_FACTOR: f64 = 1.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockShape {
    pub h: usize,
    pub w: usize,
    pub channels: usize,
}

impl BlockShape {
    pub const fn new(h: usize, w: usize, channels: usize) -> Self {
        Self { h, w, channels }
    }

    pub fn volume(&self) -> usize {
        self.h * self.w * self.channels
    }
}

impl fmt::Display for BlockShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.channels)
    }
}

impl FromStr for BlockShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split('x')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("block '{s}' is not of the form HxWxC")))?;
        match parts[..] {
            [h, w, c] => Ok(Self::new(h, w, c)),
            _ => Err(Error::Config(format!("block '{s}' is not of the form HxWxC"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsvdConfig {
    pub block: BlockShape,
    pub dict_size: usize,
    pub train_blocks: usize,
    /// Noise level on the `[0, 1]` scale used by the OMP stopping rule.
    pub sigma_noise: f64,
    /// Maximum atoms per block; defaults to a tenth of the block volume.
    pub sparsity_target: Option<usize>,
    pub rounds: usize,
    pub seed: u64,
    /// Code blocks with their mean removed and add it back afterwards.
    pub remove_mean: bool,
}

impl Default for KsvdConfig {
    fn default() -> Self {
        Self {
            block: BlockShape::new(5, 5, 3),
            dict_size: 1000,
            train_blocks: 1000,
            sigma_noise: 0.01,
            sparsity_target: None,
            rounds: 10,
            seed: 0,
            remove_mean: true,
        }
    }
}

impl KsvdConfig {
    pub fn effective_sparsity(&self) -> usize {
        self.sparsity_target.unwrap_or((self.block.volume() / 10).max(1))
    }

    pub fn tolerance(&self) -> f64 {
        OMP_TOLERANCE_FACTOR * self.sigma_noise * (self.block.volume() as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.block;
        if b.h == 0 || b.w == 0 || !(b.channels == 1 || b.channels == CHANNELS) {
            return Err(Error::Config(format!("K-SVD block {b} needs positive sides and 1 or 3 channels")));
        }
        if self.dict_size == 0 || self.train_blocks == 0 || self.effective_sparsity() == 0 {
            return Err(Error::Config("K-SVD dictionary size, training blocks and sparsity must be positive".into()));
        }
        if !(self.sigma_noise >= 0.0 && self.sigma_noise.is_finite()) {
            return Err(Error::Config(format!("K-SVD sigma {} must be non-negative", self.sigma_noise)));
        }
        Ok(())
    }
}

/// Unit-norm atoms stored contiguously (`atoms[k * dim..(k + 1) * dim]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub dim: usize,
    pub atoms: Vec<f64>,
}

impl Dictionary {
    pub fn new(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || !atoms.len().is_multiple_of(dim) {
            return Err(Error::Config(format!("{} values do not form atoms of length {dim}", atoms.len())));
        }
        let mut d = Self { dim, atoms };
        for a in d.atoms.chunks_mut(dim) {
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Degenerate("dictionary atom with zero norm".into()));
            }
            a.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.atoms.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k * self.dim..(k + 1) * self.dim]
    }

    fn view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.len(), self.dim), &self.atoms).expect("sized by construction")
    }

    fn gram(&self) -> Vec<f64> {
        let d = self.view();
        let mut g = Array2::zeros((self.len(), self.len()));
        general_mat_mul(1.0, &d, &d.t(), 0.0, &mut g);
        g.into_raw_vec_and_offset().0
    }

    /// `signals (rows) x atoms` correlation matrix, row-major.
    fn correlations(&self, signals: &[f64]) -> Vec<f64> {
        let rows = signals.len() / self.dim;
        let x = ArrayView2::from_shape((rows, self.dim), signals).expect("whole signals");
        let mut out = Array2::zeros((rows, self.len()));
        general_mat_mul(1.0, &x, &self.view().t(), 0.0, &mut out);
        out.into_raw_vec_and_offset().0
    }

    fn reconstruct(&self, code: &OmpCode, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&a, &c) in code.atoms.iter().zip(&code.coeffs) {
            for (o, d) in out.iter_mut().zip(self.atom(a)) {
                *o += c * d;
            }
        }
    }
}

fn dct_1d(len: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|j| {
            let mut v: Vec<f64> = (0..len).map(|i| (std::f64::consts::PI * (j * i) as f64 / count as f64).cos()).collect();
            if j > 0 {
                let mean = v.iter().sum::<f64>() / len as f64;
                v.iter_mut().for_each(|x| *x -= mean);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            v
        })
        .collect()
}

/// Separable overcomplete DCT dictionary with `size` atoms over blocks
/// ordered `(channel, row, column)`. Atom 0 is the constant (DC) atom.
pub fn overcomplete_dct_dictionary(block: BlockShape, size: usize) -> Result<Dictionary> {
    let dims = [block.channels, block.h, block.w];
    let active = dims.iter().filter(|&&d| d > 1).count().max(1) as u32;
    let mut per_dim = 1usize;
    while per_dim.pow(active) < size {
        per_dim += 1;
    }
    let counts: Vec<usize> = dims.iter().map(|&d| if d > 1 { per_dim } else { 1 }).collect();
    let bases: Vec<Vec<Vec<f64>>> = dims.iter().zip(&counts).map(|(&d, &m)| dct_1d(d, m)).collect();
    let n = block.volume();
    let mut atoms = Vec::with_capacity(size * n);
    'outer: for jc in 0..counts[0] {
        for jy in 0..counts[1] {
            for jx in 0..counts[2] {
                if atoms.len() == size * n {
                    break 'outer;
                }
                for ic in 0..dims[0] {
                    for iy in 0..dims[1] {
                        for ix in 0..dims[2] {
                            atoms.push(bases[0][jc][ic] * bases[1][jy][iy] * bases[2][jx][ix]);
                        }
                    }
                }
            }
        }
    }
    Dictionary::new(n, atoms)
}

/// What happened during dictionary training.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KsvdDiagnostics {
    /// Sum of squared training residuals after the sparse-coding step of each round.
    pub objective_per_round: Vec<f64>,
    /// Unused atoms replaced by the worst-represented training block, per round.
    pub replaced_atoms: Vec<usize>,
}

/// Block source: one or three planes sharing a `w x h` grid.
struct Planes<'a> {
    planes: Vec<&'a [f64]>,
    w: usize,
    h: usize,
    bh: usize,
    bw: usize,
}

impl Planes<'_> {
    fn extract(&self, x: usize, y: usize, out: &mut [f64]) {
        let mut i = 0;
        for p in &self.planes {
            for dy in 0..self.bh {
                let row = (y + dy) * self.w + x;
                out[i..i + self.bw].copy_from_slice(&p[row..row + self.bw]);
                i += self.bw;
            }
        }
    }

    /// Extracts a block, subtracts its mean when `remove_mean` is set and returns that mean.
    fn extract_centered(&self, x: usize, y: usize, remove_mean: bool, out: &mut [f64]) -> f64 {
        self.extract(x, y, out);
        if !remove_mean {
            return 0.0;
        }
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        out.iter_mut().for_each(|v| *v -= mean);
        mean
    }

    fn positions(&self) -> (usize, usize) {
        (self.w - self.bw + 1, self.h - self.bh + 1)
    }
}

fn code_all(dict: &Dictionary, gram: &[f64], signals: &[f64], tol: f64, max_atoms: usize) -> Vec<OmpCode> {
    let n = dict.dim;
    let k = dict.len();
    let corr = dict.correlations(signals);
    par::map_range(signals.len() / n, |t| {
        let x = &signals[t * n..(t + 1) * n];
        let energy = x.iter().map(|v| v * v).sum();
        omp(gram, k, &corr[t * k..(t + 1) * k], energy, tol, max_atoms)
    })
}

fn train(planes: &Planes<'_>, cfg: &KsvdConfig, seed: u64) -> Result<(Dictionary, KsvdDiagnostics)> {
    let n = cfg.block.volume();
    let (nx, ny) = planes.positions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = cfg.train_blocks;
    let mut x = vec![0.0; t * n];
    for i in 0..t {
        let (bx, by) = (rng.random_range(0..nx), rng.random_range(0..ny));
        planes.extract_centered(bx, by, cfg.remove_mean, &mut x[i * n..(i + 1) * n]);
    }

    let mut dict = overcomplete_dct_dictionary(cfg.block, cfg.dict_size)?;
    let k = dict.len();
    let mut diag = KsvdDiagnostics::default();
    let (tol, max_atoms) = (cfg.tolerance(), cfg.effective_sparsity());

    for round in 0..cfg.rounds {
        let gram = dict.gram();
        let mut codes = code_all(&dict, &gram, &x, tol, max_atoms);
        let mut resid = x.clone();
        let mut recon = vec![0.0; n];
        for (i, code) in codes.iter().enumerate() {
            dict.reconstruct(code, &mut recon);
            resid[i * n..(i + 1) * n].iter_mut().zip(&recon).for_each(|(r, v)| *r -= v);
        }
        diag.objective_per_round.push(resid.iter().map(|v| v * v).sum());

        let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
        for (i, code) in codes.iter().enumerate() {
            for (slot, &a) in code.atoms.iter().enumerate() {
                users[a].push((i, slot));
            }
        }

        let mut replaced = 0;
        let mut taken = vec![false; t];
        for atom in 0..k {
            let u = &users[atom];
            if u.is_empty() {
                let worst = (0..t)
                    .filter(|&i| !taken[i])
                    .map(|i| (i, resid[i * n..(i + 1) * n].iter().map(|v| v * v).sum::<f64>()))
                    .fold(None, |best: Option<(usize, f64)>, cur| match best {
                        Some(b) if b.1 >= cur.1 => Some(b),
                        _ => Some(cur),
                    });
                if let Some((i, _)) = worst {
                    let block = &x[i * n..(i + 1) * n];
                    let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        taken[i] = true;
                        replaced += 1;
                        for (d, v) in dict.atoms[atom * n..(atom + 1) * n].iter_mut().zip(block) {
                            *d = v / norm;
                        }
                    }
                }
                continue;
            }
            // restricted residual with this atom's contribution added back
            let d_old = dict.atom(atom).to_vec();
            let e = DMatrix::from_fn(n, u.len(), |r, c| {
                let (i, slot) = u[c];
                resid[i * n + r] + d_old[r] * codes[i].coeffs[slot]
            });
            let svd = e.clone().svd(true, false);
            let best = svd.singular_values.imax();
            let left = svd.u.as_ref().expect("requested U").column(best).into_owned();
            for (d, v) in dict.atoms[atom * n..(atom + 1) * n].iter_mut().zip(left.iter()) {
                *d = *v;
            }
            for (c, &(i, slot)) in u.iter().enumerate() {
                let col = e.column(c);
                let g: f64 = col.iter().zip(left.iter()).map(|(a, b)| a * b).sum();
                codes[i].coeffs[slot] = g;
                for r in 0..n {
                    resid[i * n + r] = col[r] - left[r] * g;
                }
            }
        }
        if replaced > 0 {
            log::info!("K-SVD round {round}: replaced {replaced} unused atoms with worst-represented blocks");
        }
        diag.replaced_atoms.push(replaced);
    }
    Ok((dict, diag))
}

fn denoise_planes(planes: &Planes<'_>, dict: &Dictionary, cfg: &KsvdConfig) -> Vec<Vec<f64>> {
    let n = dict.dim;
    let (nx, ny) = planes.positions();
    let gram = dict.gram();
    let (tol, max_atoms) = (cfg.tolerance(), cfg.effective_sparsity());
    let (w, h) = (planes.w, planes.h);
    let mut acc = vec![vec![0.0; w * h]; planes.planes.len()];
    let mut count = vec![0u32; w * h];
    const BAND: usize = 16;

    for band_start in (0..ny).step_by(BAND) {
        let band_rows = BAND.min(ny - band_start);
        let rows: Vec<Vec<f64>> = par::map_range(band_rows, |r| {
            let by = band_start + r;
            let mut signals = vec![0.0; nx * n];
            let means: Vec<f64> = (0..nx).map(|bx| planes.extract_centered(bx, by, cfg.remove_mean, &mut signals[bx * n..(bx + 1) * n])).collect();
            let corr = dict.correlations(&signals);
            let k = dict.len();
            let mut out = vec![0.0; nx * n];
            for bx in 0..nx {
                let x = &signals[bx * n..(bx + 1) * n];
                let energy = x.iter().map(|v| v * v).sum();
                let code = omp(&gram, k, &corr[bx * k..(bx + 1) * k], energy, tol, max_atoms);
                let block = &mut out[bx * n..(bx + 1) * n];
                dict.reconstruct(&code, block);
                block.iter_mut().for_each(|v| *v += means[bx]);
            }
            out
        });
        for (r, recon) in rows.iter().enumerate() {
            let by = band_start + r;
            for bx in 0..nx {
                let block = &recon[bx * n..(bx + 1) * n];
                let mut i = 0;
                for a in acc.iter_mut() {
                    for dy in 0..planes.bh {
                        let row = (by + dy) * w + bx;
                        for dx in 0..planes.bw {
                            a[row + dx] += block[i];
                            i += 1;
                        }
                    }
                }
                for dy in 0..planes.bh {
                    for dx in 0..planes.bw {
                        count[(by + dy) * w + bx + dx] += 1;
                    }
                }
            }
        }
    }
    for a in acc.iter_mut() {
        for (v, &c) in a.iter_mut().zip(&count) {
            *v = (*v / f64::from(c)).clamp(0.0, 1.0);
        }
    }
    acc
}

fn check_fit(img: &RasterImage, cfg: &KsvdConfig) -> Result<()> {
    cfg.validate()?;
    let (w, h) = img.dims();
    if cfg.block.w > w || cfg.block.h > h {
        return Err(Error::Dimensions(format!("K-SVD block {} does not fit a {w}x{h} image", cfg.block)));
    }
    Ok(())
}

/// Channel groups processed together: all three channels, or each one alone.
fn channel_groups(cfg: &KsvdConfig) -> Vec<Vec<usize>> {
    if cfg.block.channels == CHANNELS {
        vec![(0..CHANNELS).collect()]
    } else {
        (0..CHANNELS).map(|c| vec![c]).collect()
    }
}

/// Trains a dictionary on blocks of `img` (the first channel group when blocks are single-channel).
pub fn train_dictionary(img: &RasterImage, cfg: &KsvdConfig) -> Result<(Dictionary, KsvdDiagnostics)> {
    check_fit(img, cfg)?;
    let all = img.planes();
    let group = &channel_groups(cfg)[0];
    let planes = Planes { planes: group.iter().map(|&c| all[c].as_slice()).collect(), w: img.width(), h: img.height(), bh: cfg.block.h, bw: cfg.block.w };
    train(&planes, cfg, cfg.seed)
}

pub fn ksvd_denoise(img: &RasterImage, cfg: &KsvdConfig) -> Result<RasterImage> {
    ksvd_denoise_with_diagnostics(img, cfg).map(|(out, _)| out)
}

/// Denoises and returns the training diagnostics of every channel group.
pub fn ksvd_denoise_with_diagnostics(img: &RasterImage, cfg: &KsvdConfig) -> Result<(RasterImage, Vec<KsvdDiagnostics>)> {
    check_fit(img, cfg)?;
    let all = img.planes();
    let mut out: [Vec<f64>; CHANNELS] = Default::default();
    let mut diags = Vec::new();
    for (gi, group) in channel_groups(cfg).iter().enumerate() {
        let planes = Planes { planes: group.iter().map(|&c| all[c].as_slice()).collect(), w: img.width(), h: img.height(), bh: cfg.block.h, bw: cfg.block.w };
        let (dict, diag) = train(&planes, cfg, cfg.seed.wrapping_add(gi as u64))?;
        for (c, plane) in group.iter().zip(denoise_planes(&planes, &dict, cfg)) {
            out[*c] = plane;
        }
        diags.push(diag);
    }
    Ok((RasterImage::from_planes(img.width(), img.height(), &out)?, diags))
}

/// Codes every block of `img` against a fixed dictionary, skipping training.
pub fn ksvd_denoise_with_dictionary(img: &RasterImage, cfg: &KsvdConfig, dict: &Dictionary) -> Result<RasterImage> {
    check_fit(img, cfg)?;
    if dict.dim != cfg.block.volume() {
        return Err(Error::Shape(format!("dictionary atoms have length {}, blocks have {}", dict.dim, cfg.block.volume())));
    }
    let all = img.planes();
    let mut out: [Vec<f64>; CHANNELS] = Default::default();
    for group in channel_groups(cfg) {
        let planes = Planes { planes: group.iter().map(|&c| all[c].as_slice()).collect(), w: img.width(), h: img.height(), bh: cfg.block.h, bw: cfg.block.w };
        for (c, plane) in group.iter().zip(denoise_planes(&planes, dict, cfg)) {
            out[*c] = plane;
        }
    }
    RasterImage::from_planes(img.width(), img.height(), &out)
}
