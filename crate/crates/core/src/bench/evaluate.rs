use std::path::Path;
use std::time::Instant;

use super::report::{BenchmarkReport, ReportRow};
use crate::classical::DenoiserConfig;
use crate::error::{Error, Result};
use crate::gan::{infer, Generator, PSNR_CAP_DB};
use crate::imgprep::{load_image, unpair, PairedSample, RasterImage};
use crate::metrics::{psnr, ssim, SsimConfig};
use crate::par;

pub type ImageFn = Box<dyn Fn(&RasterImage) -> Result<RasterImage> + Sync>;

/// A speckle-reduction method under evaluation.
pub enum Method {
    /// Returns the speckled input unchanged.
    Identity,
    Classical(DenoiserConfig),
    /// A denoiser whose noise level is set per image from the RMS of (input - target):
    /// CBM3D `sigma` on the 0-255 scale, K-SVD `sigma_noise` on the [0, 1] scale.
    /// Methods without a noise parameter run unchanged.
    MeasuredSigma(DenoiserConfig),
    Learned { name: String, generator: Box<Generator> },
    Custom { name: String, params: String, run: ImageFn },
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Identity => "identity".into(),
            Method::Classical(c) => c.method().into(),
            Method::MeasuredSigma(c) => c.method().into(),
            Method::Learned { name, .. } | Method::Custom { name, .. } => name.clone(),
        }
    }

    pub fn params(&self) -> String {
        match self {
            Method::Identity => String::new(),
            Method::Classical(c) => c.to_string(),
            Method::MeasuredSigma(c) => c
                .to_string()
                .split(',')
                .map(|kv| match kv.split_once('=') {
                    Some((k @ ("sigma" | "sigma_noise"), _)) => format!("{k}=auto"),
                    _ => kv.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            Method::Learned { generator, .. } => {
                let s = generator.spec;
                format!("depth={},base_channels={},skip_connections={}", s.depth, s.base_channels, s.skip_connections)
            }
            Method::Custom { params, .. } => params.clone(),
        }
    }

    pub fn apply(&self, pair: &PairedSample) -> Result<RasterImage> {
        match self {
            Method::Identity => Ok(pair.input.clone()),
            Method::Classical(c) => c.denoise(&pair.input),
            Method::MeasuredSigma(c) => {
                let sigma = measured_noise_sigma(&pair.input, &pair.target)?.max(1e-3);
                let mut c = c.clone();
                match &mut c {
                    DenoiserConfig::Cbm3d(k) => k.sigma = sigma,
                    DenoiserConfig::Ksvd(k) => k.sigma_noise = sigma / 255.0,
                    DenoiserConfig::Median(_) | DenoiserConfig::Nlm(_) => {}
                }
                c.denoise(&pair.input)
            }
            Method::Learned { generator, .. } => infer(generator, &pair.input),
            Method::Custom { run, .. } => run(&pair.input),
        }
    }
}

/// RMS difference of two images on the 0-255 scale.
pub fn measured_noise_sigma(noisy: &RasterImage, truth: &RasterImage) -> Result<f64> {
    if noisy.dims() != truth.dims() {
        return Err(Error::Dimensions(format!("cannot compare {:?} with {:?}", noisy.dims(), truth.dims())));
    }
    let sq: Vec<f64> = noisy.data().iter().zip(truth.data()).map(|(a, b)| (a - b) * (a - b)).collect();
    Ok((par::pairwise_sum(&sq) / sq.len() as f64).sqrt() * 255.0)
}

/// PSNR with identical images reported as the cap.
pub fn capped_psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    match psnr(a, b) {
        Ok(v) => Ok(v.min(PSNR_CAP_DB)),
        Err(Error::IdenticalImages) => Ok(PSNR_CAP_DB),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scores {
    psnr: f64,
    ssim: f64,
    ms: f64,
}

fn score(out: &RasterImage, target: &RasterImage, ms: f64) -> Result<Scores> {
    Ok(Scores { psnr: capped_psnr(out, target)?, ssim: ssim(out, target, &SsimConfig::default())?, ms })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    par::pairwise_sum(&v) / v.len() as f64
}

fn row(name: String, params: String, scores: &[Scores], baseline: (f64, f64), timing: bool) -> ReportRow {
    let psnr_db = mean(scores.iter().map(|s| s.psnr));
    let ssim = mean(scores.iter().map(|s| s.ssim));
    ReportRow {
        method: name,
        params,
        psnr_db,
        psnr_gain_db: psnr_db - baseline.0,
        ssim,
        ssim_gain: ssim - baseline.1,
        ms_per_image: timing.then(|| mean(scores.iter().map(|s| s.ms))),
    }
}

/// Mean PSNR and SSIM of the raw inputs against their targets.
pub fn baseline_scores(pairs: &[PairedSample]) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::Config("no image pairs to evaluate".into()));
    }
    let s = par::map_slice(pairs, |p| score(&p.input, &p.target, 0.0)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok((mean(s.iter().map(|s| s.psnr)), mean(s.iter().map(|s| s.ssim))))
}

/// Scores `method` on `pairs`. Improvements are relative to the raw inputs.
/// `ms_per_image` is filled only when `timing` is set, so untimed reports are reproducible byte for byte.
pub fn evaluate_method(method: &Method, pairs: &[PairedSample], timing: bool) -> Result<ReportRow> {
    let base = baseline_scores(pairs)?;
    evaluate_against(method, pairs, base, timing)
}

fn evaluate_against(method: &Method, pairs: &[PairedSample], base: (f64, f64), timing: bool) -> Result<ReportRow> {
    let scores = par::map_slice(pairs, |p| {
        let t = Instant::now();
        let out = method.apply(p)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        score(&out, &p.target, ms)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(row(method.name(), method.params(), &scores, base, timing))
}

/// Baseline row (`laser_input`) followed by one row per method.
pub fn run_benchmark(pairs: &[PairedSample], methods: &[Method], timing: bool) -> Result<BenchmarkReport> {
    let base = baseline_scores(pairs)?;
    let mut rows = vec![ReportRow {
        method: "laser_input".into(),
        params: String::new(),
        psnr_db: base.0,
        psnr_gain_db: 0.0,
        ssim: base.1,
        ssim_gain: 0.0,
        ms_per_image: timing.then_some(0.0),
    }];
    for m in methods {
        log::info!("evaluating {} on {} pairs", m.name(), pairs.len());
        rows.push(evaluate_against(m, pairs, base, timing)?);
    }
    Ok(BenchmarkReport { rows })
}

/// Loads side-by-side pair images, skipping undecodable files with a warning.
pub fn load_pairs<P: AsRef<Path>>(paths: &[(P, String)]) -> Result<Vec<PairedSample>> {
    let mut out = Vec::new();
    for (path, group) in paths {
        let path = path.as_ref();
        match load_image(path).and_then(|img| unpair(&img)).and_then(|(i, t)| PairedSample::new(i, t, group.clone(), path)) {
            Ok(p) => out.push(p),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if out.is_empty() && !paths.is_empty() {
        return Err(Error::Decode { path: paths[0].0.as_ref().to_path_buf(), reason: "no pair in the set could be decoded".into() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::synthetic_pairs;

    #[test]
    fn identity_has_zero_gain() {
        let pairs = synthetic_pairs(3, 32, 2.0, 0.6, 1).unwrap();
        let r = evaluate_method(&Method::Identity, &pairs, false).unwrap();
        assert_eq!((r.psnr_gain_db, r.ssim_gain), (0.0, 0.0));
        assert_eq!(r.ms_per_image, None);
    }

    #[test]
    fn oracle_is_capped() {
        let pairs = synthetic_pairs(2, 32, 2.0, 0.6, 2).unwrap();
        let targets: Vec<(RasterImage, RasterImage)> = pairs.iter().map(|p| (p.input.clone(), p.target.clone())).collect();
        let oracle = Method::Custom {
            name: "oracle".into(),
            params: String::new(),
            run: Box::new(move |img| Ok(targets.iter().find(|(i, _)| i == img).expect("known input").1.clone())),
        };
        let r = evaluate_method(&oracle, &pairs, true).unwrap();
        assert_eq!(r.psnr_db, PSNR_CAP_DB);
        assert!((r.ssim - 1.0).abs() < 1e-12);
        assert!(r.ms_per_image.is_some());
    }

    #[test]
    fn gains_are_antisymmetric() {
        let pairs = synthetic_pairs(2, 32, 2.0, 0.6, 3).unwrap();
        let median = Method::Classical(DenoiserConfig::parse("median", "kernel=3").unwrap());
        let forward = evaluate_method(&median, &pairs, false).unwrap();
        // swap roles: the denoised image becomes the "input" and the original input the "method output"
        let swapped: Vec<PairedSample> = pairs.iter().map(|p| PairedSample::new(median.apply(p).unwrap(), p.target.clone(), "g", "p").unwrap()).collect();
        let originals: Vec<(RasterImage, RasterImage)> = pairs.iter().zip(&swapped).map(|(p, s)| (s.input.clone(), p.input.clone())).collect();
        let back = Method::Custom { name: "raw".into(), params: String::new(), run: Box::new(move |img| Ok(originals.iter().find(|(d, _)| d == img).unwrap().1.clone())) };
        let reverse = evaluate_method(&back, &swapped, false).unwrap();
        assert!((forward.psnr_gain_db + reverse.psnr_gain_db).abs() < 1e-9);
        assert!((forward.ssim_gain + reverse.ssim_gain).abs() < 1e-12);
    }

    #[test]
    fn measured_sigma() {
        let a = RasterImage::filled(4, 4, 0.5);
        let b = RasterImage::filled(4, 4, 0.5 + 10.0 / 255.0);
        assert!((measured_noise_sigma(&a, &b).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn undecodable_pairs_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.png");
        let pairs = synthetic_pairs(1, 16, 2.0, 0.6, 4).unwrap();
        crate::imgprep::save_png(&crate::imgprep::pair_side_by_side(&pairs[0].input, &pairs[0].target, false).unwrap(), &good).unwrap();
        let bad = dir.path().join("bad.png");
        std::fs::write(&bad, b"not a png").unwrap();
        let loaded = load_pairs(&[(good, "a".to_string()), (bad.clone(), "b".to_string())]).unwrap();
        assert_eq!(loaded.len(), 1);
        assert!(load_pairs(&[(bad, "b".to_string())]).is_err());
    }
}
