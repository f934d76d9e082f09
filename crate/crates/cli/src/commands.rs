use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use specklab_core::bench::{capped_psnr, emit_report, load_pairs, run_benchmark, tune_params, BenchmarkReport, Method, ParamGrid, ReportFormat};
use specklab_core::classical::DenoiserConfig;
use specklab_core::gan::{infer as run_generator, train as run_training, DiscriminatorSpec, Generator, GeneratorSpec, TrainConfig, TrainOutput};
use specklab_core::imgprep::{
    histogram_match, load_image, pair_side_by_side, resize_bicubic, save_png, split_by_group, unpair, PairedSample, RasterImage, Split,
};
use specklab_core::metrics::{mtf50, mtf_slanted_edge, ssim, MtfChannel, MtfConfig, SsimConfig};
use specklab_core::nn::Checkpoint;
use specklab_core::scenes::test_scene;
use specklab_core::speckle::{apply_speckle, synthesize_field, SpeckleParams};
use specklab_core::{Error, Result};

use crate::dataset::{group_of, list_images, pair_files, MANIFEST, PREPARED};
use crate::{BenchArgs, DenoiseArgs, EvalArgs, InferArgs, MtfArgs, PrepArgs, ReportArgs, SynthArgs, TrainArgs, TuneArgs};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string()
}

fn load_input(path: &Path, paired: bool) -> Result<RasterImage> {
    let img = load_image(path)?;
    if paired {
        Ok(unpair(&img)?.0)
    } else {
        Ok(img)
    }
}

/// Seed of item `i` under master seed `seed`.
fn item_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    create_dir(&a.out)?;
    let sources: Vec<(String, Option<PathBuf>)> = match &a.input {
        Some(dir) => list_images(dir, &[])?.into_iter().map(|p| (stem(&p), Some(p))).collect(),
        None => (0..a.scenes).map(|i| (format!("scene{i:04}"), None)).collect(),
    };
    for (i, (name, path)) in sources.iter().enumerate() {
        let base = item_seed(a.seed, i);
        let clean = match path {
            Some(p) => load_image(p)?,
            None => test_scene(a.size, a.size, base),
        };
        let params = SpeckleParams { grain_size: a.grain, contrast: a.contrast, per_channel_independent: !a.shared_field, seed: base ^ 0x5eed_5eed };
        let field = synthesize_field(clean.width(), clean.height(), &params)?;
        let noisy = apply_speckle(&clean, &field)?;
        save_png(&pair_side_by_side(&noisy, &clean, a.allow_any_size)?, a.out.join(format!("{name}.png")))?;
    }
    log::info!("wrote {} pairs to {}", sources.len(), a.out.display());
    Ok(())
}

pub fn prep(a: &PrepArgs) -> Result<()> {
    if let (Some(load), Some(fine)) = (a.load_size, a.fine_size) {
        if fine > load {
            return Err(Error::Config(format!("fine size {fine} exceeds load size {load}")));
        }
    }
    let out = a.out.clone().unwrap_or_else(|| a.dataroot.join(PREPARED));
    create_dir(&out)?;
    let mut written: Vec<(PathBuf, String)> = Vec::new();
    for path in list_images(&a.dataroot, &[PREPARED])? {
        if path.starts_with(&out) {
            continue;
        }
        let group = group_of(&a.dataroot, &path);
        let prepared = (|| -> Result<RasterImage> {
            let (mut input, mut target) = unpair(&load_image(&path)?)?;
            if let Some(n) = a.load_size {
                input = resize_bicubic(&input, n, n)?;
                target = resize_bicubic(&target, n, n)?;
            }
            if !a.no_histmatch {
                input = histogram_match(&input, &target);
            }
            pair_side_by_side(&input, &target, a.allow_any_size)
        })();
        match prepared {
            Ok(img) => {
                let name = if path.parent() == Some(a.dataroot.as_path()) { format!("{}.png", stem(&path)) } else { format!("{group}__{}.png", stem(&path)) };
                save_png(&img, out.join(&name))?;
                written.push((PathBuf::from(name), group));
            }
            Err(e @ Error::Dimensions(_)) | Err(e @ Error::Decode { .. }) => log::warn!("skipping {}: {e}", path.display()),
            Err(e) => return Err(e),
        }
    }
    if written.is_empty() {
        return Err(Error::Decode { path: a.dataroot.clone(), reason: "no usable pairs".into() });
    }
    let manifest = split_by_group(written.iter().map(|(p, g)| (p.as_path(), g.as_str())), a.test_fraction, a.seed)?;
    manifest.write_csv(out.join(MANIFEST))?;
    log::info!("prepared {} pairs ({} train, {} test) in {}", written.len(), manifest.count(Split::Train), manifest.count(Split::Test), out.display());
    Ok(())
}

pub fn denoise(a: &DenoiseArgs) -> Result<()> {
    let cfg = DenoiserConfig::parse(&a.method, &a.params)?;
    create_dir(&a.out)?;
    for path in list_images(&a.input, &[])? {
        let out = cfg.denoise(&load_input(&path, a.paired)?)?;
        save_png(&out, a.out.join(format!("{}.png", stem(&path))))?;
    }
    Ok(())
}

fn pairs_for(dataroot: &Path, split: Option<Split>) -> Result<Vec<PairedSample>> {
    let files = pair_files(dataroot, split)?;
    if files.is_empty() {
        return Ok(Vec::new());
    }
    load_pairs(&files)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let has_manifest = crate::dataset::find_manifest(&a.dataroot).is_some();
    let train_set = pairs_for(&a.dataroot, has_manifest.then_some(Split::Train))?;
    let val_set = if has_manifest { pairs_for(&a.dataroot, Some(Split::Test))? } else { Vec::new() };
    let cfg = TrainConfig {
        lambda_l1: a.lambda_l1,
        lr0: a.lr,
        niter: a.niter,
        niter_decay: a.niter_decay,
        pool_size: a.pool_size,
        load_size: a.load_size,
        fine_size: a.fine_size,
        batch_size: a.batch_size,
        seed: a.seed,
        gan_mode: a.gan_mode.parse()?,
        save_every: a.save_every,
    };
    let gspec = GeneratorSpec { depth: a.depth, base_channels: a.ngf, skip_connections: !a.no_skip, spectral_norm: a.sn_generator };
    let dspec = DiscriminatorSpec { n_layers: a.n_layers_d, base_channels: a.ndf, spectral_norm: !a.no_sn_discriminator };
    let output = TrainOutput { dir: a.checkpoints_dir.join(&a.name) };
    log::info!("training on {} pairs, validating on {}", train_set.len(), val_set.len());
    let outcome = run_training(&train_set, &val_set, gspec, dspec, &cfg, Some(&output))?;
    if let Some(last) = outcome.log.last() {
        log::info!("finished: {}", last.csv_line());
    }
    println!("{}", output.latest().display());
    Ok(())
}

fn load_generator(path: &Path) -> Result<Generator> {
    Generator::from_checkpoint(&Checkpoint::load(path)?)
}

pub fn infer(a: &InferArgs) -> Result<()> {
    let gen = load_generator(&a.checkpoint)?;
    create_dir(&a.out)?;
    for path in list_images(&a.input, &[])? {
        let out = run_generator(&gen, &load_input(&path, a.paired)?)?;
        save_png(&out, a.out.join(format!("{}.png", stem(&path))))?;
    }
    Ok(())
}

fn find_truth(dir: &Path, pred: &Path) -> Option<PathBuf> {
    let name = pred.file_name()?;
    if dir.join(name).is_file() {
        return Some(dir.join(name));
    }
    let s = stem(pred);
    ["png", "jpg", "jpeg"].iter().map(|e| dir.join(format!("{s}.{e}"))).find(|p| p.is_file())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&a.out)?;
    w.write_record(["file", "psnr_db", "ssim"])?;
    let (mut sum_p, mut sum_s, mut n) = (0.0, 0.0, 0usize);
    for pred_path in list_images(&a.pred, &[])? {
        let Some(truth_path) = find_truth(&a.truth, &pred_path) else {
            log::warn!("no ground truth for {}", pred_path.display());
            continue;
        };
        let pred = load_image(&pred_path)?;
        let mut truth = load_image(&truth_path)?;
        if truth.width() == 2 * pred.width() && truth.height() == pred.height() {
            truth = unpair(&truth)?.1;
        }
        let p = capped_psnr(&pred, &truth)?;
        let s = ssim(&pred, &truth, &SsimConfig::default())?;
        w.write_record([pred_path.file_name().and_then(|f| f.to_str()).unwrap_or(""), &p.to_string(), &s.to_string()])?;
        sum_p += p;
        sum_s += s;
        n += 1;
    }
    w.flush().map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    if n == 0 {
        return Err(Error::Decode { path: a.pred.clone(), reason: "no prediction had a matching ground truth".into() });
    }
    println!("{n} images: mean PSNR {:.3} dB, mean SSIM {:.4}", sum_p / n as f64, sum_s / n as f64);
    Ok(())
}

fn parse_channel(s: &str) -> Result<MtfChannel> {
    Ok(match s {
        "luminance" | "y" => MtfChannel::Luminance,
        "r" | "red" => MtfChannel::Single(0),
        "g" | "green" => MtfChannel::Single(1),
        "b" | "blue" => MtfChannel::Single(2),
        _ => return Err(Error::Config(format!("unknown channel '{s}' (luminance|r|g|b)"))),
    })
}

pub fn mtf(a: &MtfArgs) -> Result<()> {
    let cfg = MtfConfig { oversample: a.oversample, ..Default::default() };
    let curve = mtf_slanted_edge(&load_image(&a.roi)?, parse_channel(&a.channel)?, &cfg)?;
    curve.write_csv(&a.out)?;
    match mtf50(&curve) {
        Ok(f) => println!("MTF50 {f:.4} cycles/px"),
        Err(e) => log::warn!("{e}"),
    }
    Ok(())
}

pub fn tune(a: &TuneArgs) -> Result<()> {
    let grid: ParamGrid = a.grid.parse()?;
    let has_manifest = crate::dataset::find_manifest(&a.dataroot).is_some();
    let pairs = pairs_for(&a.dataroot, has_manifest.then_some(Split::Train))?;
    let set = tune_params(&a.method, &grid, &pairs)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&a.out)?;
    w.write_record(["params", "psnr_db", "ssim", "pareto", "recommended"])?;
    for (i, c) in set.evaluated.iter().enumerate() {
        w.write_record([c.params.clone(), c.psnr.to_string(), c.ssim.to_string(), set.pareto.contains(&i).to_string(), (i == set.knee).to_string()])?;
    }
    w.flush().map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    let best = set.recommended();
    println!("recommended {} {}: PSNR {:.3} dB, SSIM {:.4}", a.method, best.params, best.psnr, best.ssim);
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input).map_err(|e| Error::Io { path: a.input.clone(), source: e })?;
    emit_report(&BenchmarkReport::from_csv(&text)?, ReportFormat::for_path(&a.out), &a.out)
}

fn method_overrides(items: &[String]) -> Result<BTreeMap<String, String>> {
    let mut out: BTreeMap<String, String> = BTreeMap::new();
    for item in items {
        let (m, p) = item.split_once(':').ok_or_else(|| Error::Config(format!("--method-params '{item}' is not method:key=value,...")))?;
        let entry = out.entry(m.trim().to_string()).or_default();
        if !entry.is_empty() {
            entry.push(',');
        }
        entry.push_str(p.trim());
    }
    Ok(out)
}

fn build_method(name: &str, a: &BenchArgs, overrides: &BTreeMap<String, String>) -> Result<Method> {
    let params = overrides.get(name).map(String::as_str).unwrap_or("");
    match name {
        "identity" => Ok(Method::Identity),
        "deeplsr" => {
            let ckpt = a.checkpoint.as_ref().ok_or_else(|| Error::Config("method deeplsr needs --checkpoint".into()))?;
            Ok(Method::Learned { name: "deeplsr".into(), generator: Box::new(load_generator(ckpt)?) })
        }
        "cbm3d" | "ksvd" => {
            let (key, flag) = if name == "cbm3d" { ("sigma", &a.cbm3d_sigma) } else { ("sigma_noise", &a.ksvd_sigma) };
            let explicit = params.split(',').any(|kv| kv.split_once('=').is_some_and(|(k, _)| k.trim() == key));
            if explicit {
                return Ok(Method::Classical(DenoiserConfig::parse(name, params)?));
            }
            if flag == "auto" {
                return Ok(Method::MeasuredSigma(DenoiserConfig::parse(name, params)?));
            }
            let joined = if params.is_empty() { format!("{key}={flag}") } else { format!("{params},{key}={flag}") };
            Ok(Method::Classical(DenoiserConfig::parse(name, &joined)?))
        }
        _ => Ok(Method::Classical(DenoiserConfig::parse(name, params)?)),
    }
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let overrides = method_overrides(&a.method_params)?;
    let methods = a.methods.iter().map(|m| build_method(m.trim(), a, &overrides)).collect::<Result<Vec<_>>>()?;
    let has_manifest = crate::dataset::find_manifest(&a.dataroot).is_some();
    let split = (has_manifest && !a.all_splits).then_some(Split::Test);
    let pairs = pairs_for(&a.dataroot, split)?;
    let report = run_benchmark(&pairs, &methods, a.timing)?;
    emit_report(&report, ReportFormat::for_path(&a.out), &a.out)?;
    print!("{}", report.to_markdown());
    Ok(())
}
