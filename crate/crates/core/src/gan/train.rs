//! Adversarial training loop.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::infer::infer;
use super::network::{Discriminator, DiscriminatorSpec, Generator, GeneratorSpec};
use super::pool::ImagePool;
use super::schedule::{lr_at_epoch, GanMode, TrainConfig};
use crate::error::{Error, Result};
use crate::imgprep::{random_crop_pair, resize_bicubic, PairedSample, RasterImage};
use crate::metrics::psnr;
use crate::nn::{AdamState, BoundLayer, Checkpoint, Graph, LayerParam, Tensor4, Var};

/// Reported PSNR for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const LOG_HEADER: &str = "epoch,lr,loss_g_gan,loss_g_l1,loss_d,val_psnr";

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss_g_gan: f64,
    pub loss_g_l1: f64,
    pub loss_d: f64,
    /// Mean PSNR of the generator on the held-out pairs, if any.
    pub val_psnr: Option<f64>,
}

impl EpochLog {
    pub fn csv_line(&self) -> String {
        let val = self.val_psnr.map(|v| format!("{v}")).unwrap_or_default();
        format!("{},{},{},{},{},{}", self.epoch, self.lr, self.loss_g_gan, self.loss_g_l1, self.loss_d, val)
    }
}

pub fn gan_loss(g: &mut Graph, logits: Var, real: bool, mode: GanMode) -> Result<Var> {
    match mode {
        GanMode::Vanilla => g.bce_with_logits(logits, real),
        GanMode::Lsgan => g.mse_to(logits, if real { 1.0 } else { 0.0 }),
    }
}

/// Generator loss terms: `(total, gan, l1)` with `total = gan + lambda * l1`.
pub fn generator_objective(g: &mut Graph, g_out: Var, target: Var, d_logits_fake: Var, lambda_l1: f64, mode: GanMode) -> Result<(Var, Var, Var)> {
    let adv = gan_loss(g, d_logits_fake, true, mode)?;
    let l1 = g.l1_loss(g_out, target)?;
    let weighted = g.scale(l1, lambda_l1);
    Ok((g.add(adv, weighted)?, adv, l1))
}

fn apply_adam(adam: &mut AdamState, layers: &mut [LayerParam], bound: &[BoundLayer], g: &Graph) -> Result<()> {
    let grads: Vec<(Vec<f64>, Vec<f64>)> = layers
        .iter()
        .zip(bound)
        .map(|(l, b)| {
            let gw = g.grad(b.raw_weight).map_or_else(|| vec![0.0; l.weight.len()], <[f64]>::to_vec);
            let gb = g.grad(b.bias).map_or_else(|| vec![0.0; l.bias.len()], <[f64]>::to_vec);
            (gw, gb)
        })
        .collect();
    let names: Vec<(String, String)> = layers.iter().map(|l| (format!("{}.weight", l.name), format!("{}.bias", l.name))).collect();
    let mut slots: Vec<(&str, &mut [f64], &[f64])> = Vec::with_capacity(2 * layers.len());
    for ((l, (gw, gb)), (nw, nb)) in layers.iter_mut().zip(&grads).zip(&names) {
        slots.push((nw.as_str(), l.weight.data_mut(), gw.as_slice()));
        slots.push((nb.as_str(), l.bias.as_mut_slice(), gb.as_slice()));
    }
    adam.step(&mut slots)?;
    layers.iter_mut().for_each(LayerParam::round_to_f32);
    Ok(())
}

fn concat_channels(a: &Tensor4, b: &Tensor4) -> Result<Tensor4> {
    let mut g = Graph::new();
    let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
    let c = g.concat(va, vb)?;
    Ok(g.value(c).clone())
}

/// Mean losses of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub g_gan: f64,
    pub g_l1: f64,
    pub d: f64,
}

/// One discriminator update on real `(x, y)` pairs and `fake_pairs`.
pub fn discriminator_step(disc: &mut Discriminator, adam: &mut AdamState, real_pairs: &Tensor4, fake_pairs: &Tensor4, mode: GanMode) -> Result<f64> {
    disc.advance_spectral();
    let mut g = Graph::new();
    let real = g.constant(real_pairs.clone());
    let fake = g.constant(fake_pairs.clone());
    let (real_logits, bound) = disc.forward(&mut g, real, true)?;
    let l_real = gan_loss(&mut g, real_logits, true, mode)?;
    let (fake_logits, bound_fake) = forward_with(disc, &mut g, fake, &bound)?;
    debug_assert_eq!(bound.len(), bound_fake.len());
    let l_fake = gan_loss(&mut g, fake_logits, false, mode)?;
    let sum = g.add(l_real, l_fake)?;
    let loss = g.scale(sum, 0.5);
    g.backward(loss)?;
    let value = g.value(loss).item_value();
    apply_adam(adam, &mut disc.layers, &bound, &g)?;
    Ok(value)
}

/// Discriminator pass that reuses already bound parameters, so gradients from
/// both passes accumulate on the same leaves.
fn forward_with(disc: &Discriminator, g: &mut Graph, pair: Var, bound: &[BoundLayer]) -> Result<(Var, Vec<BoundLayer>)> {
    let strides: Vec<usize> = disc.spec.layer_shapes().iter().map(|s| s.2).collect();
    let mut h = pair;
    for (i, b) in bound.iter().enumerate() {
        h = g.conv2d(h, b.weight, Some(b.bias), strides[i], 1)?;
        if i + 1 < bound.len() {
            h = g.activation(h, crate::nn::Activation::LEAKY);
        }
    }
    Ok((h, bound.to_vec()))
}

/// One generator update against a frozen discriminator. Returns `(total, gan, l1)`.
pub fn generator_step(gen: &mut Generator, disc: &Discriminator, adam: &mut AdamState, x: &Tensor4, y: &Tensor4, cfg: &TrainConfig) -> Result<(f64, f64, f64)> {
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let (fake, bound) = gen.forward(&mut g, xv, true)?;
    let pair = g.concat(xv, fake)?;
    let (logits, _) = disc.forward(&mut g, pair, false)?;
    let (total, adv, l1) = generator_objective(&mut g, fake, yv, logits, cfg.lambda_l1, cfg.gan_mode)?;
    g.backward(total)?;
    let out = (g.value(total).item_value(), g.value(adv).item_value(), g.value(l1).item_value());
    if gen.spec.spectral_norm {
        gen.layers.iter_mut().for_each(LayerParam::advance_spectral);
    }
    apply_adam(adam, &mut gen.layers, &bound, &g)?;
    Ok(out)
}

/// Generator objective of `gen` on `(x, y)` without updating anything.
pub fn generator_objective_value(gen: &Generator, disc: &Discriminator, x: &Tensor4, y: &Tensor4, cfg: &TrainConfig) -> Result<f64> {
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let (fake, _) = gen.forward(&mut g, xv, false)?;
    let pair = g.concat(xv, fake)?;
    let (logits, _) = disc.forward(&mut g, pair, false)?;
    let (total, _, _) = generator_objective(&mut g, fake, yv, logits, cfg.lambda_l1, cfg.gan_mode)?;
    Ok(g.value(total).item_value())
}

pub fn checkpoint_of(gen: &Generator, disc: &Discriminator) -> Checkpoint {
    let mut c = Checkpoint::default();
    c.push_layers("G", &gen.layers);
    c.push_layers("D", &disc.layers);
    c
}

/// Mean PSNR of generator outputs against targets, capped for identical images.
pub fn mean_psnr(gen: &Generator, pairs: &[PairedSample]) -> Result<f64> {
    let mut total = 0.0;
    for p in pairs {
        let out = infer(gen, &p.input)?;
        total += match psnr(&out, &p.target) {
            Ok(v) => v.min(PSNR_CAP_DB),
            Err(Error::IdenticalImages) => PSNR_CAP_DB,
            Err(e) => return Err(e),
        };
    }
    Ok(total / pairs.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub log: Vec<EpochLog>,
}

/// Where training writes its artifacts: `latest.spkl`, `loss_log.csv` and,
/// after a numerical fault, `last_good.spkl`.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub dir: PathBuf,
}

impl TrainOutput {
    pub fn latest(&self) -> PathBuf {
        self.dir.join("latest.spkl")
    }

    pub fn last_good(&self) -> PathBuf {
        self.dir.join("last_good.spkl")
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.join("loss_log.csv")
    }
}

fn write_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from(LOG_HEADER);
    text.push('\n');
    for l in log {
        text.push_str(&l.csv_line());
        text.push('\n');
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn fit(img: &RasterImage, size: usize) -> Result<RasterImage> {
    if img.dims() == (size, size) {
        Ok(img.clone())
    } else {
        resize_bicubic(img, size, size)
    }
}

/// Trains a generator/discriminator pair on `train_set`, validating on `val_set` after each epoch.
pub fn train(train_set: &[PairedSample], val_set: &[PairedSample], gspec: GeneratorSpec, dspec: DiscriminatorSpec, cfg: &TrainConfig, output: Option<&TrainOutput>) -> Result<TrainOutcome> {
    cfg.validate()?;
    gspec.check_dims(cfg.fine_size, cfg.fine_size)?;
    if train_set.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if let Some(o) = output {
        fs::create_dir_all(&o.dir).map_err(|e| Error::io(&o.dir, e))?;
    }
    let mut gen = Generator::new(gspec, cfg.seed)?;
    let mut disc = Discriminator::new(dspec, cfg.seed.wrapping_add(1))?;
    gen.layers.iter_mut().chain(disc.layers.iter_mut()).for_each(LayerParam::round_to_f32);

    let loaded: Vec<PairedSample> = train_set
        .iter()
        .map(|p| PairedSample::new(fit(&p.input, cfg.load_size)?, fit(&p.target, cfg.load_size)?, p.group_id.clone(), p.path.clone()))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut pool = ImagePool::new(cfg.pool_size, cfg.seed.wrapping_add(3));
    let mut adam_g = AdamState::new(cfg.lr0);
    let mut adam_d = AdamState::new(cfg.lr0);
    let mut log = Vec::with_capacity(cfg.epochs());
    let mut order: Vec<usize> = (0..loaded.len()).collect();

    for epoch in 1..=cfg.epochs() {
        let lr = lr_at_epoch(epoch, cfg)?;
        adam_g.lr = lr;
        adam_d.lr = lr;
        order.shuffle(&mut rng);
        let (mut sum_gan, mut sum_l1, mut sum_d, mut steps) = (0.0, 0.0, 0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let crops: Vec<PairedSample> = batch.iter().map(|&i| random_crop_pair(&loaded[i], cfg.fine_size, &mut rng)).collect::<Result<_>>()?;
            let x = Tensor4::from_images(&crops.iter().map(|c| &c.input).collect::<Vec<_>>())?;
            let y = Tensor4::from_images(&crops.iter().map(|c| &c.target).collect::<Vec<_>>())?;
            let snapshot = (gen.clone(), disc.clone());
            let step = (|| -> Result<StepLosses> {
                let fake = {
                    let mut g = Graph::new();
                    let xv = g.constant(x.clone());
                    let (f, _) = gen.forward(&mut g, xv, false)?;
                    g.value(f).clone()
                };
                let fake_pairs = concat_channels(&x, &fake)?;
                let pooled: Vec<Tensor4> = (0..fake_pairs.n()).map(|i| pool.query(fake_pairs.slice_item(i))).collect();
                let d = discriminator_step(&mut disc, &mut adam_d, &concat_channels(&x, &y)?, &Tensor4::stack(&pooled)?, cfg.gan_mode)?;
                let (_, g_gan, g_l1) = generator_step(&mut gen, &disc, &mut adam_g, &x, &y, cfg)?;
                Ok(StepLosses { g_gan, g_l1, d })
            })();
            match step {
                Ok(s) => {
                    sum_gan += s.g_gan;
                    sum_l1 += s.g_l1;
                    sum_d += s.d;
                    steps += 1;
                }
                Err(e) => {
                    if let Some(o) = output {
                        checkpoint_of(&snapshot.0, &snapshot.1).save(o.last_good())?;
                        write_log(&o.log_path(), &log)?;
                    }
                    log::error!("training aborted in epoch {epoch}: {e}");
                    return Err(e);
                }
            }
        }
        let val_psnr = if val_set.is_empty() { None } else { Some(mean_psnr(&gen, val_set)?) };
        let entry = EpochLog { epoch, lr, loss_g_gan: sum_gan / steps as f64, loss_g_l1: sum_l1 / steps as f64, loss_d: sum_d / steps as f64, val_psnr };
        log::info!("{}", entry.csv_line());
        log.push(entry);
        if let Some(o) = output {
            write_log(&o.log_path(), &log)?;
            if cfg.save_every > 0 && epoch % cfg.save_every == 0 {
                checkpoint_of(&gen, &disc).save(o.dir.join(format!("epoch_{epoch:04}.spkl")))?;
            }
        }
    }
    if let Some(o) = output {
        checkpoint_of(&gen, &disc).save(o.latest())?;
        write_log(&o.log_path(), &log)?;
    }
    Ok(TrainOutcome { generator: gen, discriminator: disc, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes::test_scene;
    use crate::speckle::{apply_speckle, synthesize_field, SpeckleParams};

    fn tiny_specs() -> (GeneratorSpec, DiscriminatorSpec) {
        (GeneratorSpec { depth: 2, base_channels: 4, ..Default::default() }, DiscriminatorSpec { n_layers: 1, base_channels: 4, spectral_norm: true })
    }

    fn pairs(n: usize, size: usize) -> Vec<PairedSample> {
        (0..n)
            .map(|i| {
                let clean = test_scene(size, size, i as u64);
                let field = synthesize_field(size, size, &SpeckleParams::new(2.0, 0.6, 100 + i as u64)).unwrap();
                PairedSample::new(apply_speckle(&clean, &field).unwrap(), clean, format!("g{i}"), format!("p{i}.png")).unwrap()
            })
            .collect()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig { niter: 1, niter_decay: 1, load_size: 16, fine_size: 16, pool_size: 2, seed: 3, ..Default::default() }
    }

    #[test]
    fn objective_terms() {
        let mut g = Graph::new();
        let a = g.constant(Tensor4::filled([1, 3, 2, 2], 0.3));
        let big = g.constant(Tensor4::filled([1, 1, 2, 2], 50.0));
        let (total, _, _) = generator_objective(&mut g, a, a, big, 70.0, GanMode::Vanilla).unwrap();
        assert!(g.value(total).item_value() < 1e-20);
        let b = g.constant(Tensor4::filled([1, 3, 2, 2], 0.5));
        let z = g.constant(Tensor4::zeros([1, 1, 2, 2]));
        let (total, adv, _) = generator_objective(&mut g, a, b, z, 0.0, GanMode::Vanilla).unwrap();
        assert_eq!(g.value(total).item_value(), g.value(adv).item_value());
    }

    #[test]
    fn zero_epochs_returns_initial_networks() {
        let (gs, ds) = tiny_specs();
        let cfg = TrainConfig { niter: 0, niter_decay: 0, ..tiny_cfg() };
        let out = train(&pairs(2, 16), &[], gs, ds, &cfg, None).unwrap();
        assert!(out.log.is_empty());
        let mut init = Generator::new(gs, cfg.seed).unwrap();
        init.layers.iter_mut().for_each(LayerParam::round_to_f32);
        assert_eq!(out.generator, init);
    }

    #[test]
    fn generator_descends_against_frozen_discriminator() {
        let (gs, ds) = tiny_specs();
        let mut gen = Generator::new(gs, 1).unwrap();
        let disc = Discriminator::new(ds, 2).unwrap();
        let p = &pairs(1, 16)[0];
        let x = Tensor4::from_images(&[&p.input]).unwrap();
        let y = Tensor4::from_images(&[&p.target]).unwrap();
        let cfg = TrainConfig::default();
        let mut adam = AdamState::new(1e-3);
        let mut prev = generator_objective_value(&gen, &disc, &x, &y, &cfg).unwrap();
        for step in 0..5 {
            generator_step(&mut gen, &disc, &mut adam, &x, &y, &cfg).unwrap();
            let now = generator_objective_value(&gen, &disc, &x, &y, &cfg).unwrap();
            let slack = if step == 4 { 1e-6 } else { 0.0 };
            assert!(now < prev + slack, "step {step}: {prev} -> {now}");
            prev = now;
        }
    }

    #[test]
    fn short_run_writes_artifacts_and_is_reproducible() {
        let (gs, ds) = tiny_specs();
        let dir = tempfile::tempdir().unwrap();
        let out = TrainOutput { dir: dir.path().join("run") };
        let data = pairs(3, 20);
        let a = train(&data[..2], &data[2..], gs, ds, &tiny_cfg(), Some(&out)).unwrap();
        let b = train(&data[..2], &data[2..], gs, ds, &tiny_cfg(), None).unwrap();
        assert_eq!(a.generator, b.generator);
        assert_eq!(a.log, b.log);
        assert_eq!(a.log.len(), 2);
        assert!(a.log.iter().all(|l| l.loss_d.is_finite() && l.val_psnr.is_some()));
        let text = fs::read_to_string(out.log_path()).unwrap();
        assert!(text.starts_with(LOG_HEADER));
        assert_eq!(text.lines().count(), 3);
        let ck = Checkpoint::load(out.latest()).unwrap();
        assert_eq!(Generator::from_checkpoint(&ck).unwrap(), a.generator);
    }

    #[test]
    fn rejects_empty_or_misfit_inputs() {
        let (gs, ds) = tiny_specs();
        assert!(train(&[], &[], gs, ds, &tiny_cfg(), None).is_err());
        let cfg = TrainConfig { fine_size: 18, load_size: 18, ..tiny_cfg() };
        assert!(train(&pairs(1, 18), &[], gs, ds, &cfg, None).is_err());
    }
}
