//! Rayon vs the sequential fallback on the hot kernels. Both paths produce
//! bit-identical output; only wall time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use specklab_core::classical::{cbm3d_denoise, nlm_denoise, Cbm3dConfig, NlmConfig};
use specklab_core::gan::{infer, Generator, GeneratorSpec};
use specklab_core::metrics::{ssim, SsimConfig};
use specklab_core::par;
use specklab_core::scenes::test_scene;
use specklab_core::speckle::{apply_speckle, synthesize_field, SpeckleParams};
use specklab_core::RasterImage;

fn speckled(size: usize) -> (RasterImage, RasterImage) {
    let clean = test_scene(size, size, 1);
    let field = synthesize_field(size, size, &SpeckleParams::new(2.0, 0.6, 2)).unwrap();
    (apply_speckle(&clean, &field).unwrap(), clean)
}

fn both<F: Fn()>(c: &mut Criterion, group: &str, size: usize, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_with_input(BenchmarkId::new("parallel", size), &size, |b, _| b.iter(&f));
    g.bench_with_input(BenchmarkId::new("sequential", size), &size, |b, _| b.iter(|| par::sequential(&f)));
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let (noisy, clean) = speckled(128);
    both(c, "nlm", 128, || {
        black_box(nlm_denoise(&noisy, &NlmConfig::default()).unwrap());
    });
    both(c, "cbm3d", 128, || {
        black_box(cbm3d_denoise(&noisy, &Cbm3dConfig::default()).unwrap());
    });
    both(c, "ssim", 128, || {
        black_box(ssim(&noisy, &clean, &SsimConfig::default()).unwrap());
    });
    let gen = Generator::new(GeneratorSpec { depth: 4, base_channels: 16, ..Default::default() }, 0).unwrap();
    let (small, _) = speckled(64);
    both(c, "generator_forward", 64, || {
        black_box(infer(&gen, &small).unwrap());
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
