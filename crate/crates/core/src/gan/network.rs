//! Encoder-decoder generator with skip connections and a conditional patch discriminator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imgprep::CHANNELS;
use crate::nn::{conv_layer, Activation, BoundLayer, Checkpoint, Graph, LayerParam, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub depth: usize,
    pub base_channels: usize,
    pub skip_connections: bool,
    pub spectral_norm: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self { depth: 4, base_channels: 32, skip_connections: true, spectral_norm: false }
    }
}

impl GeneratorSpec {
    /// Feature channels after encoder stage `i`, capped at 8x the base.
    pub fn channels(&self, i: usize) -> usize {
        self.base_channels << i.min(3)
    }

    pub fn multiple(&self) -> usize {
        1 << self.depth
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.depth > 8 || self.base_channels == 0 {
            return Err(Error::Config(format!("generator depth {} / base channels {} out of range", self.depth, self.base_channels)));
        }
        Ok(())
    }

    pub fn check_dims(&self, h: usize, w: usize) -> Result<()> {
        let m = self.multiple();
        if !h.is_multiple_of(m) || !w.is_multiple_of(m) || h == 0 || w == 0 {
            return Err(Error::Dimensions(format!("generator of depth {} needs sides divisible by {m}, got {w}x{h}", self.depth)));
        }
        Ok(())
    }

    /// `(in, out, kernel)` of every convolution: encoders first, then decoders from the innermost.
    pub fn layer_shapes(&self) -> Vec<(String, usize, usize, usize)> {
        let d = self.depth;
        let mut shapes = Vec::new();
        for i in 0..d {
            let inp = if i == 0 { CHANNELS } else { self.channels(i - 1) };
            shapes.push((format!("enc{i}"), inp, self.channels(i), 4));
        }
        for j in (0..d).rev() {
            let skip = if self.skip_connections && j > 0 { self.channels(j - 1) } else { 0 };
            let out = if j > 0 { self.channels(j - 1) } else { CHANNELS };
            shapes.push((format!("dec{j}"), self.channels(j) + skip, out, 3));
        }
        shapes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscriminatorSpec {
    /// Stride-2 convolutions before the two stride-1 output layers.
    pub n_layers: usize,
    pub base_channels: usize,
    pub spectral_norm: bool,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        Self { n_layers: 3, base_channels: 64, spectral_norm: true }
    }
}

impl DiscriminatorSpec {
    /// `(in, out, stride)` of every 4x4 convolution.
    pub fn layer_shapes(&self) -> Vec<(usize, usize, usize)> {
        let ch = |i: usize| self.base_channels << i.min(3);
        let mut shapes = vec![(2 * CHANNELS, ch(0), 2)];
        for i in 1..self.n_layers {
            shapes.push((ch(i - 1), ch(i), 2));
        }
        let last = ch(self.n_layers.saturating_sub(1));
        shapes.push((last, ch(self.n_layers), 1));
        shapes.push((ch(self.n_layers), 1, 1));
        shapes
    }

    /// Input pixels seen by one output logit.
    pub fn receptive_field(&self) -> usize {
        self.layer_shapes().iter().rev().fold(1, |r, &(_, _, stride)| (r - 1) * stride + 4)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.base_channels == 0 {
            return Err(Error::Config("discriminator needs at least one layer and one channel".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub spec: GeneratorSpec,
    pub layers: Vec<LayerParam>,
}

impl Generator {
    pub fn new(spec: GeneratorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec.layer_shapes().into_iter().map(|(name, i, o, k)| LayerParam::conv(name, o, i, k, spec.spectral_norm, &mut rng)).collect();
        Ok(Self { spec, layers })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerParam::param_count).sum()
    }

    /// Builds the forward pass of a `(N, 3, H, W)` batch in `[-1, 1]`.
    pub fn forward(&self, g: &mut Graph, x: Var, trainable: bool) -> Result<(Var, Vec<BoundLayer>)> {
        let s = g.value(x).shape();
        self.spec.check_dims(s[2], s[3])?;
        let bound: Vec<BoundLayer> = self.layers.iter().map(|l| l.bind(g, trainable)).collect();
        let d = self.spec.depth;
        let mut skips = Vec::with_capacity(d);
        let mut h = x;
        for b in &bound[..d] {
            h = conv_layer(g, h, *b, 2, 1)?;
            h = g.activation(h, Activation::LEAKY);
            skips.push(h);
        }
        for (step, j) in (0..d).rev().enumerate() {
            h = g.upsample_nearest(h, 2)?;
            if self.spec.skip_connections && j > 0 {
                h = g.concat(h, skips[j - 1])?;
            }
            h = conv_layer(g, h, bound[d + step], 1, 1)?;
            h = g.activation(h, if j > 0 { Activation::Relu } else { Activation::Tanh });
        }
        Ok((h, bound))
    }

    /// Rebuilds a generator from the `G.*` records of a checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let depth = (0..).take_while(|i| ckpt.get(&format!("G.enc{i}.weight")).is_some()).count();
        let enc0 = ckpt.get("G.enc0.weight").ok_or_else(|| Error::CheckpointMismatch { missing: vec!["G.enc0.weight".into()], extra: vec![] })?;
        let base_channels = enc0.dims.first().copied().unwrap_or(0);
        let inner_in = ckpt.get(&format!("G.dec{}.weight", depth - 1)).and_then(|r| r.dims.get(1).copied());
        let plain = GeneratorSpec { depth, base_channels, skip_connections: false, spectral_norm: ckpt.get("G.enc0.sn_u").is_some() };
        let skip_connections = depth > 1 && inner_in != Some(plain.channels(depth - 1));
        let mut gen = Generator::new(GeneratorSpec { skip_connections, ..plain }, 0)?;
        ckpt.load_layers("G", &mut gen.layers)?;
        Ok(gen)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub spec: DiscriminatorSpec,
    pub layers: Vec<LayerParam>,
}

impl Discriminator {
    pub fn new(spec: DiscriminatorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layer_shapes()
            .into_iter()
            .enumerate()
            .map(|(i, (inp, out, _))| LayerParam::conv(format!("conv{i}"), out, inp, 4, spec.spectral_norm, &mut rng))
            .collect();
        Ok(Self { spec, layers })
    }

    /// Patch logits for a channel-concatenated `(input, candidate)` batch.
    pub fn forward(&self, g: &mut Graph, pair: Var, trainable: bool) -> Result<(Var, Vec<BoundLayer>)> {
        let s = g.value(pair).shape();
        let rf = self.spec.receptive_field();
        if s[2] < rf || s[3] < rf {
            log::warn!("discriminator input {}x{} is smaller than its {rf}px receptive field", s[3], s[2]);
        }
        let bound: Vec<BoundLayer> = self.layers.iter().map(|l| l.bind(g, trainable)).collect();
        let strides: Vec<usize> = self.spec.layer_shapes().iter().map(|s| s.2).collect();
        let mut h = pair;
        for (i, b) in bound.iter().enumerate() {
            h = conv_layer(g, h, *b, strides[i], 1)?;
            if i + 1 < bound.len() {
                h = g.activation(h, Activation::LEAKY);
            }
        }
        Ok((h, bound))
    }

    pub fn advance_spectral(&mut self) {
        self.layers.iter_mut().for_each(LayerParam::advance_spectral);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor4;

    #[test]
    fn generator_shapes_and_bounds() {
        let gen = Generator::new(GeneratorSpec { base_channels: 8, ..Default::default() }, 3).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor4::from_fn([2, 3, 64, 64], |i| ((i * 31) % 17) as f64 / 8.0 - 1.0));
        let (y, _) = gen.forward(&mut g, x, false).unwrap();
        assert_eq!(g.value(y).shape(), [2, 3, 64, 64]);
        assert!(g.value(y).data().iter().all(|v| (-1.0..=1.0).contains(v)));
        let odd = g.constant(Tensor4::zeros([1, 3, 40, 64]));
        assert!(gen.forward(&mut g, odd, false).is_err());
    }

    #[test]
    fn generator_parameter_count() {
        for (depth, base, skip) in [(4, 32, true), (4, 16, false), (5, 8, true), (1, 4, true)] {
            let spec = GeneratorSpec { depth, base_channels: base, skip_connections: skip, spectral_norm: false };
            let ch = |i: usize| base * 2usize.pow(i.min(3) as u32);
            let mut expected = 0;
            for i in 0..depth {
                let inp = if i == 0 { 3 } else { ch(i - 1) };
                expected += inp * ch(i) * 16 + ch(i);
            }
            for j in 0..depth {
                let inp = ch(j) + if skip && j > 0 { ch(j - 1) } else { 0 };
                let out = if j == 0 { 3 } else { ch(j - 1) };
                expected += inp * out * 9 + out;
            }
            assert_eq!(Generator::new(spec, 0).unwrap().param_count(), expected, "{spec:?}");
        }
    }

    #[test]
    fn receptive_fields() {
        let rf = |n| DiscriminatorSpec { n_layers: n, ..Default::default() }.receptive_field();
        assert_eq!(rf(3), 70);
        assert_eq!(rf(2), 34);
        assert_eq!(rf(1), 16);
    }

    #[test]
    fn discriminator_grid_and_finiteness() {
        let d = Discriminator::new(DiscriminatorSpec { n_layers: 3, base_channels: 8, spectral_norm: true }, 1).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor4::from_fn([1, 6, 64, 64], |i| ((i * 7) % 13) as f64 / 6.0 - 1.0));
        let (y, _) = d.forward(&mut g, x, false).unwrap();
        // 64 -> 32 -> 16 -> 8 (stride 2), then 7, 6 (stride 1, pad 1, kernel 4)
        assert_eq!(g.value(y).shape(), [1, 1, 6, 6]);
        assert!(g.value(y).is_finite());
    }

    #[test]
    fn checkpoint_rebuilds_the_generator() {
        for spec in [GeneratorSpec { base_channels: 4, ..Default::default() }, GeneratorSpec { depth: 3, base_channels: 6, skip_connections: false, spectral_norm: true }] {
            let mut gen = Generator::new(spec, 5).unwrap();
            gen.layers.iter_mut().for_each(LayerParam::round_to_f32);
            let mut c = Checkpoint::default();
            c.push_layers("G", &gen.layers);
            let back = Generator::from_checkpoint(&c).unwrap();
            assert_eq!(back, gen);
        }
    }
}
