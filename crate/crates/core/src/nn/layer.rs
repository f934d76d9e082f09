use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::graph::{Graph, Var};
use super::spectral::{power_iteration, right_vector, SpectralNormState};
use super::tensor::Tensor4;

/// Convolution weights `(out, in, k, k)`, bias and optional spectral-norm state.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParam {
    pub name: String,
    pub weight: Tensor4,
    pub bias: Vec<f64>,
    pub spectral: Option<SpectralNormState>,
}

/// Graph handles of a layer bound for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct BoundLayer {
    pub raw_weight: Var,
    /// The weight the convolution uses (spectrally normalized when enabled).
    pub weight: Var,
    pub bias: Var,
}

impl LayerParam {
    /// Gaussian(0, 0.02) weights, zero bias.
    pub fn conv(name: impl Into<String>, out: usize, inp: usize, k: usize, spectral: bool, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, 0.02).expect("valid");
        let weight = Tensor4::from_fn([out, inp, k, k], |_| f64::from(normal.sample(rng) as f32));
        let spectral = spectral.then(|| {
            let mut s = SpectralNormState::new(out, rng);
            s.u.iter_mut().for_each(|v| *v = f64::from(*v as f32));
            s
        });
        Self { name: name.into(), weight, bias: vec![0.0; out], spectral }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.n()
    }

    pub fn in_channels(&self) -> usize {
        self.weight.c()
    }

    pub fn kernel(&self) -> usize {
        self.weight.h()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Advances the power iteration of a spectrally normalized layer.
    pub fn advance_spectral(&mut self) {
        if let Some(state) = &mut self.spectral {
            power_iteration(&self.weight, state);
        }
    }

    /// Adds the layer's tensors to `g`. A spectrally normalized layer uses its
    /// stored `u` and `v = normalize(W^T u)` without advancing the iteration.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundLayer {
        let add = |g: &mut Graph, t: Tensor4| if trainable { g.param(t) } else { g.constant(t) };
        let raw_weight = add(g, self.weight.clone());
        let bias = add(g, Tensor4::new([1, self.bias.len(), 1, 1], self.bias.clone()).expect("bias shape"));
        let weight = match &self.spectral {
            None => raw_weight,
            Some(state) => {
                let rows = self.weight.n();
                let v = right_vector(self.weight.data(), rows, self.weight.len() / rows, &state.u);
                g.spectral_scale(raw_weight, state.u.clone(), v).expect("vectors sized from the weight")
            }
        };
        BoundLayer { raw_weight, weight, bias }
    }

    /// Rounds every stored value to the nearest `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        let r = |v: &mut f64| *v = f64::from(*v as f32);
        self.weight.data_mut().iter_mut().for_each(r);
        self.bias.iter_mut().for_each(r);
        if let Some(s) = &mut self.spectral {
            s.u.iter_mut().for_each(r);
        }
    }
}

/// Convolution followed by an optional activation, for a bound layer.
pub fn conv_layer(g: &mut Graph, x: Var, l: BoundLayer, stride: usize, pad: usize) -> crate::Result<Var> {
    g.conv2d(x, l.weight, Some(l.bias), stride, pad)
}
