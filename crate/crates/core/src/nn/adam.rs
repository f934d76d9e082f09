use crate::error::{Error, Result};

/// Bias-corrected Adam over a fixed list of parameter slices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.5, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// Applies one update to every `(name, param, grad)` triple. Gradients are
    /// checked for finiteness before anything is modified.
    pub fn step(&mut self, params: &mut [(&str, &mut [f64], &[f64])]) -> Result<()> {
        for (name, p, g) in params.iter() {
            if p.len() != g.len() {
                return Err(Error::Shape(format!("{name}: {} values but {} gradients", p.len(), g.len())));
            }
            if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
                return Err(Error::numerical(format!("gradient of {name}"), format!("non-finite value {bad}")));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|(_, p, _)| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, (_, p, _))| m.len() != p.len()) {
            return Err(Error::Shape("parameter layout changed between optimizer steps".into()));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((_, p, g), m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
