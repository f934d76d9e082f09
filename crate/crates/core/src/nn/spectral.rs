//! Power-iteration spectral normalization.

use rand::Rng;
use rand_distr::StandardNormal;

use super::graph::matrix_sigma;
use super::tensor::Tensor4;

/// Guard for the singular-value estimate.
pub const SPECTRAL_EPS: f64 = 1e-12;

/// Persistent left singular-vector estimate of a weight's `(out, rest)` matrix view.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralNormState {
    pub u: Vec<f64>,
    pub n_power_iterations: usize,
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(SPECTRAL_EPS);
    v.iter_mut().for_each(|x| *x /= norm);
}

impl SpectralNormState {
    pub fn new(rows: usize, rng: &mut impl Rng) -> Self {
        let mut u: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        normalize(&mut u);
        Self { u, n_power_iterations: 1 }
    }

    pub fn from_u(u: Vec<f64>) -> Self {
        Self { u, n_power_iterations: 1 }
    }
}

/// `v = normalize(W^T u)`.
pub fn right_vector(w: &[f64], rows: usize, cols: usize, u: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; cols];
    for r in 0..rows {
        for (acc, x) in v.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *acc += u[r] * x;
        }
    }
    normalize(&mut v);
    v
}

fn left_vector(w: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = (0..rows).map(|r| w[r * cols..(r + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum()).collect();
    normalize(&mut u);
    u
}

/// Runs the state's power iterations on `w`, updating `u`. Returns `v` and
/// the estimate `sigma = u^T W v`.
pub fn power_iteration(w: &Tensor4, state: &mut SpectralNormState) -> (Vec<f64>, f64) {
    let rows = w.n();
    let cols = w.len() / rows;
    let mut v = right_vector(w.data(), rows, cols, &state.u);
    for _ in 0..state.n_power_iterations {
        v = right_vector(w.data(), rows, cols, &state.u);
        state.u = left_vector(w.data(), rows, cols, &v);
    }
    let sigma = matrix_sigma(w.data(), rows, cols, &state.u, &v);
    (v, sigma)
}

/// One power-iteration update and the normalized weight `w / sigma`. The raw weight is not modified.
pub fn spectral_normalize(w: &Tensor4, state: &mut SpectralNormState) -> (Tensor4, f64) {
    let (_, sigma) = power_iteration(w, state);
    let denom = sigma.max(SPECTRAL_EPS);
    let eff = Tensor4::new(w.shape(), w.data().iter().map(|x| x / denom).collect()).expect("same shape");
    (eff, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Tensor4 {
        Tensor4::new([rows, cols, 1, 1], data).unwrap()
    }

    fn sigma_max(t: &Tensor4) -> f64 {
        let cols = t.len() / t.n();
        DMatrix::from_row_slice(t.n(), cols, t.data()).singular_values().max()
    }

    #[test]
    fn diagonal_matrix() {
        let w = matrix(2, 2, vec![3.0, 0.0, 0.0, 1.0]);
        let mut s = SpectralNormState::from_u(vec![0.6, 0.8]);
        let mut sigma = 0.0;
        let mut eff = w.clone();
        for _ in 0..40 {
            (eff, sigma) = spectral_normalize(&w, &mut s);
        }
        assert!((sigma - 3.0).abs() < 1e-9);
        assert!((sigma_max(&eff) - 1.0).abs() < 1e-6);
        assert!((s.u.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_matrix_is_left_alone() {
        let (c, s) = (0.6, 0.8);
        let w = matrix(2, 2, vec![c, -s, s, c]);
        let mut st = SpectralNormState::from_u(vec![1.0, 0.0]);
        let (eff, sigma) = spectral_normalize(&w, &mut st);
        assert!((sigma - 1.0).abs() < 1e-12);
        for (a, b) in eff.data().iter().zip(w.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn random_matrix_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = matrix(8, 12, (0..96).map(|_| rng.sample(StandardNormal)).collect());
        let mut st = SpectralNormState::new(8, &mut rng);
        st.n_power_iterations = 50;
        let (_, sigma) = power_iteration(&w, &mut st);
        assert!((sigma / sigma_max(&w) - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_weight_is_guarded() {
        let w = matrix(2, 3, vec![0.0; 6]);
        let mut st = SpectralNormState::from_u(vec![1.0, 0.0]);
        let (eff, sigma) = spectral_normalize(&w, &mut st);
        assert_eq!(sigma, 0.0);
        assert!(eff.data().iter().all(|&v| v == 0.0));
    }
}
