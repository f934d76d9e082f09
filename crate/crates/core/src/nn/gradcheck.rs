//! Central finite-difference gradient checking.

use super::graph::{Graph, Var};
use super::tensor::Tensor4;
use crate::error::Result;

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// Largest relative deviation between the analytic gradient of the scalar
/// built by `f` and its central difference with step `h`, over every element
/// of every input.
pub fn max_gradient_error<F>(inputs: &[Tensor4], h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |ins: &[Tensor4]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.param(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).item_value())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars.iter().zip(inputs).map(|(v, t)| g.grad(*v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec)).collect();

    let mut worst = 0.0f64;
    let mut work = inputs.to_vec();
    for (i, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + h;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - h;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADIENT_FLOOR);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::Activation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const H: f64 = 1e-4;
    const TOL: f64 = 1e-3;

    /// Uniform values in `[-1, 1]` kept at least `margin` away from zero.
    fn random(shape: [usize; 4], rng: &mut ChaCha8Rng, margin: f64) -> Tensor4 {
        Tensor4::from_fn(shape, |_| {
            let v: f64 = rng.random_range(margin..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
    }

    fn probe(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = g.value(y).len();
        g.weighted_sum(y, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn conv_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (stride, pad, k) in [(1, 0, 3), (2, 1, 4), (1, 1, 3)] {
            let x = random([2, 3, 6, 5], &mut rng, 0.0);
            let w = random([4, 3, k, k], &mut rng, 0.0);
            let b = random([1, 4, 1, 1], &mut rng, 0.0);
            let err = max_gradient_error(&[x, w, b], H, |g, v| {
                let y = g.conv2d(v[0], v[1], Some(v[2]), stride, pad)?;
                probe(g, y, 3)
            })
            .unwrap();
            assert!(err < TOL, "stride {stride} pad {pad}: {err}");
        }
    }

    #[test]
    fn pointwise_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for kind in [Activation::LEAKY, Activation::Relu, Activation::Tanh, Activation::Sigmoid] {
            let x = random([1, 2, 3, 4], &mut rng, 0.01);
            let err = max_gradient_error(&[x], H, |g, v| {
                let y = g.activation(v[0], kind);
                probe(g, y, 5)
            })
            .unwrap();
            assert!(err < TOL, "{kind:?}: {err}");
        }
    }

    #[test]
    fn upsample_concat_and_losses() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random([2, 2, 3, 3], &mut rng, 0.0);
        let err = max_gradient_error(std::slice::from_ref(&a), H, |g, v| {
            let y = g.upsample_nearest(v[0], 2)?;
            probe(g, y, 1)
        })
        .unwrap();
        assert!(err < TOL);

        let b = random([2, 1, 3, 3], &mut rng, 0.0);
        let err = max_gradient_error(&[a.clone(), b], H, |g, v| {
            let y = g.concat(v[0], v[1])?;
            probe(g, y, 2)
        })
        .unwrap();
        assert!(err < TOL);

        // keep pred - target away from the non-differentiable tie
        let t = Tensor4::from_fn(a.shape(), |i| a.data()[i] + if i % 2 == 0 { 0.3 } else { -0.4 });
        let err = max_gradient_error(&[a.clone(), t], H, |g, v| g.l1_loss(v[0], v[1])).unwrap();
        assert!(err < TOL);

        let logits = Tensor4::new([1, 1, 1, 3], vec![-2.0, 0.5, 3.0]).unwrap();
        for real in [true, false] {
            let err = max_gradient_error(std::slice::from_ref(&logits), H, |g, v| g.bce_with_logits(v[0], real)).unwrap();
            assert!(err < TOL);
        }
        let err = max_gradient_error(std::slice::from_ref(&a), H, |g, v| g.mse_to(v[0], 1.0)).unwrap();
        assert!(err < TOL);
        let err = max_gradient_error(&[a.clone(), a], H, |g, v| {
            let s = g.add(v[0], v[1])?;
            let s = g.scale(s, -1.5);
            probe(g, s, 4)
        })
        .unwrap();
        assert!(err < TOL);
    }

    #[test]
    fn spectral_scale_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random([3, 2, 2, 2], &mut rng, 0.0);
        let mut u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = |x: &mut Vec<f64>| {
            let s = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            x.iter_mut().for_each(|a| *a /= s);
        };
        n(&mut u);
        n(&mut v);
        let err = max_gradient_error(&[w], H, |g, vars| {
            let y = g.spectral_scale(vars[0], u.clone(), v.clone())?;
            probe(g, y, 6)
        })
        .unwrap();
        assert!(err < TOL, "{err}");
    }
}
