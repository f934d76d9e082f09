//! Small orthonormal transforms for block-based denoisers.

/// Orthonormal DCT-II basis, row `k` holding frequency `k`.
pub(crate) fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            m[k * n + i] = scale * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    m
}

/// Separable 2D transform `T B T^t` of an `n x n` block (row-major), or its
/// inverse `T^t B T`.
pub(crate) fn transform_2d(t: &[f64], n: usize, block: &[f64], out: &mut [f64], inverse: bool) {
    let mut tmp = vec![0.0; n * n];
    let at = |k: usize, i: usize| if inverse { t[i * n + k] } else { t[k * n + i] };
    // rows
    for r in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += at(k, i) * block[r * n + i];
            }
            tmp[r * n + k] = s;
        }
    }
    // columns
    for c in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += at(k, i) * tmp[i * n + c];
            }
            out[k * n + c] = s;
        }
    }
}

/// In-place orthonormal multi-level Haar transform along a power-of-two
/// length sequence of `stride`-spaced vectors. `data` holds `len` vectors of
/// `stride` values each; coefficient 0 ends up as the scaled mean.
pub(crate) fn haar_forward(data: &mut [f64], len: usize, stride: usize) {
    debug_assert!(len.is_power_of_two());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut tmp = vec![0.0; len * stride];
    let mut n = len;
    while n > 1 {
        let half = n / 2;
        for i in 0..half {
            for j in 0..stride {
                let a = data[2 * i * stride + j];
                let b = data[(2 * i + 1) * stride + j];
                tmp[i * stride + j] = s * (a + b);
                tmp[(half + i) * stride + j] = s * (a - b);
            }
        }
        data[..n * stride].copy_from_slice(&tmp[..n * stride]);
        n = half;
    }
}

pub(crate) fn haar_inverse(data: &mut [f64], len: usize, stride: usize) {
    debug_assert!(len.is_power_of_two());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut tmp = vec![0.0; len * stride];
    let mut n = 2;
    while n <= len {
        let half = n / 2;
        for i in 0..half {
            for j in 0..stride {
                let lo = data[i * stride + j];
                let hi = data[(half + i) * stride + j];
                tmp[2 * i * stride + j] = s * (lo + hi);
                tmp[(2 * i + 1) * stride + j] = s * (lo - hi);
            }
        }
        data[..n * stride].copy_from_slice(&tmp[..n * stride]);
        n *= 2;
    }
}
