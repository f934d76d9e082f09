//! Orthogonal matching pursuit against a unit-norm dictionary, using the
//! precomputed Gram matrix and an incrementally grown Cholesky factor.

/// A sparse code: selected atom indices (in selection order) and their coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OmpCode {
    pub atoms: Vec<usize>,
    pub coeffs: Vec<f64>,
    /// Residual norm before any selection, then after each selection.
    pub residual_norms: Vec<f64>,
}

/// Sparse-codes one signal.
///
/// * `gram`: `K x K` Gram matrix of the dictionary, row-major.
/// * `correlations`: `D^t x`.
/// * `signal_energy`: `|x|^2`.
///
/// Stops once the residual norm is at most `tolerance`, after `max_atoms`
/// selections, or when the next atom is numerically dependent on the chosen set.
pub fn omp(gram: &[f64], k: usize, correlations: &[f64], signal_energy: f64, tolerance: f64, max_atoms: usize) -> OmpCode {
    let mut code = OmpCode { residual_norms: vec![signal_energy.max(0.0).sqrt()], ..Default::default() };
    let tol2 = tolerance * tolerance;
    let mut alpha = correlations.to_vec();
    // lower-triangular Cholesky factor of G[I, I], row-major in a growing square
    let mut chol: Vec<f64> = Vec::new();
    let mut energy = signal_energy;
    let mut selected = vec![false; k];

    while energy > tol2 && code.atoms.len() < max_atoms {
        let (best, best_abs) = alpha
            .iter()
            .enumerate()
            .filter(|(i, _)| !selected[*i])
            .map(|(i, a)| (i, a.abs()))
            .fold((usize::MAX, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best == usize::MAX || best_abs <= 1e-14 {
            break;
        }
        let s = code.atoms.len();
        // solve L w = G[I, best]
        let mut wv = vec![0.0; s];
        for i in 0..s {
            let mut v = gram[code.atoms[i] * k + best];
            for j in 0..i {
                v -= lower(&chol, i, j) * wv[j];
            }
            wv[i] = v / lower(&chol, i, i);
        }
        let diag2 = gram[best * k + best] - wv.iter().map(|v| v * v).sum::<f64>();
        if diag2 <= 1e-10 {
            break;
        }
        chol.extend_from_slice(&wv);
        chol.push(diag2.sqrt());
        code.atoms.push(best);
        selected[best] = true;

        // coefficients: (L L^t) g = correlations[I]
        let n = code.atoms.len();
        let rhs: Vec<f64> = code.atoms.iter().map(|&a| correlations[a]).collect();
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut v = rhs[i];
            for j in 0..i {
                v -= lower(&chol, i, j) * z[j];
            }
            z[i] = v / lower(&chol, i, i);
        }
        let mut g = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = z[i];
            for j in i + 1..n {
                v -= lower(&chol, j, i) * g[j];
            }
            g[i] = v / lower(&chol, i, i);
        }
        // alpha = D^t r = correlations - G[:, I] g
        for (row, a) in alpha.iter_mut().enumerate() {
            let mut v = correlations[row];
            for (idx, &atom) in code.atoms.iter().enumerate() {
                v -= gram[row * k + atom] * g[idx];
            }
            *a = v;
        }
        energy = signal_energy - rhs.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        code.residual_norms.push(energy.max(0.0).sqrt());
        code.coeffs = g;
    }
    code
}

/// Entry `(i, j)`, `j <= i`, of a packed lower-triangular factor whose row `i` has `i + 1` entries.
#[inline]
fn lower(chol: &[f64], i: usize, j: usize) -> f64 {
    chol[i * (i + 1) / 2 + j]
}
