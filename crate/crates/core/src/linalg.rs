//! Dense helpers and spectral-norm estimation.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Settings for [`spectral_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            rel_tol: 1e-9,
            seed: 0x005e_ed0f_9a11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value of `M` (`rows x cols`) given `M x` and `M^T y`.
///
/// Power iteration on `M^T M` from a seeded start vector. Stops once the
/// eigen-residual `||G v - mu v||` drops below `rel_tol * mu`.
pub fn spectral_norm(
    cols: usize,
    rows: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    apply_t: impl Fn(&[f64], &mut [f64]),
    opts: PowerIteration,
) -> SpectralEstimate {
    if cols == 0 || rows == 0 {
        return SpectralEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..cols).map(|_| rng.random_range(0.5..1.5)).collect();
    normalize(&mut v);
    let mut mv = vec![0.0; rows];
    let mut g = vec![0.0; cols];
    let mut mu = 0.0;
    for it in 1..=opts.max_iters {
        apply(&v, &mut mv);
        apply_t(&mv, &mut g);
        mu = v.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        if mu <= 0.0 {
            return SpectralEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        let res = libm::sqrt(g.iter().zip(&v).map(|(gi, vi)| (gi - mu * vi) * (gi - mu * vi)).sum());
        if res <= opts.rel_tol * mu {
            return SpectralEstimate {
                value: libm::sqrt(mu),
                iterations: it,
                converged: true,
            };
        }
        v.copy_from_slice(&g);
        normalize(&mut v);
    }
    SpectralEstimate {
        value: libm::sqrt(mu.max(0.0)),
        iterations: opts.max_iters,
        converged: false,
    }
}

fn normalize(v: &mut [f64]) {
    let n = libm::sqrt(v.iter().map(|x| x * x).sum());
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Singular-value soft thresholding of a row-major `rows x cols` matrix.
///
/// Works through the eigendecomposition of the smaller Gram matrix, so
/// singular values below about `sqrt(eps) * sigma_max` are not resolved;
/// they only matter when `tau` is that small. Returns the thresholded matrix
/// and the sum of the shrunk singular values.
pub fn singular_value_shrink(data: &[f64], rows: usize, cols: usize, tau: f64) -> (Vec<f64>, f64) {
    // column-major view of the row-major buffer is the transpose
    let mt = DMatrix::from_column_slice(cols, rows, data);
    let m = mt.transpose();
    let wide = rows <= cols;
    let gram = if wide { &m * &mt } else { &mt * &m };
    let eig = SymmetricEigen::new(gram);
    let q = &eig.eigenvectors;
    let mut weights = Vec::with_capacity(eig.eigenvalues.len());
    let mut nuclear = 0.0;
    for &lam in eig.eigenvalues.iter() {
        let sigma = libm::sqrt(lam.max(0.0));
        if sigma > tau {
            weights.push(1.0 - tau / sigma);
            nuclear += sigma - tau;
        } else {
            weights.push(0.0);
        }
    }
    let mut qw = q.clone();
    for (j, w) in weights.iter().enumerate() {
        qw.column_mut(j).scale_mut(*w);
    }
    let proj = &qw * q.transpose();
    let out = if wide { proj * &m } else { &m * proj };
    let mut flat = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            flat[i * cols + j] = out[(i, j)];
        }
    }
    (flat, nuclear)
}

/// Singular values of a row-major matrix, descending.
pub fn singular_values(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let m = DMatrix::from_column_slice(cols, rows, data).transpose();
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_cutoff * sigma_max`.
pub fn numerical_rank(data: &[f64], rows: usize, cols: usize, rel_cutoff: f64) -> usize {
    let s = singular_values(data, rows, cols);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rel_cutoff * top).count(),
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = [3.0, -5.0, 1.0];
        let f = |x: &[f64], y: &mut [f64]| {
            for i in 0..3 {
                y[i] = d[i] * x[i];
            }
        };
        let est = spectral_norm(3, 3, f, f, PowerIteration::default());
        assert!(est.converged);
        assert!((est.value - 5.0).abs() < 1e-8);
    }

    #[test]
    fn shrink_matches_svd_reconstruction() {
        // rank-2 4x3 matrix
        let m = [1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 1.0, 3.0, 1.0, 2.0, 4.0, 0.0];
        let s = singular_values(&m, 4, 3);
        let (out, nuc) = singular_value_shrink(&m, 4, 3, 0.0);
        for (a, b) in out.iter().zip(&m) {
            assert!((a - b).abs() < 1e-12);
        }
        // the zero singular value comes back near sqrt(eps) * sigma_max through the Gram route
        assert!((nuc - s.iter().sum::<f64>()).abs() < 1e-6);
        let (_, nuc_t) = singular_value_shrink(&m, 4, 3, s[1]);
        assert!((nuc_t - (s[0] - s[1])).abs() < 1e-10);
        assert_eq!(numerical_rank(&m, 4, 3, 1e-10), 2);
    }
}
