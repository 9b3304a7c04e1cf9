//! Solvers for the symmetric positive definite systems that arise from
//! grounded Laplacians: Jacobi-preconditioned conjugate gradient, and a
//! skyline Cholesky factorisation under reverse Cuthill-McKee ordering.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Something that can compute `y = A x` for a square `A`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||b - A x||_2` recomputed from the returned `x`.
    pub residual_norm: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Preconditioned CG from a zero start. Stops when `||r|| <= rel_tol * ||b||`.
///
/// `diag` is the Jacobi preconditioner; non-positive entries are treated as 1.
pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    a: &A,
    diag: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> CgOutcome {
    let n = a.dim();
    debug_assert_eq!(b.len(), n);
    let inv: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return CgOutcome {
            x,
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
        };
    }
    let target = rel_tol * b_norm;
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        if norm(&r) <= target {
            converged = true;
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // recurrence drift: report the true residual
    a.apply(&x, &mut ap);
    let residual_norm = libm::sqrt(b.iter().zip(&ap).map(|(b, ax)| (b - ax) * (b - ax)).sum());
    CgOutcome {
        x,
        iterations,
        residual_norm,
        converged: converged || residual_norm <= target,
    }
}

/// Reverse Cuthill-McKee ordering of a structurally symmetric matrix.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| (degree[i], i));
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();
    for s in starts {
        if visited[s] {
            continue;
        }
        visited[s] = true;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            nbrs.clear();
            nbrs.extend(a.row(u).0.iter().copied().filter(|&v| !visited[v]));
            nbrs.sort_by_key(|&v| (degree[v], v));
            for &v in &nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope Cholesky factor `P A P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    /// Fails with [`Error::InvalidParameter`] when `a` is not positive definite.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::ShapeMismatch("Cholesky needs a square matrix".into()));
        }
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new_i, &old_i) in perm.iter().enumerate() {
            for &old_j in a.row(old_i).0 {
                let new_j = inv[old_j];
                if new_j < first[new_i] {
                    first[new_i] = new_j;
                }
            }
        }
        let mut offsets = vec![0; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + (i - first[i] + 1);
        }
        let mut values = vec![0.0; offsets[n]];
        for (new_i, &old_i) in perm.iter().enumerate() {
            let (cols, vals) = a.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let new_j = inv[old_j];
                if new_j <= new_i {
                    values[offsets[new_i] + new_j - first[new_i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = values[offsets[i] + j - fi];
                let ri = offsets[i] + start - fi;
                let rj = offsets[j] + start - fj;
                for t in 0..(j - start) {
                    s -= values[ri + t] * values[rj + t];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::InvalidParameter("matrix is not positive definite".into()));
                    }
                    values[offsets[i] + i - fi] = libm::sqrt(s);
                } else {
                    values[offsets[i] + j - fi] = s / values[offsets[j] + j - fj];
                }
            }
        }
        Ok(Self {
            perm,
            first,
            offsets,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // forward: L y = P b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            let mut s = y[i];
            for (t, j) in (fi..i).enumerate() {
                s -= row[t] * y[j];
            }
            y[i] = s / row[i - fi];
        }
        // backward: L^T z = y, column-oriented over the rows of L
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (t, j) in (fi..i).enumerate() {
                y[j] -= row[t] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn cg_and_cholesky_agree_on_tridiagonal() {
        let a = tridiag(40);
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let diag: Vec<f64> = (0..40).map(|i| a.get(i, i)).collect();
        let cg = conjugate_gradient(&a, &diag, &b, 1e-13, 400);
        assert!(cg.converged);
        let ch = SkylineCholesky::factor(&a).unwrap().solve(&b);
        for (u, v) in cg.x.iter().zip(&ch) {
            assert!((u - v).abs() < 1e-11);
        }
        let r = a.mul_vec(&ch);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_is_zero_solution() {
        let a = tridiag(5);
        let out = conjugate_gradient(&a, &[1.0; 5], &[0.0; 5], 1e-10, 50);
        assert_eq!(out.iterations, 0);
        assert!(out.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(SkylineCholesky::factor(&a).is_err());
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = tridiag(9);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..9).collect::<Vec<_>>());
    }
}
