//! Graph total-variation minimisation inpainting:
//! minimise `||F - A' F||_F^2` subject to `F_o = T_o`, `A' = A / |lambda_max(A)|`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::bounds::adjacency_lambda_max;
use crate::error::{Error, Result};
use crate::graph::{ObservationSet, SparseGraph};
use crate::solver::{conjugate_gradient, LinearOperator};
use crate::sparse::CsrMatrix;
use crate::tensor::FiberMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtvmOptions {
    pub rel_tol: f64,
    /// CG iteration cap as a multiple of the number of unknowns.
    pub max_iters_factor: usize,
    /// Systems with at most this many nodes use the dense least-squares path.
    pub dense_max_nodes: usize,
}

impl Default for GtvmOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iters_factor: 10,
            dense_max_nodes: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtvmOutcome {
    pub completed: FiberMatrix,
    /// The normal equations were singular; the least-norm solution is returned.
    pub singular: bool,
    pub converged: bool,
    pub iterations: usize,
    pub lambda_max: f64,
}

/// `(B^T B)_cc` applied matrix-free, `B = I - A'`.
struct NormalOperator<'a> {
    a: &'a CsrMatrix,
    cols: &'a [usize],
}

impl NormalOperator<'_> {
    fn b_apply(&self, z: &[f64]) -> Vec<f64> {
        let az = self.a.mul_vec(z);
        z.iter().zip(&az).map(|(x, y)| x - y).collect()
    }
}

impl LinearOperator for NormalOperator<'_> {
    fn dim(&self) -> usize {
        self.cols.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut z = vec![0.0; self.a.nrows()];
        for (&p, &v) in self.cols.iter().zip(x) {
            z[p] = v;
        }
        // B is symmetric, so B_{:,c}^T w = (B w)_c
        let bz = self.b_apply(&z);
        let bbz = self.b_apply(&bz);
        for (yi, &p) in y.iter_mut().zip(self.cols) {
            *yi = bbz[p];
        }
    }
}

/// Value of `||F - A' F||_F^2` for a full signal.
pub fn gtvm_objective(g: &SparseGraph, f: &FiberMatrix) -> Result<f64> {
    let lambda = adjacency_lambda_max(g)?;
    let af = g.adjacency().scale(1.0 / lambda).mul_dense(f.as_slice(), f.cols());
    Ok(f.as_slice().iter().zip(&af).map(|(x, y)| (x - y) * (x - y)).sum())
}

pub fn gtvm_inpaint(
    g: &SparseGraph,
    omega: &ObservationSet,
    t_omega: &FiberMatrix,
    opts: &GtvmOptions,
) -> Result<GtvmOutcome> {
    if omega.n() != g.n() || t_omega.rows() != omega.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} observed rows for {} observed of {} nodes",
            t_omega.rows(),
            omega.len(),
            g.n()
        )));
    }
    if t_omega.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observed fibers"));
    }
    let lambda_max = adjacency_lambda_max(g)?;
    let a = g.adjacency().scale(1.0 / lambda_max);
    let n = g.n();
    let k = t_omega.cols();
    let missing = omega.missing();
    let m = missing.len();

    let mut completed = FiberMatrix::zeros(n, k);
    for (row, &p) in omega.observed().iter().enumerate() {
        completed.row_mut(p).copy_from_slice(t_omega.row(row));
    }
    if m == 0 {
        return Ok(GtvmOutcome {
            completed,
            singular: false,
            converged: true,
            iterations: 0,
            lambda_max,
        });
    }

    let op = NormalOperator { a: &a, cols: &missing };
    // rhs = -(B^T B)_{c,o} T_o, per channel
    let rhs_channel = |c: usize| -> Vec<f64> {
        let mut z = vec![0.0; n];
        for (row, &p) in omega.observed().iter().enumerate() {
            z[p] = t_omega.get(row, c);
        }
        let bbz = op.b_apply(&op.b_apply(&z));
        missing.iter().map(|&p| -bbz[p]).collect()
    };

    let singular;
    let mut converged = true;
    let mut iterations = 0;
    if n <= opts.dense_max_nodes {
        let mut dense = DMatrix::<f64>::zeros(m, m);
        let mut e = vec![0.0; m];
        let mut col = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            op.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..m {
                dense[(i, j)] = col[i];
            }
        }
        let svd = dense.svd(true, true);
        let smax = svd.singular_values.max();
        let cutoff = 1e-12 * smax.max(f64::MIN_POSITIVE);
        singular = svd.singular_values.iter().any(|&s| s <= cutoff);
        for c in 0..k {
            let b = nalgebra::DVector::from_vec(rhs_channel(c));
            let x = svd
                .solve(&b, cutoff)
                .map_err(|e| Error::InvalidParameter(format!("least squares: {e}")))?;
            for (i, &p) in missing.iter().enumerate() {
                completed.set(p, c, x[i]);
            }
        }
    } else {
        let diag: Vec<f64> = {
            let mut d = vec![1.0; n];
            for (_, j, v) in a.triplets() {
                d[j] += v * v;
            }
            missing.iter().map(|&p| d[p]).collect()
        };
        let cap = opts.max_iters_factor.max(1) * m;
        for c in 0..k {
            let b = rhs_channel(c);
            let out = conjugate_gradient(&op, &diag, &b, opts.rel_tol, cap);
            iterations = iterations.max(out.iterations);
            converged &= out.converged;
            for (i, &p) in missing.iter().enumerate() {
                completed.set(p, c, out.x[i]);
            }
        }
        // from a zero start CG stays in the range, so stagnation signals a singular system
        singular = !converged;
    }
    if completed.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("GTVM solution"));
    }
    Ok(GtvmOutcome {
        completed,
        singular,
        converged,
        iterations,
        lambda_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EdgeSet};

    #[test]
    fn fully_observed_returns_input() {
        let g = build_graph(&EdgeSet::new(3, [(0, 1), (1, 2)]).unwrap());
        let t = FiberMatrix::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let out = gtvm_inpaint(&g, &ObservationSet::full(3), &t, &GtvmOptions::default()).unwrap();
        assert_eq!(out.completed, t);
    }

    #[test]
    fn path_closed_form() {
        // minimise over f: (0 - f/s)^2 + (f - 1/s)^2 + (1 - f/s)^2, s = sqrt 2
        let g = build_graph(&EdgeSet::new(3, [(0, 1), (1, 2)]).unwrap());
        let t = FiberMatrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let omega = ObservationSet::new(3, vec![0, 2]).unwrap();
        let out = gtvm_inpaint(&g, &omega, &t, &GtvmOptions::default()).unwrap();
        let s = libm::sqrt(2.0);
        // d/df = 2 f / s^2 + 2 (f - 1/s) - 2 (1 - f/s) / s = 0
        let f = (1.0 / s + 1.0 / s) / (2.0 / (s * s) + 1.0);
        assert!((out.completed.get(1, 0) - f).abs() < 1e-10);
        assert!(!out.singular);
    }
}
