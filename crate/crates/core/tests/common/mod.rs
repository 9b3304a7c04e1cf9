#![allow(dead_code)]

use graphprop_core::{FiberMatrix, ObservationSet, SparseGraph};
use nalgebra::DMatrix;

/// Dense `L_cc^{-1} (-L_co F_o)` by LU, rows in increasing missing-id order.
pub fn dense_harmonic(g: &SparseGraph, omega: &ObservationSet, f_omega: &FiberMatrix) -> DMatrix<f64> {
    let n = g.n();
    let l = g.laplacian().to_dense();
    let c = omega.missing();
    let o = omega.observed();
    let lcc = DMatrix::from_fn(c.len(), c.len(), |i, j| l[c[i] * n + c[j]]);
    let lco = DMatrix::from_fn(c.len(), o.len(), |i, j| l[c[i] * n + o[j]]);
    let fo = DMatrix::from_fn(o.len(), f_omega.cols(), |i, j| f_omega.get(i, j));
    lcc.lu()
        .solve(&(-(lco * fo)))
        .expect("grounded Laplacian is nonsingular")
}

pub fn rows_of(f: &FiberMatrix, ids: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(ids.len(), f.cols(), |i, j| f.get(ids[i], j))
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn frob(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Connected component label of every node.
pub fn components(g: &SparseGraph) -> Vec<usize> {
    g.components()
}
