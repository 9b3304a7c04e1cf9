//! Error bound for the propagation solution and the comparable bound for
//! GTVM inpainting.
//!
//! With `D_cc`, `A_cc`, `A_co` the missing-node blocks of the degree and
//! adjacency matrices:
//!
//! ```text
//! U = I + D_cc^-1 A_cc     V = I - D_cc^-1 A_cc     Y = D_cc^-1 A_co
//! psi = ||-Y F0_o + V F0_c||_F          (= ||P F0||_F)
//! phi = ||U||_2
//! ||W_c||_F <= psi / (2 - phi)          when phi < 2
//! ```
//!
//! `P` and `Q` are the `n x n` operators whose only non-zero rows are the
//! missing rows `[-Y V]` and `[Y U]`; they are never formed here.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{partition_blocks, ObservationSet, SparseGraph};
use crate::linalg::{spectral_norm, PowerIteration};
use crate::sparse::CsrMatrix;
use crate::tensor::FiberMatrix;

/// Below this distance from 2, `phi` is treated as 2.
pub const PHI_GUARD: f64 = 1e-9;
/// An applicable bound with `2 - phi` below this is flagged as loose.
pub const LOOSE_MARGIN: f64 = 1e-3;

/// The missing-node blocks `U`, `V`, `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundMatrices {
    pub omega: Vec<usize>,
    pub omega_c: Vec<usize>,
    pub u: CsrMatrix,
    pub v: CsrMatrix,
    pub y: CsrMatrix,
    /// Diagonal of `D_cc`.
    pub d_cc: Vec<f64>,
}

pub fn bound_matrices(g: &SparseGraph, omega: &ObservationSet) -> Result<BoundMatrices> {
    let b = partition_blocks(g, omega)?;
    if let Some(pos) = b.d_cc.iter().position(|&d| d == 0.0) {
        return Err(Error::SingularDegree { node: b.omega_c[pos] });
    }
    let m = b.omega_c.len();
    let scaled_cc: Vec<(usize, usize, f64)> = b.a_cc.triplets().map(|(i, j, v)| (i, j, v / b.d_cc[i])).collect();
    let ident = (0..m).map(|i| (i, i, 1.0));
    let u = CsrMatrix::from_triplets(m, m, ident.clone().chain(scaled_cc.iter().copied()).collect());
    let v = CsrMatrix::from_triplets(
        m,
        m,
        ident.chain(scaled_cc.iter().map(|&(i, j, x)| (i, j, -x))).collect(),
    );
    let y = CsrMatrix::from_triplets(
        m,
        b.omega.len(),
        b.a_co.triplets().map(|(i, j, x)| (i, j, x / b.d_cc[i])).collect(),
    );
    Ok(BoundMatrices {
        omega: b.omega,
        omega_c: b.omega_c,
        u,
        v,
        y,
        d_cc: b.d_cc,
    })
}

fn check_signal(g: &SparseGraph, f: &FiberMatrix) -> Result<()> {
    if f.rows() != g.n() {
        return Err(Error::ShapeMismatch(format!(
            "signal has {} rows, graph has {} nodes",
            f.rows(),
            g.n()
        )));
    }
    Ok(())
}

/// Missing rows of `P F`, i.e. `-Y F_o + V F_c`, row-major.
pub fn p_apply(t: &BoundMatrices, f: &FiberMatrix) -> Vec<f64> {
    let k = f.cols();
    let fo = f.select_rows(&t.omega);
    let fc = f.select_rows(&t.omega_c);
    let vf = t.v.mul_dense(fc.as_slice(), k);
    let yf = t.y.mul_dense(fo.as_slice(), k);
    vf.iter().zip(&yf).map(|(a, b)| a - b).collect()
}

/// Missing rows of `Q F`, i.e. `Y F_o + U F_c`, row-major.
pub fn q_apply(t: &BoundMatrices, f: &FiberMatrix) -> Vec<f64> {
    let k = f.cols();
    let fo = f.select_rows(&t.omega);
    let fc = f.select_rows(&t.omega_c);
    let uf = t.u.mul_dense(fc.as_slice(), k);
    let yf = t.y.mul_dense(fo.as_slice(), k);
    uf.iter().zip(&yf).map(|(a, b)| a + b).collect()
}

fn frob(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// `psi = ||P F0||_F`, the cost of the true signal.
pub fn compute_psi(g: &SparseGraph, omega: &ObservationSet, f0: &FiberMatrix) -> Result<f64> {
    check_signal(g, f0)?;
    let t = bound_matrices(g, omega)?;
    Ok(frob(&p_apply(&t, f0)))
}

/// `phi = ||I + D_cc^-1 A_cc||_2` by power iteration.
pub fn compute_phi(g: &SparseGraph, omega: &ObservationSet) -> Result<f64> {
    let t = bound_matrices(g, omega)?;
    Ok(phi_from_matrices(&t, PowerIteration::default()))
}

pub fn phi_from_matrices(t: &BoundMatrices, opts: PowerIteration) -> f64 {
    let m = t.omega_c.len();
    let ut = t.u.transpose();
    spectral_norm(m, m, |x, y| t.u.mul_vec_into(x, y), |x, y| ut.mul_vec_into(x, y), opts).value
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BoundValue {
    Applicable { value: f64, loose: bool },
    Inapplicable,
}

impl BoundValue {
    pub fn value(&self) -> Option<f64> {
        match *self {
            BoundValue::Applicable { value, .. } => Some(value),
            BoundValue::Inapplicable => None,
        }
    }
}

/// `psi / (2 - phi)` when `phi < 2 - PHI_GUARD`.
pub fn graphprop_bound(psi: f64, phi: f64) -> BoundValue {
    if phi < 2.0 - PHI_GUARD {
        BoundValue::Applicable {
            value: psi.abs() / (2.0 - phi),
            loose: 2.0 - phi < LOOSE_MARGIN,
        }
    } else {
        BoundValue::Inapplicable
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GtvmBound {
    /// `|lambda_max(A)|`.
    pub lambda_max: f64,
    pub eta: f64,
    pub q: f64,
    /// `2 |eta| / (2 - q)`, absent when `q >= 2`.
    pub bound: Option<f64>,
}

/// Largest eigenvalue magnitude of the adjacency matrix.
pub fn adjacency_lambda_max(g: &SparseGraph) -> Result<f64> {
    if g.edge_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let a = g.adjacency();
    let n = g.n();
    // A is symmetric, so ||A||_2 = |lambda|_max
    Ok(spectral_norm(
        n,
        n,
        |x, y| a.mul_vec_into(x, y),
        |x, y| a.mul_vec_into(x, y),
        PowerIteration::default(),
    )
    .value)
}

/// `eta = ||F0 - A' F0||_F` and `q = ||[A'_oc ; I + A'_cc]||_2`
/// with `A' = A / |lambda_max(A)|`.
pub fn gtvm_bound(g: &SparseGraph, omega: &ObservationSet, f0: &FiberMatrix) -> Result<GtvmBound> {
    check_signal(g, f0)?;
    if omega.n() != g.n() {
        return Err(Error::ShapeMismatch("observation set size".into()));
    }
    let lambda_max = adjacency_lambda_max(g)?;
    let a = g.adjacency().scale(1.0 / lambda_max);
    let k = f0.cols();
    let af = a.mul_dense(f0.as_slice(), k);
    let eta = frob(&f0.as_slice().iter().zip(&af).map(|(x, y)| x - y).collect::<Vec<_>>());
    let cols = omega.missing();
    let n = g.n();
    let m = cols.len();
    // (I + A') restricted to the missing columns
    let stacked = {
        let mut trip: Vec<(usize, usize, f64)> = a.submatrix(&(0..n).collect::<Vec<_>>(), &cols).triplets().collect();
        trip.extend(cols.iter().enumerate().map(|(j, &p)| (p, j, 1.0)));
        CsrMatrix::from_triplets(n, m, trip)
    };
    let st = stacked.transpose();
    let q = spectral_norm(
        m,
        n,
        |x, y| stacked.mul_vec_into(x, y),
        |x, y| st.mul_vec_into(x, y),
        PowerIteration::default(),
    )
    .value;
    let bound = (q < 2.0 - PHI_GUARD).then(|| 2.0 * eta.abs() / (2.0 - q));
    Ok(GtvmBound {
        lambda_max,
        eta,
        q,
        bound,
    })
}

/// `||W_c||_F` for `W = F0 - F_hat` over the missing rows.
pub fn missing_error(omega: &ObservationSet, f0: &FiberMatrix, f_hat: &FiberMatrix) -> Result<f64> {
    if f0.rows() != f_hat.rows() || f0.cols() != f_hat.cols() || f0.rows() != omega.n() {
        return Err(Error::ShapeMismatch("truth and estimate differ in shape".into()));
    }
    let mut s = 0.0;
    for p in omega.missing() {
        for (a, b) in f0.row(p).iter().zip(f_hat.row(p)) {
            s += (a - b) * (a - b);
        }
    }
    Ok(libm::sqrt(s))
}

/// Bound quantities plus the measured error of one completion.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub psi: f64,
    pub phi: f64,
    /// `psi / (2 - phi)`; absent when not applicable.
    pub bound: Option<f64>,
    pub applicable: bool,
    pub loose: bool,
    pub measured_error: f64,
    pub gtvm_eta: Option<f64>,
    pub gtvm_q: Option<f64>,
    pub gtvm_bound: Option<f64>,
}

impl BoundReport {
    /// True when the bound is applicable and the measured error exceeds it by more than `slack`.
    pub fn violated(&self, slack: f64) -> bool {
        match self.bound {
            Some(b) if self.applicable => self.measured_error > b + slack,
            _ => false,
        }
    }
}

/// Builds a [`BoundReport`] for estimate `f_hat` of the true signal `f0`.
///
/// GTVM fields are absent for an edgeless graph.
pub fn bound_report(
    g: &SparseGraph,
    omega: &ObservationSet,
    f0: &FiberMatrix,
    f_hat: &FiberMatrix,
) -> Result<BoundReport> {
    check_signal(g, f0)?;
    let t = bound_matrices(g, omega)?;
    let psi = frob(&p_apply(&t, f0));
    let phi = phi_from_matrices(&t, PowerIteration::default());
    let b = graphprop_bound(psi, phi);
    let gtvm = match gtvm_bound(g, omega, f0) {
        Ok(x) => Some(x),
        Err(Error::EmptyGraph) => None,
        Err(e) => return Err(e),
    };
    Ok(BoundReport {
        psi,
        phi,
        bound: b.value(),
        applicable: matches!(b, BoundValue::Applicable { .. }),
        loose: matches!(b, BoundValue::Applicable { loose: true, .. }),
        measured_error: missing_error(omega, f0, f_hat)?,
        gtvm_eta: gtvm.map(|x| x.eta),
        gtvm_q: gtvm.map(|x| x.q),
        gtvm_bound: gtvm.and_then(|x| x.bound),
    })
}

/// Dense `n x n` `P` in original node order, for small-graph checks.
pub fn dense_p(g: &SparseGraph, omega: &ObservationSet) -> Result<Vec<f64>> {
    dense_pq(g, omega, -1.0)
}

/// Dense `n x n` `Q` in original node order, for small-graph checks.
pub fn dense_q(g: &SparseGraph, omega: &ObservationSet) -> Result<Vec<f64>> {
    dense_pq(g, omega, 1.0)
}

fn dense_pq(g: &SparseGraph, omega: &ObservationSet, sign: f64) -> Result<Vec<f64>> {
    let n = g.n();
    let mut out = vec![0.0; n * n];
    for p in omega.missing() {
        let d = g.degrees()[p];
        if d == 0.0 {
            return Err(Error::SingularDegree { node: p });
        }
        out[p * n + p] = 1.0;
        let (cols, vals) = g.adjacency().row(p);
        for (&j, &a) in cols.iter().zip(vals) {
            out[p * n + j] += sign * a / d;
        }
    }
    Ok(out)
}
