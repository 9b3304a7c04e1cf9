//! Graph propagation: masked diffusion with observed fibers held fixed, its
//! steady state, and the multi-acquisition pipeline over one unified graph.
//!
//! The steady state solves `L_cc F_c = -L_co F_o`, which makes every missing
//! fiber the mean of its neighbours' fibers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{build_graph, knn_edges_among, union_edges, ObservationSet, SparseGraph};
use crate::solver::{conjugate_gradient, SkylineCholesky};
use crate::sparse::CsrMatrix;
use crate::tensor::FiberMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SolverKind {
    /// Jacobi-preconditioned conjugate gradient.
    ConjugateGradient,
    /// Skyline Cholesky under RCM ordering; meant for small systems.
    Cholesky,
}

/// What to do with missing nodes whose component has no observed node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum UnreachablePolicy {
    Error,
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveOptions {
    pub solver: SolverKind,
    /// Relative residual target per channel.
    pub rel_tol: f64,
    /// CG iteration cap as a multiple of the system size.
    pub max_iters_factor: usize,
    pub unreachable: UnreachablePolicy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            solver: SolverKind::ConjugateGradient,
            rel_tol: 1e-10,
            max_iters_factor: 10,
            unreachable: UnreachablePolicy::Error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverStats {
    /// Largest iteration count over channels (0 for Cholesky).
    pub iterations: usize,
    /// `||L_cc F_c + L_co F_o||_F` over the solved nodes.
    pub residual_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    /// All `n` rows; observed rows are copies of the inputs.
    pub completed: FiberMatrix,
    pub observed: ObservationSet,
    /// Missing nodes whose values come from the solve, increasing.
    pub filled_ids: Vec<usize>,
    /// Missing nodes given the fill value instead, increasing.
    pub excluded_ids: Vec<usize>,
    pub stats: SolverStats,
}

/// Missing nodes that can take part in the solve, and those that cannot.
fn split_missing(
    g: &SparseGraph,
    omega: &ObservationSet,
    policy: UnreachablePolicy,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let labels = g.components();
    let mut anchored = vec![false; g.n()];
    for &o in omega.observed() {
        anchored[labels[o]] = true;
    }
    let mut solvable = Vec::new();
    let mut excluded = Vec::new();
    let mut unreachable = 0;
    for p in omega.missing() {
        if g.degrees()[p] == 0.0 {
            excluded.push(p);
        } else if !anchored[labels[p]] {
            unreachable += 1;
            excluded.push(p);
        } else {
            solvable.push(p);
        }
    }
    if unreachable > 0 && policy == UnreachablePolicy::Error {
        return Err(Error::UnreachableComponent { nodes: unreachable });
    }
    Ok((solvable, excluded))
}

/// Per-channel mean of the observed fibers; zeros when nothing is observed.
fn fill_value(f_omega: &FiberMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; f_omega.cols()];
    if f_omega.rows() == 0 {
        return mean;
    }
    for p in 0..f_omega.rows() {
        for (m, v) in mean.iter_mut().zip(f_omega.row(p)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= f_omega.rows() as f64);
    mean
}

fn residual_frobenius(l_ss: &CsrMatrix, l_so: &CsrMatrix, x: &[f64], f_o: &[f64], k: usize) -> f64 {
    let a = l_ss.mul_dense(x, k);
    let b = l_so.mul_dense(f_o, k);
    libm::sqrt(a.iter().zip(&b).map(|(u, v)| (u + v) * (u + v)).sum())
}

fn assemble(
    n: usize,
    omega: &ObservationSet,
    f_omega: &FiberMatrix,
    solved: &[usize],
    x: &[f64],
    excluded: &[usize],
) -> FiberMatrix {
    let k = f_omega.cols();
    let mut out = FiberMatrix::zeros(n, k);
    for (a, &p) in omega.observed().iter().enumerate() {
        out.row_mut(p).copy_from_slice(f_omega.row(a));
    }
    for (a, &p) in solved.iter().enumerate() {
        out.row_mut(p).copy_from_slice(&x[a * k..(a + 1) * k]);
    }
    let fill = fill_value(f_omega);
    for &p in excluded {
        out.row_mut(p).copy_from_slice(&fill);
    }
    out
}

fn check_inputs(g: &SparseGraph, omega: &ObservationSet, f_omega: &FiberMatrix) -> Result<()> {
    if omega.n() != g.n() {
        return Err(Error::ShapeMismatch(format!(
            "observation set over {} nodes, graph has {}",
            omega.n(),
            g.n()
        )));
    }
    if f_omega.rows() != omega.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} observed rows for {} observed nodes",
            f_omega.rows(),
            omega.len()
        )));
    }
    if f_omega.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observed fibers"));
    }
    Ok(())
}

/// Steady state of the masked diffusion.
///
/// `f_omega` holds the observed fibers in increasing id order. Zero-degree
/// missing nodes are excluded and given the observed mean; missing nodes in
/// a component without observations follow `opts.unreachable`.
pub fn solve_steady_state(
    g: &SparseGraph,
    omega: &ObservationSet,
    f_omega: &FiberMatrix,
    opts: &SolveOptions,
) -> Result<CompletionResult> {
    check_inputs(g, omega, f_omega)?;
    let (solved, excluded) = split_missing(g, omega, opts.unreachable)?;
    let k = f_omega.cols();
    let l = g.laplacian();
    let l_ss = l.submatrix(&solved, &solved);
    let l_so = l.submatrix(&solved, omega.observed());
    let rhs = l_so.mul_dense(f_omega.as_slice(), k);

    let m = solved.len();
    let mut x = vec![0.0; m * k];
    let mut stats = SolverStats {
        converged: true,
        ..Default::default()
    };
    if m > 0 {
        match opts.solver {
            SolverKind::ConjugateGradient => {
                let diag: Vec<f64> = solved.iter().map(|&p| g.degrees()[p]).collect();
                let cap = opts.max_iters_factor.max(1) * m;
                for c in 0..k {
                    let b: Vec<f64> = (0..m).map(|i| -rhs[i * k + c]).collect();
                    let out = conjugate_gradient(&l_ss, &diag, &b, opts.rel_tol, cap);
                    stats.iterations = stats.iterations.max(out.iterations);
                    stats.converged &= out.converged;
                    for i in 0..m {
                        x[i * k + c] = out.x[i];
                    }
                }
            }
            SolverKind::Cholesky => {
                let chol = SkylineCholesky::factor(&l_ss)?;
                for c in 0..k {
                    let b: Vec<f64> = (0..m).map(|i| -rhs[i * k + c]).collect();
                    let xc = chol.solve(&b);
                    for i in 0..m {
                        x[i * k + c] = xc[i];
                    }
                }
            }
        }
    }
    stats.residual_norm = residual_frobenius(&l_ss, &l_so, &x, f_omega.as_slice(), k);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("steady-state solution"));
    }
    Ok(CompletionResult {
        completed: assemble(g.n(), omega, f_omega, &solved, &x, &excluded),
        observed: omega.clone(),
        filled_ids: solved,
        excluded_ids: excluded,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionOptions {
    /// Update step; `None` uses `1 / max degree` over the missing nodes.
    pub step: Option<f64>,
    pub max_iters: usize,
    /// Stop once the Frobenius norm of an update is at most this.
    pub tol: f64,
}

impl Default for DiffusionOptions {
    fn default() -> Self {
        Self {
            step: None,
            max_iters: 100_000,
            tol: 1e-10,
        }
    }
}

/// Explicit diffusion `F_c <- F_c - step (L_co F_o + L_cc F_c)` with the
/// observed rows of `f_init` held constant.
///
/// Running out of iterations is not an error: the last iterate is returned
/// with `stats.converged == false`.
pub fn diffuse_iterative(
    g: &SparseGraph,
    omega: &ObservationSet,
    f_init: &FiberMatrix,
    opts: &DiffusionOptions,
) -> Result<CompletionResult> {
    if f_init.rows() != g.n() || omega.n() != g.n() {
        return Err(Error::ShapeMismatch(format!(
            "initial fibers have {} rows, graph has {} nodes",
            f_init.rows(),
            g.n()
        )));
    }
    if f_init.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial fibers"));
    }
    let (solved, excluded) = split_missing(g, omega, UnreachablePolicy::Exclude)?;
    let k = f_init.cols();
    let f_omega = f_init.select_rows(omega.observed());
    let l = g.laplacian();
    let l_ss = l.submatrix(&solved, &solved);
    let l_so = l.submatrix(&solved, omega.observed());
    let forcing = l_so.mul_dense(f_omega.as_slice(), k);

    let step = match opts.step {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::InvalidParameter(format!("diffusion step {s}"))),
        None => {
            let max_deg = solved.iter().map(|&p| g.degrees()[p]).fold(0.0, f64::max);
            if max_deg > 0.0 {
                1.0 / max_deg
            } else {
                1.0
            }
        }
    };

    let mut x = f_init.select_rows(&solved).into_vec();
    let mut iterations = 0;
    let mut converged = solved.is_empty();
    while !converged && iterations < opts.max_iters {
        let lx = l_ss.mul_dense(&x, k);
        let mut update2 = 0.0;
        for i in 0..x.len() {
            let du = step * (forcing[i] + lx[i]);
            x[i] -= du;
            update2 += du * du;
        }
        iterations += 1;
        if !update2.is_finite() {
            return Err(Error::NonFinite("diffusion iterate"));
        }
        converged = libm::sqrt(update2) <= opts.tol;
    }
    let stats = SolverStats {
        iterations,
        residual_norm: residual_frobenius(&l_ss, &l_so, &x, f_omega.as_slice(), k),
        converged,
    };
    Ok(CompletionResult {
        completed: assemble(g.n(), omega, &f_omega, &solved, &x, &excluded),
        observed: omega.clone(),
        filled_ids: solved,
        excluded_ids: excluded,
        stats,
    })
}

/// One partially observed acquisition: observed fibers in increasing id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub observed: ObservationSet,
    pub features: FiberMatrix,
}

impl Acquisition {
    pub fn new(observed: ObservationSet, features: FiberMatrix) -> Result<Self> {
        if features.rows() != observed.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows for {} observed nodes",
                features.rows(),
                observed.len()
            )));
        }
        Ok(Self { observed, features })
    }

    /// Keeps the rows of a full `n`-row matrix listed in `observed`.
    pub fn from_full(full: &FiberMatrix, observed: ObservationSet) -> Result<Self> {
        if full.rows() != observed.n() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows for {} nodes",
                full.rows(),
                observed.n()
            )));
        }
        let features = full.select_rows(observed.observed());
        Ok(Self { observed, features })
    }
}

#[derive(Debug, Clone)]
pub struct GraphPropOutput {
    pub graph: SparseGraph,
    pub results: Vec<CompletionResult>,
    /// Nodes observed in no acquisition (coverage condition violated).
    pub uncovered: Vec<usize>,
}

/// Union of the per-acquisition kNN edge sets as one graph.
pub fn unified_graph(acquisitions: &[Acquisition], k: usize) -> Result<SparseGraph> {
    let first = acquisitions
        .first()
        .ok_or_else(|| Error::InvalidParameter("no acquisitions".into()))?;
    let n = first.observed.n();
    let channels = first.features.cols();
    let mut sets = Vec::with_capacity(acquisitions.len());
    for a in acquisitions {
        if a.observed.n() != n || a.features.cols() != channels {
            return Err(Error::ShapeMismatch(
                "acquisitions disagree on node or channel count".into(),
            ));
        }
        sets.push(knn_edges_among(&a.features, a.observed.observed(), n, k)?);
    }
    Ok(build_graph(&union_edges(&sets)?))
}

/// Nodes that no acquisition observes.
pub fn uncovered_nodes(acquisitions: &[Acquisition]) -> Vec<usize> {
    let n = acquisitions.first().map_or(0, |a| a.observed.n());
    let mut seen = vec![false; n];
    for a in acquisitions {
        for &p in a.observed.observed() {
            seen[p] = true;
        }
    }
    (0..n).filter(|&p| !seen[p]).collect()
}

/// Steady-state solve of every acquisition over a shared graph.
pub fn complete_on_graph(
    graph: &SparseGraph,
    acquisitions: &[Acquisition],
    opts: &SolveOptions,
) -> Result<Vec<CompletionResult>> {
    acquisitions
        .iter()
        .map(|a| solve_steady_state(graph, &a.observed, &a.features, opts))
        .collect()
}

/// The full pipeline: per-acquisition kNN on observed fibers, edge union,
/// one Laplacian, then one steady-state solve per acquisition.
///
/// Unreachable missing nodes are excluded and flagged rather than failing,
/// regardless of `opts.unreachable`.
pub fn graphprop(acquisitions: &[Acquisition], k: usize, opts: &SolveOptions) -> Result<GraphPropOutput> {
    let graph = unified_graph(acquisitions, k)?;
    let opts = SolveOptions {
        unreachable: UnreachablePolicy::Exclude,
        ..*opts
    };
    let results = complete_on_graph(&graph, acquisitions, &opts)?;
    Ok(GraphPropOutput {
        uncovered: uncovered_nodes(acquisitions),
        graph,
        results,
    })
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Binary labels from one channel of a completion.
///
/// Missing nodes get 1 when their value is strictly above the median of the
/// solved values and 0 otherwise. Observed nodes keep their given label,
/// read as `value >= 0.5`.
pub fn classify_by_median(result: &CompletionResult, channel: usize) -> Result<Vec<u8>> {
    if channel >= result.completed.cols() {
        return Err(Error::InvalidParameter(format!("channel {channel} out of range")));
    }
    let f = &result.completed;
    let mut solved: Vec<f64> = result.filled_ids.iter().map(|&p| f.get(p, channel)).collect();
    let med = median(&mut solved);
    let mask = result.observed.mask();
    Ok((0..f.rows())
        .map(|p| {
            let v = f.get(p, channel);
            if mask[p] {
                u8::from(v >= 0.5)
            } else {
                match med {
                    Some(m) => u8::from(v > m),
                    None => 0,
                }
            }
        })
        .collect())
}
