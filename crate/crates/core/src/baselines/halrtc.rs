//! HaLRTC: ADMM on the weighted sum of mode-unfolding nuclear norms, with
//! observed entries held fixed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{singular_value_shrink, singular_values};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct HalrtcParams {
    /// Per-mode weights; empty means uniform `1 / order`.
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub max_iters: usize,
    /// Stop once both `||X_k - X_{k-1}||_F` and `max_i ||M_i - X_k||_F` fall
    /// below this times `||X_{k-1}||_F`.
    pub tol: f64,
    /// Record the objective of every iterate (one extra SVD per mode).
    pub track_objective: bool,
}

impl Default for HalrtcParams {
    fn default() -> Self {
        Self {
            alphas: Vec::new(),
            rho: 1e-3,
            rho_growth: 1.05,
            rho_max: 1e3,
            max_iters: 300,
            tol: 1e-5,
            track_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalrtcOutcome {
    pub tensor: DenseTensor,
    pub iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
}

/// Flat offsets of the mode-`mode` matricization, row-major over (fiber, channel).
fn unfold_map(shape: &[usize], mode: usize) -> Vec<usize> {
    let idx: Vec<f64> = (0..shape.iter().product::<usize>()).map(|i| i as f64).collect();
    // matricize carries values along; offsets are exact in f64 for any buffer that fits in memory
    let t = DenseTensor::new(shape.to_vec(), idx).expect("valid shape");
    t.matricize(mode)
        .expect("mode in range")
        .as_slice()
        .iter()
        .map(|&v| v as usize)
        .collect()
}

fn gather(data: &[f64], map: &[usize]) -> Vec<f64> {
    map.iter().map(|&o| data[o]).collect()
}

fn weighted_nuclear(x: &[f64], maps: &[Vec<usize>], shape: &[usize], alphas: &[f64]) -> f64 {
    let n = x.len();
    maps.iter()
        .enumerate()
        .map(|(k, map)| {
            let m = gather(x, map);
            alphas[k] * singular_values(&m, n / shape[k], shape[k]).iter().sum::<f64>()
        })
        .sum()
}

/// Completes `t` where `mask` is false. `mask` follows the tensor's flat layout.
pub fn halrtc_complete(t: &DenseTensor, mask: &[bool], params: &HalrtcParams) -> Result<HalrtcOutcome> {
    let shape = t.shape().to_vec();
    let order = shape.len();
    let len = t.len();
    if mask.len() != len {
        return Err(Error::ShapeMismatch(format!(
            "mask of length {} for tensor of {len} entries",
            mask.len()
        )));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMissing);
    }
    let alphas = if params.alphas.is_empty() {
        vec![1.0 / order as f64; order]
    } else {
        params.alphas.clone()
    };
    if alphas.len() != order
        || alphas.iter().any(|&a| !(a >= 0.0 && a.is_finite()))
        || (alphas.iter().sum::<f64>() - 1.0).abs() > 1e-12
    {
        return Err(Error::InvalidParameter(format!(
            "need {order} non-negative mode weights summing to 1, got {:?}",
            alphas
        )));
    }
    if !(params.rho > 0.0 && params.rho_growth >= 1.0 && params.rho_max >= params.rho) {
        return Err(Error::InvalidParameter(format!(
            "penalty schedule rho={} growth={} max={}",
            params.rho, params.rho_growth, params.rho_max
        )));
    }

    let maps: Vec<Vec<usize>> = (0..order).map(|k| unfold_map(&shape, k)).collect();
    let mut x: Vec<f64> = t
        .as_slice()
        .iter()
        .zip(mask)
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    let mut ys: Vec<Vec<f64>> = vec![vec![0.0; len]; order];
    let mut ms: Vec<Vec<f64>> = vec![vec![0.0; len]; order];
    let mut rho = params.rho;
    let mut history = Vec::new();
    if params.track_objective {
        history.push(weighted_nuclear(&x, &maps, &shape, &alphas));
    }

    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=params.max_iters {
        iterations = it;
        for k in 0..order {
            let rows = len / shape[k];
            let map = &maps[k];
            let shifted: Vec<f64> = map.iter().map(|&o| x[o] + ys[k][o] / rho).collect();
            let (shrunk, _) = singular_value_shrink(&shifted, rows, shape[k], alphas[k] / rho);
            for (&o, v) in map.iter().zip(shrunk) {
                ms[k][o] = v;
            }
        }
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for o in 0..len {
            norm2 += x[o] * x[o];
            if mask[o] {
                continue;
            }
            let v = (0..order).map(|k| ms[k][o] - ys[k][o] / rho).sum::<f64>() / order as f64;
            diff2 += (v - x[o]) * (v - x[o]);
            x[o] = v;
        }
        let mut primal2: f64 = 0.0;
        for k in 0..order {
            let mut r2 = 0.0;
            for o in 0..len {
                let r = ms[k][o] - x[o];
                r2 += r * r;
                ys[k][o] -= rho * r;
            }
            primal2 = primal2.max(r2);
        }
        rho = (rho * params.rho_growth).min(params.rho_max);
        if params.track_objective {
            history.push(weighted_nuclear(&x, &maps, &shape, &alphas));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("HaLRTC iterate"));
        }
        let scale = libm::sqrt(norm2).max(f64::MIN_POSITIVE);
        if libm::sqrt(diff2) <= params.tol * scale && libm::sqrt(primal2) <= params.tol * scale {
            converged = true;
            break;
        }
    }
    Ok(HalrtcOutcome {
        tensor: DenseTensor::new(shape, x)?,
        iterations,
        converged,
        objective_history: history,
    })
}

/// Stacks same-shaped acquisitions along a new trailing mode.
pub fn stack_acquisitions(acqs: &[DenseTensor]) -> Result<DenseTensor> {
    let first = acqs
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no acquisitions".into()))?;
    if let Some(bad) = acqs.iter().find(|a| a.shape() != first.shape()) {
        return Err(Error::ShapeMismatch(format!(
            "acquisition shapes {:?} and {:?} differ",
            first.shape(),
            bad.shape()
        )));
    }
    let mut shape = first.shape().to_vec();
    shape.push(acqs.len());
    let m = first.order();
    DenseTensor::from_fn(shape, |idx| acqs[idx[m]].get(&idx[..m]))
}

/// Splits a tensor along its trailing mode.
pub fn unstack(t: &DenseTensor) -> Result<Vec<DenseTensor>> {
    let order = t.order();
    if order < 2 {
        return Err(Error::ShapeMismatch(format!("cannot unstack an order-{order} tensor")));
    }
    let shape = t.shape();
    let lam = shape[order - 1];
    let inner = shape[..order - 1].to_vec();
    (0..lam)
        .map(|l| {
            DenseTensor::from_fn(inner.clone(), |idx| {
                let mut full = idx.to_vec();
                full.push(l);
                t.get(&full)
            })
        })
        .collect()
}
