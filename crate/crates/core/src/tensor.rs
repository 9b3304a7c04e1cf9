//! Dense tensors, mode-m matricization and Tucker synthesis.
//!
//! # Layout
//!
//! A [`DenseTensor`] of shape `(I_1, ..., I_m)` stores its entries in a flat
//! buffer where the last mode varies fastest and the remaining modes follow
//! in increasing significance, first mode fastest:
//!
//! ```text
//! offset(i_1, ..., i_m) = i_m + I_m * (i_1 + I_1 * (i_2 + I_2 * (... i_{m-1})))
//! ```
//!
//! With this layout the mode-m fibers of the last mode are contiguous, so the
//! [`FiberMatrix`] of the last mode is the buffer itself read as an `n x I_m`
//! row-major matrix. Row `p` of any matricization enumerates the remaining
//! indices with the first one varying fastest:
//! `p = i_1 + I_1 * i_2 + I_1 * I_2 * i_3 + ...` (zero-based).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// An m-dimensional real array with explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// An `n x channels` row-major matrix whose rows are mode-m fibers.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Strides of the flat layout described in the module docs.
fn strides(shape: &[usize]) -> Vec<usize> {
    let m = shape.len();
    let mut s = vec![0; m];
    if m == 0 {
        return s;
    }
    s[m - 1] = 1;
    let mut acc = shape[m - 1];
    for k in 0..m - 1 {
        s[k] = acc;
        acc *= shape[k];
    }
    s
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!("invalid shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {len} entries, buffer has {}",
                data.len()
            )));
        }
        check_finite(&data, "tensor")?;
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len: usize = shape.iter().product();
        let st = strides(&shape);
        let mut data = vec![0.0; len];
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            let off: usize = idx.iter().zip(&st).map(|(i, s)| i * s).sum();
            data[off] = f(&idx);
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[k] {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat buffer in the documented layout.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        strides(&self.shape).iter().zip(index).map(|(s, i)| s * i).sum()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    /// Mode-`mode` matricization (zero-based mode), fibers in rows.
    pub fn matricize(&self, mode: usize) -> Result<FiberMatrix> {
        let order = self.order();
        if mode >= order {
            return Err(Error::ModeOutOfRange { mode, order });
        }
        let channels = self.shape[mode];
        let n = self.len() / channels;
        if mode == order - 1 {
            return Ok(FiberMatrix {
                rows: n,
                cols: channels,
                data: self.data.clone(),
            });
        }
        let st = strides(&self.shape);
        let others: Vec<usize> = (0..order).filter(|&k| k != mode).collect();
        let mut out = vec![0.0; self.len()];
        let mut idx = vec![0usize; others.len()];
        for p in 0..n {
            let base: usize = others.iter().zip(&idx).map(|(&k, &i)| st[k] * i).sum();
            for c in 0..channels {
                out[p * channels + c] = self.data[base + c * st[mode]];
            }
            for (j, &k) in others.iter().enumerate() {
                idx[j] += 1;
                if idx[j] < self.shape[k] {
                    break;
                }
                idx[j] = 0;
            }
        }
        Ok(FiberMatrix {
            rows: n,
            cols: channels,
            data: out,
        })
    }

    /// Mode product `t x_mode M` for `M` of shape `J x I_mode`, given row-major.
    pub fn mode_product(&self, mode: usize, matrix: &[f64], out_extent: usize) -> Result<Self> {
        let f = self.matricize(mode)?;
        let inner = self.shape[mode];
        if matrix.len() != out_extent * inner {
            return Err(Error::ShapeMismatch(format!(
                "mode-{mode} product needs a {out_extent}x{inner} matrix"
            )));
        }
        let mut g = vec![0.0; f.rows * out_extent];
        for p in 0..f.rows {
            let row = f.row(p);
            for j in 0..out_extent {
                let mrow = &matrix[j * inner..(j + 1) * inner];
                g[p * out_extent + j] = row.iter().zip(mrow).map(|(a, b)| a * b).sum();
            }
        }
        let mut shape = self.shape.clone();
        shape[mode] = out_extent;
        refold(&FiberMatrix::new(f.rows, out_extent, g)?, &shape, mode)
    }
}

impl FiberMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix with {} values",
                data.len()
            )));
        }
        check_finite(&data, "fiber matrix")?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Node count `n`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Channel count `I_m`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.cols..(p + 1) * self.cols]
    }

    pub fn row_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * self.cols..(p + 1) * self.cols]
    }

    pub fn get(&self, p: usize, c: usize) -> f64 {
        self.data[p * self.cols + c]
    }

    pub fn set(&mut self, p: usize, c: usize, v: f64) {
        self.data[p * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Copies the listed rows into a new matrix, in the given order.
    pub fn select_rows(&self, ids: &[usize]) -> FiberMatrix {
        let mut data = Vec::with_capacity(ids.len() * self.cols);
        for &p in ids {
            data.extend_from_slice(self.row(p));
        }
        FiberMatrix {
            rows: ids.len(),
            cols: self.cols,
            data,
        }
    }

    /// Column `c` as an owned vector.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|p| self.get(p, c)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    /// Right-multiplies by `diag(scales)`.
    pub fn scale_columns(&self, scales: &[f64]) -> Result<FiberMatrix> {
        if scales.len() != self.cols {
            return Err(Error::ShapeMismatch("one scale per column required".into()));
        }
        let mut out = self.clone();
        for p in 0..self.rows {
            for (v, s) in out.row_mut(p).iter_mut().zip(scales) {
                *v *= s;
            }
        }
        check_finite(&out.data, "scaled fiber matrix")?;
        Ok(out)
    }
}

/// Inverse of [`DenseTensor::matricize`].
pub fn refold(f: &FiberMatrix, shape: &[usize], mode: usize) -> Result<DenseTensor> {
    let order = shape.len();
    if mode >= order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    let len: usize = shape.iter().product();
    if len != f.rows * f.cols || shape[mode] != f.cols || shape.contains(&0) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} fiber matrix does not refold to {shape:?} along mode {mode}",
            f.rows, f.cols
        )));
    }
    if mode == order - 1 {
        return DenseTensor::new(shape.to_vec(), f.data.clone());
    }
    let st = strides(shape);
    let others: Vec<usize> = (0..order).filter(|&k| k != mode).collect();
    let mut out = vec![0.0; len];
    let mut idx = vec![0usize; others.len()];
    for p in 0..f.rows {
        let base: usize = others.iter().zip(&idx).map(|(&k, &i)| st[k] * i).sum();
        for c in 0..f.cols {
            out[base + c * st[mode]] = f.data[p * f.cols + c];
        }
        for (j, &k) in others.iter().enumerate() {
            idx[j] += 1;
            if idx[j] < shape[k] {
                break;
            }
            idx[j] = 0;
        }
    }
    DenseTensor::new(shape.to_vec(), out)
}

/// A factor matrix `U_k` of shape `r_k x I_k` with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub rank: usize,
    pub extent: usize,
    /// Row-major `rank x extent`.
    pub data: Vec<f64>,
}

impl Factor {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rank: n,
            extent: n,
            data,
        }
    }

    /// Largest deviation of `U U^T` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.rank {
            for b in 0..self.rank {
                let ra = &self.data[a * self.extent..(a + 1) * self.extent];
                let rb = &self.data[b * self.extent..(b + 1) * self.extent];
                let dot: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Core tensor plus one factor per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerFactors {
    core: DenseTensor,
    factors: Vec<Factor>,
}

/// Orthonormality tolerance on `U U^T = I`.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

impl TuckerFactors {
    pub fn new(core: DenseTensor, factors: Vec<Factor>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::ShapeMismatch(format!(
                "{} factors for an order-{} core",
                factors.len(),
                core.order()
            )));
        }
        for (k, u) in factors.iter().enumerate() {
            if u.rank != core.shape()[k] || u.data.len() != u.rank * u.extent {
                return Err(Error::ShapeMismatch(format!(
                    "factor {k} is {}x{}, core extent {}",
                    u.rank,
                    u.extent,
                    core.shape()[k]
                )));
            }
            if u.rank > u.extent {
                return Err(Error::ShapeMismatch(format!(
                    "factor {k} rank {} exceeds extent {}",
                    u.rank, u.extent
                )));
            }
            if u.orthonormality_defect() > ORTHONORMAL_TOL {
                return Err(Error::InvalidParameter(format!("factor {k} rows are not orthonormal")));
            }
        }
        Ok(Self { core, factors })
    }

    /// Skips the orthonormality check; shapes are still validated.
    pub fn new_unchecked_orthonormality(core: DenseTensor, factors: Vec<Factor>) -> Result<Self> {
        if factors.len() != core.order()
            || factors
                .iter()
                .enumerate()
                .any(|(k, u)| u.rank != core.shape()[k] || u.data.len() != u.rank * u.extent)
        {
            return Err(Error::ShapeMismatch("factor shapes disagree with core".into()));
        }
        Ok(Self { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }
}

/// `C x_1 U_1^T x_2 U_2^T ... x_m U_m^T`, giving shape `(I_1, ..., I_m)`.
pub fn tucker_synthesize(tf: &TuckerFactors) -> Result<DenseTensor> {
    let mut t = tf.core.clone();
    for (k, u) in tf.factors.iter().enumerate() {
        // rows of U_k^T are the columns of U_k
        let mut ut = vec![0.0; u.extent * u.rank];
        for a in 0..u.rank {
            for i in 0..u.extent {
                ut[i * u.rank + a] = u.data[a * u.extent + i];
            }
        }
        t = t.mode_product(k, &ut, u.extent)?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_rows_are_mode2_fibers() {
        let t = DenseTensor::from_fn(vec![2, 2], |i| [[1.0, 2.0], [3.0, 4.0]][i[0]][i[1]]).unwrap();
        let f = t.matricize(1).unwrap();
        assert_eq!(f.row(0), &[1.0, 2.0]);
        assert_eq!(f.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn order3_mode3_matches_index_map() {
        // value = i1 + 2*i2 + 6*i3 style labelling, read back through an explicit map
        let shape = vec![2, 3, 2];
        let t = DenseTensor::from_fn(shape.clone(), |i| (i[0] + 2 * i[1] + 6 * i[2]) as f64).unwrap();
        let f = t.matricize(2).unwrap();
        assert_eq!((f.rows(), f.cols()), (6, 2));
        for i2 in 0..3 {
            for i1 in 0..2 {
                let p = i1 + 2 * i2;
                for c in 0..2 {
                    assert_eq!(f.get(p, c), t.get(&[i1, i2, c]));
                }
            }
        }
        assert_eq!(refold(&f, &shape, 2).unwrap(), t);
    }

    #[test]
    fn mode_out_of_range() {
        let t = DenseTensor::zeros(vec![2, 2]).unwrap();
        assert_eq!(t.matricize(2), Err(Error::ModeOutOfRange { mode: 2, order: 2 }));
    }

    #[test]
    fn scalar_refold() {
        let f = FiberMatrix::new(1, 1, vec![7.0]).unwrap();
        let t = refold(&f, &[1, 1], 1).unwrap();
        assert_eq!(t.as_slice(), &[7.0]);
    }

    #[test]
    fn refold_rejects_size_mismatch() {
        let f = FiberMatrix::zeros(3, 2);
        assert!(refold(&f, &[2, 2, 2], 2).is_err());
        assert!(refold(&f, &[3, 2], 0).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(DenseTensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn identity_factors_reproduce_core() {
        let t = DenseTensor::from_fn(vec![2, 3, 4], |i| (i[0] * 12 + i[1] * 4 + i[2]) as f64).unwrap();
        let tf = TuckerFactors::new(
            t.clone(),
            vec![Factor::identity(2), Factor::identity(3), Factor::identity(4)],
        )
        .unwrap();
        assert_eq!(tucker_synthesize(&tf).unwrap(), t);
    }

    #[test]
    fn scalar_core_gives_scaled_outer_product() {
        let a = [0.6, 0.8];
        let b = [1.0, 0.0, 0.0];
        let c = [0.0, 0.6, 0.0, 0.8];
        let core = DenseTensor::new(vec![1, 1, 1], vec![2.0]).unwrap();
        let f = |v: &[f64]| Factor {
            rank: 1,
            extent: v.len(),
            data: v.to_vec(),
        };
        let tf = TuckerFactors::new(core, vec![f(&a), f(&b), f(&c)]).unwrap();
        let h = tucker_synthesize(&tf).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    let expect = 2.0 * a[i] * b[j] * c[k];
                    assert!((h.get(&[i, j, k]) - expect).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn non_orthonormal_factor_rejected() {
        let core = DenseTensor::new(vec![1], vec![1.0]).unwrap();
        let u = Factor {
            rank: 1,
            extent: 2,
            data: vec![1.0, 1.0],
        };
        assert!(TuckerFactors::new(core, vec![u]).is_err());
    }
}
