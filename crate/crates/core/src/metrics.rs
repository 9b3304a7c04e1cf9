//! Reconstruction error metrics over missing fibers, and label accuracy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::ObservationSet;
use crate::tensor::FiberMatrix;

/// Errors `truth - estimate` on the missing fibers of each acquisition.
/// Nodes listed in `excluded` (never observed anywhere) contribute nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorField {
    channels: usize,
    blocks: Vec<FiberMatrix>,
    excluded: Vec<usize>,
    truth_peak: Option<f64>,
}

impl ErrorField {
    /// Wraps precomputed error rows; every block needs the same channel count.
    pub fn new(channels: usize, blocks: Vec<FiberMatrix>) -> Result<Self> {
        if let Some(b) = blocks.iter().find(|b| b.cols() != channels) {
            return Err(Error::ShapeMismatch(format!(
                "error block with {} channels, expected {channels}",
                b.cols()
            )));
        }
        Ok(Self {
            channels,
            blocks,
            excluded: Vec::new(),
            truth_peak: None,
        })
    }

    /// Collects `truth - estimate` over each acquisition's missing nodes, minus `excluded`.
    pub fn from_acquisitions(
        truths: &[FiberMatrix],
        estimates: &[FiberMatrix],
        observed: &[ObservationSet],
        excluded: &[usize],
    ) -> Result<Self> {
        if truths.len() != estimates.len() || truths.len() != observed.len() || truths.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} truths, {} estimates, {} observation sets",
                truths.len(),
                estimates.len(),
                observed.len()
            )));
        }
        let channels = truths[0].cols();
        let n = truths[0].rows();
        let mut skip = vec![false; n];
        for &p in excluded {
            if p >= n {
                return Err(Error::NodeOutOfRange { id: p, n });
            }
            skip[p] = true;
        }
        let mut blocks = Vec::with_capacity(truths.len());
        let mut peak: f64 = 0.0;
        for ((t, e), o) in truths.iter().zip(estimates).zip(observed) {
            if t.rows() != n || e.rows() != n || t.cols() != channels || e.cols() != channels || o.n() != n {
                return Err(Error::ShapeMismatch(format!(
                    "acquisition of {}x{} against estimate {}x{} and {} nodes",
                    t.rows(),
                    t.cols(),
                    e.rows(),
                    e.cols(),
                    o.n()
                )));
            }
            for p in 0..n {
                if !skip[p] {
                    peak = t.row(p).iter().fold(peak, |m, v| m.max(v.abs()));
                }
            }
            let rows: Vec<usize> = o.missing().into_iter().filter(|&p| !skip[p]).collect();
            let mut data = Vec::with_capacity(rows.len() * channels);
            for &p in &rows {
                data.extend(t.row(p).iter().zip(e.row(p)).map(|(a, b)| a - b));
            }
            blocks.push(FiberMatrix::new(rows.len(), channels, data)?);
        }
        let mut excluded = excluded.to_vec();
        excluded.sort_unstable();
        excluded.dedup();
        Ok(Self {
            channels,
            blocks,
            excluded,
            truth_peak: Some(peak),
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn blocks(&self) -> &[FiberMatrix] {
        &self.blocks
    }

    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    /// Largest absolute ground-truth value over retained nodes, when known.
    pub fn truth_peak(&self) -> Option<f64> {
        self.truth_peak
    }

    /// Number of missing fibers summed over acquisitions.
    pub fn missing_fibers(&self) -> usize {
        self.blocks.iter().map(|b| b.rows()).sum()
    }

    /// Number of scalar error entries.
    pub fn count(&self) -> usize {
        self.channels * self.missing_fibers()
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| b.as_slice().iter().copied())
    }

    fn band(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.blocks
            .iter()
            .flat_map(move |b| (0..b.rows()).map(move |p| b.get(p, c)))
    }

    fn nonempty(&self) -> Result<usize> {
        match self.count() {
            0 => Err(Error::NoMissingEntries),
            n => Ok(n),
        }
    }
}

pub fn mse(e: &ErrorField) -> Result<f64> {
    let n = e.nonempty()?;
    Ok(e.values().map(|w| w * w).sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RmseForm {
    /// Square root of the mean squared error.
    #[default]
    RootMean,
    /// `||W||_F` divided by the entry count, as the formula is sometimes printed.
    /// Equals `RootMean / sqrt(count)`.
    Literal,
}

pub fn rmse(e: &ErrorField, form: RmseForm) -> Result<f64> {
    let n = e.nonempty()?;
    let ss: f64 = e.values().map(|w| w * w).sum();
    Ok(match form {
        RmseForm::RootMean => libm::sqrt(ss / n as f64),
        RmseForm::Literal => libm::sqrt(ss) / n as f64,
    })
}

pub fn mae(e: &ErrorField) -> Result<f64> {
    let n = e.nonempty()?;
    Ok(e.values().map(f64::abs).sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PsnrVariant {
    /// `10 log10(max|w| / mean(w^2))` per band.
    #[default]
    PeakError,
    /// `10 log10(peak^2 / mean(w^2))` per band.
    Standard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mpsnr {
    /// Mean over bands with nonzero error; `+inf` when every band is exact.
    pub value: f64,
    pub per_band: Vec<f64>,
    /// Bands with zero error, left out of the mean.
    pub zero_error_bands: Vec<usize>,
}

/// Band-averaged PSNR. The standard variant takes `peak`, falling back to the
/// ground-truth peak recorded in the field.
pub fn mpsnr(e: &ErrorField, variant: PsnrVariant, peak: Option<f64>) -> Result<Mpsnr> {
    e.nonempty()?;
    let count = e.missing_fibers() as f64;
    let peak = match variant {
        PsnrVariant::PeakError => 0.0,
        PsnrVariant::Standard => peak
            .or(e.truth_peak)
            .ok_or_else(|| Error::InvalidParameter("standard PSNR needs a peak value".into()))?,
    };
    let mut per_band = Vec::with_capacity(e.channels);
    let mut zero_error_bands = Vec::new();
    for c in 0..e.channels {
        let (ss, max) = e.band(c).fold((0.0, 0.0f64), |(s, m), w| (s + w * w, m.max(w.abs())));
        let band_mse = ss / count;
        if band_mse == 0.0 {
            per_band.push(f64::INFINITY);
            zero_error_bands.push(c);
            continue;
        }
        let ratio = match variant {
            PsnrVariant::PeakError => max / band_mse,
            PsnrVariant::Standard => peak * peak / band_mse,
        };
        per_band.push(10.0 * libm::log10(ratio));
    }
    let finite: Vec<f64> = per_band.iter().copied().filter(|v| v.is_finite()).collect();
    let value = if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    Ok(Mpsnr {
        value,
        per_band,
        zero_error_bands,
    })
}

/// Fraction of `evaluated` nodes whose predicted label matches the truth.
pub fn accuracy(predicted: &[u8], truth: &[u8], evaluated: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if evaluated.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let n = truth.len();
    let mut hits = 0usize;
    for &p in evaluated {
        if p >= n {
            return Err(Error::NodeOutOfRange { id: p, n });
        }
        hits += usize::from(predicted[p] == truth[p]);
    }
    Ok(hits as f64 / evaluated.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(rows: usize, cols: usize, v: f64) -> ErrorField {
        ErrorField::new(cols, vec![FiberMatrix::new(rows, cols, vec![v; rows * cols]).unwrap()]).unwrap()
    }

    #[test]
    fn constant_half() {
        let e = constant(10, 3, 0.5);
        assert!((mse(&e).unwrap() - 0.25).abs() < 1e-15);
        assert!((rmse(&e, RmseForm::RootMean).unwrap() - 0.5).abs() < 1e-15);
        assert!((mae(&e).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_entry_and_empty() {
        assert_eq!(mse(&constant(1, 1, 2.0)).unwrap(), 4.0);
        assert!(matches!(mse(&constant(0, 2, 0.0)), Err(Error::NoMissingEntries)));
    }

    #[test]
    fn psnr_examples() {
        let e = constant(100, 1, 0.1);
        assert!((mpsnr(&e, PsnrVariant::PeakError, None).unwrap().value - 10.0).abs() < 1e-12);
        let e = constant(100, 1, 0.1);
        assert!((mpsnr(&e, PsnrVariant::Standard, Some(1.0)).unwrap().value - 20.0).abs() < 1e-12);
        let mut data = vec![0.1; 20];
        for p in 0..10 {
            data[p * 2 + 1] = 0.0;
        }
        let e = ErrorField::new(2, vec![FiberMatrix::new(10, 2, data).unwrap()]).unwrap();
        let m = mpsnr(&e, PsnrVariant::PeakError, None).unwrap();
        assert_eq!(m.zero_error_bands, vec![1]);
        assert!((m.value - 10.0).abs() < 1e-12);
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[1, 1, 0, 0], &[1, 1, 0, 1], &[0, 1, 2, 3]).unwrap(), 0.75);
        assert!(matches!(accuracy(&[1], &[1], &[]), Err(Error::EmptyEvaluation)));
    }
}
