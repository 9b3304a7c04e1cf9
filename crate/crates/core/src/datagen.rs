//! Seeded synthetic instances: Tucker acquisitions, disjoint observation
//! sets, partial-overlap masks, a two-block label graph and smooth rasters.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{build_graph, EdgeSet, ObservationSet, SparseGraph};
use crate::tensor::{tucker_synthesize, DenseTensor, Factor, FiberMatrix, TuckerFactors};

/// The generator used by every seeded routine in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthSpec {
    pub i1: usize,
    pub i2: usize,
    pub i3: usize,
    pub r: usize,
    pub lambda_count: usize,
    pub missing_frac: f64,
    pub core_mean: f64,
    pub core_std: f64,
    pub scale_mean: f64,
    pub scale_std: f64,
    /// Rescale acquisition 1 to unit root-mean-square (all acquisitions share the factor).
    pub normalize: bool,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(i1: usize, i2: usize, i3: usize, r: usize, seed: u64) -> Self {
        Self {
            i1,
            i2,
            i3,
            r,
            lambda_count: 2,
            missing_frac: 0.4,
            core_mean: 3.0,
            core_std: 3.0,
            scale_mean: 0.0,
            scale_std: 1.0,
            normalize: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.i1 == 0 || self.i2 == 0 || self.i3 == 0 || self.lambda_count == 0 {
            return Err(Error::InvalidParameter(format!(
                "extents ({}, {}, {}) and acquisition count {} must be positive",
                self.i1, self.i2, self.i3, self.lambda_count
            )));
        }
        if self.r == 0 || self.r > self.i1.min(self.i2) {
            return Err(Error::InvalidParameter(format!(
                "rank {} outside 1..={}",
                self.r,
                self.i1.min(self.i2)
            )));
        }
        if !(self.core_std >= 0.0 && self.scale_std >= 0.0)
            || !self.core_mean.is_finite()
            || !self.scale_mean.is_finite()
        {
            return Err(Error::InvalidParameter("distribution parameters".into()));
        }
        check_fraction(self.missing_frac, self.lambda_count)
    }

    /// Mode-3 fibers per acquisition.
    pub fn fiber_count(&self) -> usize {
        self.i1 * self.i2
    }
}

fn check_fraction(fraction: f64, acquisitions: usize) -> Result<()> {
    let ok = fraction == 0.0 || (fraction > 0.0 && acquisitions >= 2 && fraction * (acquisitions as f64) < 1.0);
    if ok {
        Ok(())
    } else {
        Err(Error::InfeasibleFraction { fraction, acquisitions })
    }
}

fn normal(mean: f64, std: f64) -> Result<Normal<f64>> {
    Normal::new(mean, std).map_err(|e| Error::InvalidParameter(format!("normal({mean}, {std}): {e}")))
}

/// `rank x extent` factor with orthonormal rows, from the QR of a Gaussian matrix.
pub fn random_orthonormal_factor(extent: usize, rank: usize, rng: &mut ChaCha8Rng) -> Factor {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let g = DMatrix::<f64>::from_fn(extent, rank, |_, _| std.sample(rng));
    let q = g.qr().q();
    let mut data = vec![0.0; rank * extent];
    for a in 0..rank {
        for i in 0..extent {
            data[a * extent + i] = q[(i, a)];
        }
    }
    Factor { rank, extent, data }
}

/// Acquisitions of shape `(i1, i2, i3)`. The first is a Tucker synthesis with
/// ranks `(r, r, i3)`; each later one scales the channels of the first by
/// fresh Gaussian factors.
pub fn generate_acquisitions(s: &SynthSpec) -> Result<Vec<DenseTensor>> {
    s.validate()?;
    let mut rng = seeded_rng(s.seed);
    let factors = vec![
        random_orthonormal_factor(s.i1, s.r, &mut rng),
        random_orthonormal_factor(s.i2, s.r, &mut rng),
        random_orthonormal_factor(s.i3, s.i3, &mut rng),
    ];
    let core_dist = normal(s.core_mean, s.core_std)?;
    let core_len = s.r * s.r * s.i3;
    let core_data: Vec<f64> = (0..core_len).map(|_| core_dist.sample(&mut rng)).collect();
    let core = DenseTensor::new(vec![s.r, s.r, s.i3], core_data)?;
    let mut first = tucker_synthesize(&TuckerFactors::new(core, factors)?)?;
    if s.normalize {
        let rms = libm::sqrt(first.as_slice().iter().map(|x| x * x).sum::<f64>() / first.len() as f64);
        if rms > 0.0 {
            let data: Vec<f64> = first.as_slice().iter().map(|x| x / rms).collect();
            first = DenseTensor::new(first.shape().to_vec(), data)?;
        }
    }
    let scale_dist = normal(s.scale_mean, s.scale_std)?;
    let mut out = Vec::with_capacity(s.lambda_count);
    out.push(first.clone());
    for _ in 1..s.lambda_count {
        let scales: Vec<f64> = (0..s.i3).map(|_| scale_dist.sample(&mut rng)).collect();
        out.push(scale_channels(&first, &scales)?);
    }
    Ok(out)
}

/// Multiplies the last-mode fibers of `t` entrywise by `scales`.
pub fn scale_channels(t: &DenseTensor, scales: &[f64]) -> Result<DenseTensor> {
    let shape = t.shape();
    let k = *shape.last().ok_or_else(|| Error::ShapeMismatch("empty shape".into()))?;
    if scales.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "{} scales for {k} channels",
            scales.len()
        )));
    }
    let data = t
        .as_slice()
        .iter()
        .enumerate()
        .map(|(o, v)| v * scales[o % k])
        .collect();
    DenseTensor::new(shape.to_vec(), data)
}

/// One observation set per acquisition; each misses `floor(missing_frac * n)`
/// nodes and the missing sets are pairwise disjoint.
pub fn sample_observation_sets(
    n: usize,
    missing_frac: f64,
    lambda_count: usize,
    seed: u64,
) -> Result<Vec<ObservationSet>> {
    if lambda_count == 0 {
        return Err(Error::InvalidParameter("no acquisitions".into()));
    }
    check_fraction(missing_frac, lambda_count)?;
    let m = libm::floor(missing_frac * n as f64) as usize;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded_rng(seed));
    (0..lambda_count)
        .map(|l| {
            let mut observed = vec![true; n];
            for &p in &perm[l * m..(l + 1) * m] {
                observed[p] = false;
            }
            Ok(ObservationSet::from_mask(&observed))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OverlapSpec {
    pub height: usize,
    pub width: usize,
    pub area_removed_frac: f64,
}

impl OverlapSpec {
    /// Removed area for a crop of `c` rows and columns.
    pub fn achieved(&self, c: usize) -> f64 {
        let (h, w) = (self.height as f64, self.width as f64);
        1.0 - (h - c as f64) * (w - c as f64) / (h * w)
    }

    /// Crop count whose removed area is closest to the target, smallest on ties.
    pub fn crop(&self) -> Result<usize> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidParameter("empty raster".into()));
        }
        if !(0.0..=0.7).contains(&self.area_removed_frac) {
            return Err(Error::InvalidParameter(format!(
                "area fraction {} outside [0, 0.7]",
                self.area_removed_frac
            )));
        }
        let mut best = (0, f64::INFINITY);
        for c in 0..self.height.min(self.width) {
            let gap = (self.achieved(c) - self.area_removed_frac).abs();
            if gap < best.1 {
                best = (c, gap);
            }
        }
        Ok(best.0)
    }
}

/// Fiber masks for the two acquisitions of the partial-overlap protocol.
/// Pixel `(row, col)` is node `row + height * col`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMasks {
    pub crop: usize,
    pub achieved: f64,
    pub first: Vec<bool>,
    pub second: Vec<bool>,
    pub never_observed: Vec<usize>,
}

impl OverlapMasks {
    pub fn observation_sets(&self) -> [ObservationSet; 2] {
        [
            ObservationSet::from_mask(&self.first),
            ObservationSet::from_mask(&self.second),
        ]
    }
}

/// The first acquisition loses `c` rows at the top and `c` columns at the
/// left, the second `c` rows at the bottom and `c` columns at the right.
pub fn partial_overlap_masks(o: &OverlapSpec) -> Result<OverlapMasks> {
    let c = o.crop()?;
    let (h, w) = (o.height, o.width);
    let mut first = vec![true; h * w];
    let mut second = vec![true; h * w];
    let mut never_observed = Vec::new();
    for col in 0..w {
        for row in 0..h {
            let p = row + h * col;
            first[p] = row >= c && col >= c;
            second[p] = row < h - c && col < w - c;
            if !first[p] && !second[p] {
                never_observed.push(p);
            }
        }
    }
    Ok(OverlapMasks {
        crop: c,
        achieved: o.achieved(c),
        first,
        second,
        never_observed,
    })
}

pub const INTRA_BLOCK_DENSITY: f64 = 0.9;
pub const CROSS_BLOCK_DENSITY: f64 = 0.01;

/// Two dense blocks of `block_size` nodes joined by sparse cross edges;
/// labels are 0 for the first block and 1 for the second. Draws again until
/// the graph is connected.
pub fn two_block_graph(block_size: usize, seed: u64) -> Result<(EdgeSet, Vec<u8>)> {
    if block_size < 2 {
        return Err(Error::InvalidParameter(format!("block size {block_size} below 2")));
    }
    let n = 2 * block_size;
    let mut rng = seeded_rng(seed);
    loop {
        let mut pairs = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let same = (u < block_size) == (v < block_size);
                let p = if same { INTRA_BLOCK_DENSITY } else { CROSS_BLOCK_DENSITY };
                if rng.random_bool(p) {
                    pairs.push((u, v));
                }
            }
        }
        let edges = EdgeSet::new(n, pairs)?;
        let comps = build_graph(&edges).components();
        if comps.iter().all(|&c| c == comps[0]) {
            let labels = (0..n).map(|i| u8::from(i >= block_size)).collect();
            return Ok((edges, labels));
        }
    }
}

/// Pair of `height x width x bands` rasters built from a mixture of broad
/// Gaussian bumps, values in `[0, 1]`; the second is the first with each band
/// scaled by a factor drawn from `[0.5, 1.5]`.
pub fn smooth_raster_pair(height: usize, width: usize, bands: usize, seed: u64) -> Result<(DenseTensor, DenseTensor)> {
    if height == 0 || width == 0 || bands == 0 {
        return Err(Error::InvalidParameter("empty raster".into()));
    }
    let mut rng = seeded_rng(seed);
    let bumps = 8;
    let side = height.min(width) as f64;
    let centres: Vec<(f64, f64, f64)> = (0..bumps)
        .map(|_| {
            (
                rng.random_range(0.0..height as f64),
                rng.random_range(0.0..width as f64),
                rng.random_range(0.1 * side..0.3 * side),
            )
        })
        .collect();
    let amps: Vec<Vec<f64>> = (0..bands)
        .map(|_| (0..bumps).map(|_| rng.random_range(0.2..1.0)).collect())
        .collect();
    let raw = DenseTensor::from_fn(vec![height, width, bands], |i| {
        let (y, x) = (i[0] as f64, i[1] as f64);
        centres
            .iter()
            .zip(&amps[i[2]])
            .map(|(&(cy, cx, s), a)| a * libm::exp(-((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (2.0 * s * s)))
            .sum()
    })?;
    let lo = raw.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let first = DenseTensor::new(
        raw.shape().to_vec(),
        raw.as_slice().iter().map(|v| (v - lo) / span).collect(),
    )?;
    let scales: Vec<f64> = (0..bands).map(|_| rng.random_range(0.5..1.5)).collect();
    let second = scale_channels(&first, &scales)?;
    Ok((first, second))
}

/// A connected random graph with a random observation set and signal.
#[derive(Debug, Clone)]
pub struct GraphInstance {
    pub graph: SparseGraph,
    pub omega: ObservationSet,
    pub f0: FiberMatrix,
}

/// Random spanning tree plus uniformly drawn extra edges up to roughly
/// `mean_degree`; `floor(missing_frac * n)` nodes missing (at least one kept);
/// standard normal signal.
pub fn random_graph_instance(
    n: usize,
    mean_degree: f64,
    missing_frac: f64,
    channels: usize,
    seed: u64,
) -> Result<GraphInstance> {
    if n < 2 || channels == 0 || !(0.0..1.0).contains(&missing_frac) {
        return Err(Error::InvalidParameter(format!(
            "instance n={n} channels={channels} missing={missing_frac}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    let target = libm::round(mean_degree * n as f64 / 2.0) as usize;
    for _ in pairs.len()..target.min(n * (n - 1) / 2) {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        pairs.push((u, v));
    }
    let graph = build_graph(&EdgeSet::new(n, pairs)?);
    let m = (libm::floor(missing_frac * n as f64) as usize).min(n - 1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let omega = ObservationSet::new(n, perm[m..].to_vec())?;
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let f0 = FiberMatrix::new(n, channels, (0..n * channels).map(|_| std.sample(&mut rng)).collect())?;
    Ok(GraphInstance { graph, omega, f0 })
}
