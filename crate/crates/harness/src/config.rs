//! Experiment configuration, read from TOML. Every field has a desk-scale
//! default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use graphprop_core::propagation::UnreachablePolicy;
use graphprop_core::{GtvmOptions, HalrtcParams, PsnrVariant, RmseForm, SolveOptions, SolverKind};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RankSweep,
    MissingSweep,
    OverlapSim,
    Blogs,
    Complete,
    BoundReport,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RankSweep => "rank-sweep",
            ExperimentKind::MissingSweep => "missing-sweep",
            ExperimentKind::OverlapSim => "overlap-sim",
            ExperimentKind::Blogs => "blogs",
            ExperimentKind::Complete => "complete",
            ExperimentKind::BoundReport => "bound-report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub rel_tol: f64,
    pub max_iters_factor: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            kind: d.solver,
            rel_tol: d.rel_tol,
            max_iters_factor: d.max_iters_factor,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            solver: self.kind,
            rel_tol: self.rel_tol,
            max_iters_factor: self.max_iters_factor,
            unreachable: UnreachablePolicy::Exclude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub rmse: RmseForm,
    pub psnr: PsnrVariant,
    /// Peak for the standard PSNR variant; ground-truth maximum when absent.
    pub psnr_peak: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HalrtcConfig {
    /// Per-mode weights; empty means uniform.
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for HalrtcConfig {
    fn default() -> Self {
        let d = HalrtcParams::default();
        Self {
            alphas: d.alphas,
            rho: d.rho,
            rho_growth: d.rho_growth,
            rho_max: d.rho_max,
            max_iters: d.max_iters,
            tol: d.tol,
        }
    }
}

impl HalrtcConfig {
    pub fn params(&self) -> HalrtcParams {
        HalrtcParams {
            alphas: self.alphas.clone(),
            rho: self.rho,
            rho_growth: self.rho_growth,
            rho_max: self.rho_max,
            max_iters: self.max_iters,
            tol: self.tol,
            track_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GtvmConfig {
    pub rel_tol: f64,
    pub max_iters_factor: usize,
    pub dense_max_nodes: usize,
}

impl Default for GtvmConfig {
    fn default() -> Self {
        let d = GtvmOptions::default();
        Self {
            rel_tol: d.rel_tol,
            max_iters_factor: d.max_iters_factor,
            dense_max_nodes: d.dense_max_nodes,
        }
    }
}

impl GtvmConfig {
    pub fn options(&self) -> GtvmOptions {
        GtvmOptions {
            rel_tol: self.rel_tol,
            max_iters_factor: self.max_iters_factor,
            dense_max_nodes: self.dense_max_nodes,
        }
    }
}

/// Synthetic Tucker instances for the sweeps and the bound report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub i1: usize,
    pub i2: usize,
    pub i3: usize,
    pub lambda_count: usize,
    pub core_mean: f64,
    pub core_std: f64,
    pub scale_mean: f64,
    pub scale_std: f64,
    pub normalize: bool,
    /// Rank grid of the rank sweep.
    pub ranks: Vec<usize>,
    /// Missing fraction of the rank sweep and the bound report.
    pub missing_frac: f64,
    /// Missing-fraction grid of the missing sweep.
    pub missing_fracs: Vec<f64>,
    /// One missing sweep per rank (low, mid, high).
    pub tile_ranks: Vec<usize>,
    /// Rank of the bound-report instance.
    pub bound_rank: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            i1: 60,
            i2: 60,
            i3: 3,
            lambda_count: 2,
            core_mean: 3.0,
            core_std: 3.0,
            scale_mean: 0.0,
            scale_std: 1.0,
            normalize: true,
            ranks: vec![1, 5, 10, 20, 30, 40, 50, 60],
            missing_frac: 0.4,
            missing_fracs: vec![0.05, 0.15, 0.25, 0.35, 0.45],
            tile_ranks: vec![5, 30, 60],
            bound_rank: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapConfig {
    /// Co-registered rasters in the tensor format; synthetic smooth pairs when absent.
    pub raster_a: Option<PathBuf>,
    pub raster_b: Option<PathBuf>,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub area_fracs: Vec<f64>,
    /// Write completed rasters of the first repeat.
    pub write_rasters: bool,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self {
            raster_a: None,
            raster_b: None,
            height: 128,
            width: 128,
            bands: 4,
            area_fracs: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            write_rasters: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlogsConfig {
    /// Edge list and 0/1 label file; the two-block stand-in graph when absent.
    pub edges: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub block_size: usize,
    pub label_fracs: Vec<f64>,
}

impl Default for BlogsConfig {
    fn default() -> Self {
        Self {
            edges: None,
            labels: None,
            block_size: 50,
            label_fracs: vec![0.05, 0.1, 0.2, 0.4, 0.6, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CompleteConfig {
    /// One tensor file per acquisition.
    pub tensors: Vec<PathBuf>,
    /// One 0/1 fiber mask per acquisition (1 = observed).
    pub masks: Vec<PathBuf>,
    /// Fiber mode, zero-based; the last mode when absent.
    pub mode: Option<usize>,
    /// Ground-truth tensors; when given, a bound report is written per acquisition.
    pub truths: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    /// Repeats per sweep point; 3 for desk runs, 10 (30 for blogs) at full scale.
    pub repeats: Option<usize>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub k: usize,
    pub out_dir: PathBuf,
    pub full_scale: bool,
    pub solver: SolverConfig,
    pub metrics: MetricConfig,
    pub halrtc: HalrtcConfig,
    pub gtvm: GtvmConfig,
    pub synth: SynthConfig,
    pub overlap: OverlapConfig,
    pub blogs: BlogsConfig,
    pub complete: CompleteConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 0,
            repeats: None,
            workers: 0,
            k: 10,
            out_dir: PathBuf::from("results"),
            full_scale: false,
            solver: SolverConfig::default(),
            metrics: MetricConfig::default(),
            halrtc: HalrtcConfig::default(),
            gtvm: GtvmConfig::default(),
            synth: SynthConfig::default(),
            overlap: OverlapConfig::default(),
            blogs: BlogsConfig::default(),
            complete: CompleteConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.kind.ok_or_else(|| config_err("experiment kind not set"))
    }

    pub fn repeats(&self) -> usize {
        match (self.repeats, self.full_scale, self.kind) {
            (Some(r), _, _) => r,
            (None, true, Some(ExperimentKind::Blogs)) => 30,
            (None, true, _) => 10,
            (None, false, _) => 3,
        }
    }

    /// Full-scale sizes: 200 x 200 synthetic tensors and 500 x 500 rasters.
    pub fn apply_full_scale(&mut self) {
        self.full_scale = true;
        self.synth.i1 = 200;
        self.synth.i2 = 200;
        if self.synth.ranks == SynthConfig::default().ranks {
            self.synth.ranks = vec![1, 10, 25, 50, 75, 100, 150, 200];
        }
        if self.synth.tile_ranks == SynthConfig::default().tile_ranks {
            self.synth.tile_ranks = vec![10, 100, 200];
        }
        self.overlap.height = 500;
        self.overlap.width = 500;
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        if self.k == 0 {
            return Err(config_err("k must be at least 1"));
        }
        if self.repeats() == 0 {
            return Err(config_err("repeats must be at least 1"));
        }
        if !(self.solver.rel_tol > 0.0) {
            return Err(config_err("solver.rel_tol must be positive"));
        }
        let s = &self.synth;
        let check_frac = |f: f64| -> Result<()> {
            graphprop_core::sample_observation_sets(0, f, s.lambda_count, 0)
                .map(|_| ())
                .map_err(|e| config_err(format!("missing fraction {f}: {e}")))
        };
        match kind {
            ExperimentKind::RankSweep => {
                if s.ranks.is_empty() {
                    return Err(config_err("synth.ranks is empty"));
                }
                check_frac(s.missing_frac)?;
                for &r in &s.ranks {
                    self.synth_spec(r, s.missing_frac, 0)
                        .validate()
                        .map_err(|e| config_err(e.to_string()))?;
                }
            }
            ExperimentKind::MissingSweep => {
                if s.missing_fracs.is_empty() || s.tile_ranks.is_empty() {
                    return Err(config_err("synth.missing_fracs and synth.tile_ranks must be nonempty"));
                }
                for &f in &s.missing_fracs {
                    check_frac(f)?;
                }
                for &r in &s.tile_ranks {
                    self.synth_spec(r, 0.0, 0)
                        .validate()
                        .map_err(|e| config_err(e.to_string()))?;
                }
            }
            ExperimentKind::BoundReport => {
                check_frac(s.missing_frac)?;
                self.synth_spec(s.bound_rank, s.missing_frac, 0)
                    .validate()
                    .map_err(|e| config_err(e.to_string()))?;
            }
            ExperimentKind::OverlapSim => {
                let o = &self.overlap;
                if o.area_fracs.is_empty() {
                    return Err(config_err("overlap.area_fracs is empty"));
                }
                if let Some(f) = o.area_fracs.iter().find(|f| !(0.0..=0.7).contains(*f)) {
                    return Err(config_err(format!("area fraction {f} outside [0, 0.7]")));
                }
                if o.raster_a.is_some() != o.raster_b.is_some() {
                    return Err(config_err(
                        "give both overlap.raster_a and overlap.raster_b, or neither",
                    ));
                }
                if o.raster_a.is_none() && (o.height == 0 || o.width == 0 || o.bands == 0) {
                    return Err(config_err("overlap raster extents must be positive"));
                }
            }
            ExperimentKind::Blogs => {
                let b = &self.blogs;
                if b.label_fracs.is_empty() {
                    return Err(config_err("blogs.label_fracs is empty"));
                }
                if let Some(f) = b.label_fracs.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
                    return Err(config_err(format!("label fraction {f} outside (0, 1]")));
                }
                if b.edges.is_some() != b.labels.is_some() {
                    return Err(config_err("give both blogs.edges and blogs.labels, or neither"));
                }
                if b.edges.is_none() && b.block_size < 2 {
                    return Err(config_err("blogs.block_size must be at least 2"));
                }
            }
            ExperimentKind::Complete => {
                let c = &self.complete;
                if c.tensors.is_empty() {
                    return Err(config_err("complete.tensors is empty"));
                }
                if c.masks.len() != c.tensors.len() {
                    return Err(config_err("complete.masks needs one mask per tensor"));
                }
                if !c.truths.is_empty() && c.truths.len() != c.tensors.len() {
                    return Err(config_err("complete.truths needs one truth per tensor"));
                }
            }
        }
        Ok(())
    }

    pub fn synth_spec(&self, r: usize, missing_frac: f64, seed: u64) -> graphprop_core::SynthSpec {
        let s = &self.synth;
        graphprop_core::SynthSpec {
            i1: s.i1,
            i2: s.i2,
            i3: s.i3,
            r,
            lambda_count: s.lambda_count,
            missing_frac,
            core_mean: s.core_mean,
            core_std: s.core_std,
            scale_mean: s.scale_mean,
            scale_std: s.scale_std,
            normalize: s.normalize,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_valid_once_kind_is_set() {
        let mut c = ExperimentConfig::from_toml("").unwrap();
        assert!(c.validate().is_err());
        c.kind = Some(ExperimentKind::RankSweep);
        c.validate().unwrap();
        assert_eq!(c.repeats(), 3);
    }

    #[test]
    fn rejects_bad_values() {
        let c = ExperimentConfig::from_toml("kind = \"rank-sweep\"\n[synth]\nranks = []\n").unwrap();
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
        let c = ExperimentConfig::from_toml("kind = \"missing-sweep\"\n[synth]\nmissing_fracs = [0.5]\n").unwrap();
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
        assert!(ExperimentConfig::from_toml("nonsense = 1\n").is_err());
        let c = ExperimentConfig::from_toml("kind = \"blogs\"\nk = 0\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn parses_nested_sections() {
        let c = ExperimentConfig::from_toml(
            "kind = \"overlap-sim\"\nseed = 9\n[solver]\nkind = \"cholesky\"\n[metrics]\npsnr = \"standard\"\nrmse = \"literal\"\n[overlap]\narea_fracs = [0.4]\n",
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.solver.kind, SolverKind::Cholesky);
        assert_eq!(c.metrics.psnr, PsnrVariant::Standard);
        assert_eq!(c.metrics.rmse, RmseForm::Literal);
    }
}
