//! The studies behind each subcommand. Every study expands into independent
//! tasks that run on a worker pool and are merged back in task order, so the
//! output does not depend on the worker count.

use std::path::Path;
use std::time::Instant;

use graphprop_core::baselines::GtvmOutcome;
use graphprop_core::datagen::{seeded_rng, smooth_raster_pair, two_block_graph};
use graphprop_core::propagation::{GraphPropOutput, SolverStats};
use graphprop_core::{
    bound_report, build_graph, classify_by_median, generate_acquisitions, graphprop, gtvm_inpaint, halrtc_complete,
    mae, mpsnr, mse, partial_overlap_masks, refold, rmse, sample_observation_sets, solve_steady_state,
    stack_acquisitions, unstack, Acquisition, CompletionResult, DenseTensor, ErrorField, FiberMatrix, ObservationSet,
    OverlapSpec, PsnrVariant, RmseForm,
};
use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::formats::{read_edge_list, read_flags, read_tensor};
use crate::results::{Coords, ResultRow, Status, TimingRow};

/// A file produced next to the result tables.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Tensor(String, DenseTensor),
    Json(String, Value),
}

impl Artifact {
    pub fn name(&self) -> &str {
        match self {
            Artifact::Tensor(n, _) | Artifact::Json(n, _) => n,
        }
    }
}

/// What a study produces before it is wrapped into a manifest.
#[derive(Debug, Clone, Default)]
pub struct StudyOutput {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
    /// Per-task details for the manifest.
    pub tasks: Vec<Value>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<Artifact>,
    /// Set when the study ran but a check on its results failed.
    pub failure: Option<String>,
}

impl StudyOutput {
    fn absorb(&mut self, other: StudyOutput) {
        self.rows.extend(other.rows);
        self.timings.extend(other.timings);
        self.tasks.extend(other.tasks);
        self.warnings.extend(other.warnings);
        self.artifacts.extend(other.artifacts);
        if self.failure.is_none() {
            self.failure = other.failure;
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of a task from the base seed and its position in the sweep.
pub fn task_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Runs `tasks` on a pool of `workers` threads (0 for all cores), keeping task order.
pub fn run_tasks<T, F>(workers: usize, tasks: &[T], f: F) -> Result<StudyOutput>
where
    T: Sync,
    F: Fn(&T) -> Result<StudyOutput> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let parts: Vec<Result<StudyOutput>> = pool.install(|| tasks.par_iter().map(&f).collect());
    let mut out = StudyOutput::default();
    for p in parts {
        out.absorb(p?);
    }
    Ok(out)
}

/// Identity of a task, shared by all its rows.
#[derive(Debug, Clone, Copy)]
struct RowBase<'a> {
    experiment: &'a str,
    seed: u64,
    repeat: usize,
    coords: Coords,
}

impl RowBase<'_> {
    fn row(&self, method: &str, metric: &str, variant: &str, value: f64, status: Status) -> ResultRow {
        ResultRow {
            experiment: self.experiment.to_string(),
            seed: self.seed,
            repeat: self.repeat,
            r: self.coords.r,
            missing_frac: self.coords.missing_frac,
            area_frac: self.coords.area_frac,
            label_frac: self.coords.label_frac,
            method: method.to_string(),
            metric: metric.to_string(),
            variant: variant.to_string(),
            value,
            status,
        }
    }

    fn timing(&self, method: &str, seconds: f64) -> TimingRow {
        TimingRow {
            experiment: self.experiment.to_string(),
            seed: self.seed,
            repeat: self.repeat,
            r: self.coords.r,
            missing_frac: self.coords.missing_frac,
            area_frac: self.coords.area_frac,
            label_frac: self.coords.label_frac,
            method: method.to_string(),
            seconds,
        }
    }
}

fn rmse_name(f: RmseForm) -> &'static str {
    match f {
        RmseForm::RootMean => "root-mean",
        RmseForm::Literal => "literal",
    }
}

fn psnr_name(v: PsnrVariant) -> &'static str {
    match v {
        PsnrVariant::PeakError => "peak-error",
        PsnrVariant::Standard => "standard",
    }
}

const METRICS: [&str; 4] = ["rmse", "mse", "mae", "mpsnr"];

/// RMSE, MSE, MAE and mPSNR rows for one method, or placeholder rows when
/// nothing was missing or the method failed.
fn metric_rows(base: &RowBase, method: &str, field: Option<&ErrorField>, cfg: &ExperimentConfig) -> Vec<ResultRow> {
    let m = &cfg.metrics;
    let variants = [rmse_name(m.rmse), "-", "-", psnr_name(m.psnr)];
    let Some(e) = field else {
        return METRICS
            .iter()
            .zip(variants)
            .map(|(metric, v)| base.row(method, metric, v, f64::NAN, Status::Failed))
            .collect();
    };
    if e.count() == 0 {
        return METRICS
            .iter()
            .zip(variants)
            .map(|(metric, v)| base.row(method, metric, v, f64::NAN, Status::NoMissingEntries))
            .collect();
    }
    let values = [
        rmse(e, m.rmse),
        mse(e),
        mae(e),
        mpsnr(e, m.psnr, m.psnr_peak).map(|p| p.value),
    ];
    METRICS
        .iter()
        .zip(variants)
        .zip(values)
        .map(|((metric, v), value)| match value {
            Ok(x) => base.row(method, metric, v, x, Status::Ok),
            Err(_) => base.row(method, metric, v, f64::NAN, Status::Failed),
        })
        .collect()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Observation mask of a stack of acquisitions whose fibers run along the last
/// mode of each acquisition, in the stacked tensor's flat layout.
pub fn stacked_fiber_mask(acq_shape: &[usize], observed: &[ObservationSet]) -> Vec<bool> {
    let lam = observed.len();
    let fibers: usize = acq_shape[..acq_shape.len() - 1].iter().product();
    let len = acq_shape.iter().product::<usize>() * lam;
    let masks: Vec<Vec<bool>> = observed.iter().map(ObservationSet::mask).collect();
    (0..len).map(|o| masks[o % lam][(o / lam) % fibers]).collect()
}

/// HaLRTC on the stacked acquisitions; returns each acquisition's fiber matrix
/// along the last mode.
fn halrtc_estimates(
    acqs: &[DenseTensor],
    observed: &[ObservationSet],
    cfg: &ExperimentConfig,
) -> graphprop_core::Result<(Vec<FiberMatrix>, Value)> {
    let stacked = stack_acquisitions(acqs)?;
    let mask = stacked_fiber_mask(acqs[0].shape(), observed);
    let out = halrtc_complete(&stacked, &mask, &cfg.halrtc.params())?;
    let mode = acqs[0].order() - 1;
    let est = unstack(&out.tensor)?
        .iter()
        .map(|t| t.matricize(mode))
        .collect::<graphprop_core::Result<Vec<_>>>()?;
    Ok((est, json!({"iterations": out.iterations, "converged": out.converged})))
}

fn gtvm_estimates(
    gp: &GraphPropOutput,
    acquisitions: &[Acquisition],
    cfg: &ExperimentConfig,
) -> graphprop_core::Result<(Vec<FiberMatrix>, Value)> {
    let outs: Vec<GtvmOutcome> = acquisitions
        .iter()
        .map(|a| gtvm_inpaint(&gp.graph, &a.observed, &a.features, &cfg.gtvm.options()))
        .collect::<graphprop_core::Result<_>>()?;
    let info: Vec<Value> = outs
        .iter()
        .map(|o| json!({"singular": o.singular, "converged": o.converged, "iterations": o.iterations}))
        .collect();
    Ok((outs.into_iter().map(|o| o.completed).collect(), Value::Array(info)))
}

fn stats_json(s: &SolverStats) -> Value {
    json!({"iterations": s.iterations, "residual_norm": s.residual_norm, "converged": s.converged})
}

fn graphprop_json(gp: &GraphPropOutput) -> Value {
    json!({
        "edges": gp.graph.edge_count(),
        "uncovered": gp.uncovered.len(),
        "excluded": gp.results.iter().map(|r| r.excluded_ids.len()).collect::<Vec<_>>(),
        "solver": gp.results.iter().map(|r| stats_json(&r.stats)).collect::<Vec<_>>(),
    })
}

/// Scores GraphProp and the baselines on one set of acquisitions.
struct Scored {
    rows: Vec<ResultRow>,
    timings: Vec<TimingRow>,
    details: Value,
    warnings: Vec<String>,
    estimates: Vec<(&'static str, Vec<FiberMatrix>)>,
}

fn score_methods(
    base: &RowBase,
    cfg: &ExperimentConfig,
    tensors: &[DenseTensor],
    observed: &[ObservationSet],
    excluded: &[usize],
    with_gtvm: bool,
) -> Result<Scored> {
    let mode = tensors[0].order() - 1;
    let fulls = tensors
        .iter()
        .map(|t| t.matricize(mode))
        .collect::<graphprop_core::Result<Vec<_>>>()?;
    let acquisitions = fulls
        .iter()
        .zip(observed)
        .map(|(f, o)| Acquisition::from_full(f, o.clone()))
        .collect::<graphprop_core::Result<Vec<_>>>()?;
    let mut s = Scored {
        rows: Vec::new(),
        timings: Vec::new(),
        details: json!({}),
        warnings: Vec::new(),
        estimates: Vec::new(),
    };
    let field = |est: &[FiberMatrix]| ErrorField::from_acquisitions(&fulls, est, observed, excluded);

    let (gp, secs) = timed(|| graphprop(&acquisitions, cfg.k, &cfg.solver.options()));
    s.timings.push(base.timing("graphprop", secs));
    let gp = match gp {
        Ok(gp) => gp,
        Err(e) => {
            s.warnings.push(format!("{base:?}: graphprop failed: {e}"));
            s.rows.extend(metric_rows(base, "graphprop", None, cfg));
            s.rows.extend(metric_rows(base, "halrtc", None, cfg));
            if with_gtvm {
                s.rows.extend(metric_rows(base, "gtvm", None, cfg));
            }
            return Ok(s);
        }
    };
    let est: Vec<FiberMatrix> = gp.results.iter().map(|r| r.completed.clone()).collect();
    s.rows.extend(metric_rows(base, "graphprop", Some(&field(&est)?), cfg));
    s.details["graphprop"] = graphprop_json(&gp);
    s.estimates.push(("graphprop", est));

    if with_gtvm {
        let (out, secs) = timed(|| gtvm_estimates(&gp, &acquisitions, cfg));
        s.timings.push(base.timing("gtvm", secs));
        match out {
            Ok((est, info)) => {
                s.rows.extend(metric_rows(base, "gtvm", Some(&field(&est)?), cfg));
                s.details["gtvm"] = info;
                s.estimates.push(("gtvm", est));
            }
            Err(e) => {
                s.warnings.push(format!("{base:?}: gtvm failed: {e}"));
                s.rows.extend(metric_rows(base, "gtvm", None, cfg));
            }
        }
    }

    let (out, secs) = timed(|| halrtc_estimates(tensors, observed, cfg));
    s.timings.push(base.timing("halrtc", secs));
    match out {
        Ok((est, info)) => {
            s.rows.extend(metric_rows(base, "halrtc", Some(&field(&est)?), cfg));
            s.details["halrtc"] = info;
            s.estimates.push(("halrtc", est));
        }
        Err(e) => {
            s.warnings.push(format!("{base:?}: halrtc failed: {e}"));
            s.rows.extend(metric_rows(base, "halrtc", None, cfg));
        }
    }
    Ok(s)
}

struct SynthTask {
    r_idx: usize,
    r: usize,
    frac_idx: usize,
    frac: f64,
    repeat: usize,
}

fn synthetic_study(cfg: &ExperimentConfig, kind: ExperimentKind, tasks: Vec<SynthTask>) -> Result<StudyOutput> {
    let name = kind.name();
    run_tasks(cfg.workers, &tasks, |t| {
        let data_seed = task_seed(cfg.seed, &[t.r_idx as u64, t.repeat as u64]);
        let mask_seed = task_seed(data_seed, &[t.frac_idx as u64]);
        let spec = cfg.synth_spec(t.r, t.frac, data_seed);
        let tensors = generate_acquisitions(&spec)?;
        let observed = sample_observation_sets(spec.fiber_count(), t.frac, spec.lambda_count, mask_seed)?;
        let base = RowBase {
            experiment: name,
            seed: data_seed,
            repeat: t.repeat,
            coords: Coords {
                r: Some(t.r),
                missing_frac: Some(t.frac),
                ..Coords::default()
            },
        };
        let s = score_methods(&base, cfg, &tensors, &observed, &[], false)?;
        info!("{name} r={} frac={} repeat={} done", t.r, t.frac, t.repeat);
        Ok(StudyOutput {
            rows: s.rows,
            timings: s.timings,
            tasks: vec![json!({
                "r": t.r, "missing_frac": t.frac, "repeat": t.repeat,
                "seed": data_seed, "mask_seed": mask_seed, "methods": s.details,
            })],
            warnings: s.warnings,
            ..StudyOutput::default()
        })
    })
}

pub fn rank_sweep(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let frac = cfg.synth.missing_frac;
    let mut tasks = Vec::new();
    for (r_idx, &r) in cfg.synth.ranks.iter().enumerate() {
        for repeat in 0..cfg.repeats() {
            tasks.push(SynthTask {
                r_idx,
                r,
                frac_idx: 0,
                frac,
                repeat,
            });
        }
    }
    synthetic_study(cfg, ExperimentKind::RankSweep, tasks)
}

pub fn missing_sweep(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let mut tasks = Vec::new();
    for (r_idx, &r) in cfg.synth.tile_ranks.iter().enumerate() {
        for (frac_idx, &frac) in cfg.synth.missing_fracs.iter().enumerate() {
            for repeat in 0..cfg.repeats() {
                tasks.push(SynthTask {
                    r_idx,
                    r,
                    frac_idx,
                    frac,
                    repeat,
                });
            }
        }
    }
    synthetic_study(cfg, ExperimentKind::MissingSweep, tasks)
}

fn load_raster_pair(cfg: &ExperimentConfig) -> Result<Option<(DenseTensor, DenseTensor)>> {
    let (Some(a), Some(b)) = (&cfg.overlap.raster_a, &cfg.overlap.raster_b) else {
        return Ok(None);
    };
    let (a, b) = (read_tensor(a)?, read_tensor(b)?);
    if a.order() != 3 || a.shape() != b.shape() {
        return Err(HarnessError::Data(format!(
            "rasters must share a height x width x bands shape, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(Some((a, b)))
}

fn tag(x: f64) -> String {
    format!("{:03}", (x * 100.0).round() as i64)
}

pub fn overlap_sim(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let name = ExperimentKind::OverlapSim.name();
    let given = load_raster_pair(cfg)?;
    let tasks: Vec<(usize, f64, usize)> = cfg
        .overlap
        .area_fracs
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| (0..cfg.repeats()).map(move |r| (i, a, r)))
        .collect();
    run_tasks(cfg.workers, &tasks, |&(_, area, repeat)| {
        let seed = task_seed(cfg.seed, &[repeat as u64]);
        let (a, b) = match &given {
            Some(pair) => pair.clone(),
            None => smooth_raster_pair(cfg.overlap.height, cfg.overlap.width, cfg.overlap.bands, seed)?,
        };
        let (h, w) = (a.shape()[0], a.shape()[1]);
        let masks = partial_overlap_masks(&OverlapSpec {
            height: h,
            width: w,
            area_removed_frac: area,
        })?;
        let observed = masks.observation_sets().to_vec();
        let base = RowBase {
            experiment: name,
            seed,
            repeat,
            coords: Coords {
                area_frac: Some(area),
                ..Coords::default()
            },
        };
        let tensors = [a, b];
        let s = score_methods(&base, cfg, &tensors, &observed, &masks.never_observed, true)?;
        let mut artifacts = Vec::new();
        if cfg.overlap.write_rasters && repeat == 0 {
            for (method, est) in &s.estimates {
                for (l, f) in est.iter().enumerate() {
                    artifacts.push(Artifact::Tensor(
                        format!("overlap_area{}_{method}_{l}.tensor", tag(area)),
                        refold(f, tensors[l].shape(), 2)?,
                    ));
                }
            }
        }
        info!("{name} area={area} repeat={repeat} done");
        Ok(StudyOutput {
            rows: s.rows,
            timings: s.timings,
            tasks: vec![json!({
                "area_frac": area, "repeat": repeat, "seed": seed,
                "crop": masks.crop, "achieved_area_frac": masks.achieved,
                "never_observed": masks.never_observed.len(), "methods": s.details,
            })],
            warnings: s.warnings,
            artifacts,
            failure: None,
        })
    })
}

fn blogs_graph(cfg: &ExperimentConfig, seed: u64) -> Result<(graphprop_core::EdgeSet, Vec<u8>)> {
    match (&cfg.blogs.edges, &cfg.blogs.labels) {
        (Some(e), Some(l)) => {
            let edges = read_edge_list(e)?;
            let labels = read_flags(l)?;
            if labels.len() != edges.n() {
                return Err(HarnessError::Data(format!(
                    "{} labels for {} nodes",
                    labels.len(),
                    edges.n()
                )));
            }
            Ok((edges, labels))
        }
        _ => Ok(two_block_graph(cfg.blogs.block_size, seed)?),
    }
}

/// Number of labelled nodes for a label fraction: rounded, at least one.
pub fn labelled_count(n: usize, frac: f64) -> usize {
    ((frac * n as f64).round() as usize).clamp(1, n)
}

pub fn blogs(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let name = ExperimentKind::Blogs.name();
    let synthetic = cfg.blogs.edges.is_none();
    let fixed = if synthetic { None } else { Some(blogs_graph(cfg, 0)?) };
    let tasks: Vec<(usize, f64, usize)> = cfg
        .blogs
        .label_fracs
        .iter()
        .enumerate()
        .flat_map(|(i, &f)| (0..cfg.repeats()).map(move |r| (i, f, r)))
        .collect();
    run_tasks(cfg.workers, &tasks, |&(frac_idx, frac, repeat)| {
        let graph_seed = task_seed(cfg.seed, &[repeat as u64]);
        let label_seed = task_seed(graph_seed, &[frac_idx as u64]);
        let (edges, labels) = match &fixed {
            Some(x) => x.clone(),
            None => blogs_graph(cfg, graph_seed)?,
        };
        let g = build_graph(&edges);
        let n = g.n();
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut seeded_rng(label_seed));
        ids.truncate(labelled_count(n, frac));
        let omega = ObservationSet::new(n, ids)?;
        let signal = FiberMatrix::new(n, 1, labels.iter().map(|&l| f64::from(l)).collect())?;
        let t_omega = signal.select_rows(omega.observed());
        let evaluated = omega.missing();
        let base = RowBase {
            experiment: name,
            seed: label_seed,
            repeat,
            coords: Coords {
                label_frac: Some(frac),
                ..Coords::default()
            },
        };
        let mut out = StudyOutput::default();
        let mut details = json!({"frac": frac, "repeat": repeat, "seed": label_seed, "labelled": omega.len()});

        let (gp, secs) = timed(|| solve_steady_state(&g, &omega, &t_omega, &cfg.solver.options()));
        out.timings.push(base.timing("graphprop", secs));
        let gp = gp?;
        details["graphprop"] = json!({"excluded": gp.excluded_ids.len(), "solver": stats_json(&gp.stats)});

        let (gt, secs) = timed(|| gtvm_inpaint(&g, &omega, &t_omega, &cfg.gtvm.options()));
        out.timings.push(base.timing("gtvm", secs));
        let gtvm_result = match gt {
            Ok(o) => {
                details["gtvm"] = json!({"singular": o.singular, "converged": o.converged});
                Some(CompletionResult {
                    completed: o.completed,
                    observed: omega.clone(),
                    filled_ids: evaluated.clone(),
                    excluded_ids: Vec::new(),
                    stats: SolverStats {
                        iterations: o.iterations,
                        residual_norm: f64::NAN,
                        converged: o.converged,
                    },
                })
            }
            Err(e) => {
                out.warnings
                    .push(format!("blogs frac={frac} repeat={repeat}: gtvm failed: {e}"));
                None
            }
        };
        for (method, result) in [("graphprop", Some(gp)), ("gtvm", gtvm_result)] {
            let row = match result {
                None => base.row(method, "accuracy", "-", f64::NAN, Status::Failed),
                Some(_) if evaluated.is_empty() => {
                    base.row(method, "accuracy", "-", f64::NAN, Status::NoMissingEntries)
                }
                Some(r) => {
                    let pred = classify_by_median(&r, 0)?;
                    let acc = graphprop_core::accuracy(&pred, &labels, &evaluated)?;
                    base.row(method, "accuracy", "-", acc, Status::Ok)
                }
            };
            out.rows.push(row);
        }
        out.tasks.push(details);
        Ok(out)
    })
}

fn read_mask(path: &Path, fibers: usize) -> Result<ObservationSet> {
    let flags = read_flags(path)?;
    if flags.len() != fibers {
        return Err(HarnessError::Data(format!(
            "{}: {} flags for {fibers} fibers",
            path.display(),
            flags.len()
        )));
    }
    let mask: Vec<bool> = flags.iter().map(|&f| f == 1).collect();
    Ok(ObservationSet::from_mask(&mask))
}

pub fn complete(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let c = &cfg.complete;
    let tensors = c.tensors.iter().map(|p| read_tensor(p)).collect::<Result<Vec<_>>>()?;
    let shape = tensors[0].shape().to_vec();
    if let Some(t) = tensors.iter().find(|t| t.shape() != shape.as_slice()) {
        return Err(HarnessError::Data(format!(
            "tensor shapes {:?} and {:?} differ",
            shape,
            t.shape()
        )));
    }
    let mode = c.mode.unwrap_or(shape.len() - 1);
    if mode >= shape.len() {
        return Err(HarnessError::Config(format!(
            "mode {mode} out of range for order-{}",
            shape.len()
        )));
    }
    let fulls = tensors
        .iter()
        .map(|t| t.matricize(mode))
        .collect::<graphprop_core::Result<Vec<_>>>()?;
    let fibers = fulls[0].rows();
    let observed = c
        .masks
        .iter()
        .map(|p| read_mask(p, fibers))
        .collect::<Result<Vec<_>>>()?;
    let acquisitions = fulls
        .iter()
        .zip(&observed)
        .map(|(f, o)| Acquisition::from_full(f, o.clone()))
        .collect::<graphprop_core::Result<Vec<_>>>()?;
    let ((gp, secs), base) = (
        timed(|| graphprop(&acquisitions, cfg.k, &cfg.solver.options())),
        RowBase {
            experiment: ExperimentKind::Complete.name(),
            seed: cfg.seed,
            repeat: 0,
            coords: Coords::default(),
        },
    );
    let gp = gp?;
    let mut out = StudyOutput::default();
    out.timings.push(base.timing("graphprop", secs));
    if !gp.uncovered.is_empty() {
        let msg = format!(
            "{} fiber(s) observed in no acquisition; they were excluded and given the observed mean",
            gp.uncovered.len()
        );
        warn!("{msg}");
        out.warnings.push(msg);
    }
    for (l, r) in gp.results.iter().enumerate() {
        out.artifacts.push(Artifact::Tensor(
            format!("completed_{l}.tensor"),
            refold(&r.completed, &shape, mode)?,
        ));
    }
    let mut details = graphprop_json(&gp);
    details["mode"] = json!(mode);
    details["uncovered_ids"] = json!(gp.uncovered);
    if !c.truths.is_empty() {
        let mut reports = Vec::new();
        let mut truths = Vec::new();
        for (l, p) in c.truths.iter().enumerate() {
            let t = read_tensor(p)?;
            if t.shape() != shape.as_slice() {
                return Err(HarnessError::Data(format!(
                    "{}: shape {:?}, expected {:?}",
                    p.display(),
                    t.shape(),
                    shape
                )));
            }
            let f0 = t.matricize(mode)?;
            let report = bound_report(&gp.graph, &observed[l], &f0, &gp.results[l].completed)?;
            reports.push(report_json(&report, json!({"acquisition": l})));
            truths.push(f0);
        }
        let est: Vec<FiberMatrix> = gp.results.iter().map(|r| r.completed.clone()).collect();
        let field = ErrorField::from_acquisitions(&truths, &est, &observed, &gp.uncovered)?;
        out.rows.extend(metric_rows(&base, "graphprop", Some(&field), cfg));
        out.artifacts
            .push(Artifact::Json("bound_report.json".into(), Value::Array(reports)));
    }
    out.tasks.push(details);
    Ok(out)
}

/// Flat JSON object of a bound report merged with identifying fields.
fn report_json(r: &graphprop_core::BoundReport, extra: Value) -> Value {
    let mut v = serde_json::to_value(r).expect("bound report serializes");
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    v
}

/// Slack allowed between a measured error and its bound.
pub fn bound_slack(bound: f64) -> f64 {
    1e-9 * (1.0 + bound.abs())
}

pub fn bound_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let name = ExperimentKind::BoundReport.name();
    let r = cfg.synth.bound_rank;
    let frac = cfg.synth.missing_frac;
    let tasks: Vec<usize> = (0..cfg.repeats()).collect();
    let mut out = run_tasks(cfg.workers, &tasks, |&repeat| {
        let seed = task_seed(cfg.seed, &[repeat as u64]);
        let spec = cfg.synth_spec(r, frac, seed);
        let tensors = generate_acquisitions(&spec)?;
        let observed = sample_observation_sets(spec.fiber_count(), frac, spec.lambda_count, task_seed(seed, &[0]))?;
        let fulls = tensors
            .iter()
            .map(|t| t.matricize(2))
            .collect::<graphprop_core::Result<Vec<_>>>()?;
        let acquisitions = fulls
            .iter()
            .zip(&observed)
            .map(|(f, o)| Acquisition::from_full(f, o.clone()))
            .collect::<graphprop_core::Result<Vec<_>>>()?;
        let gp = graphprop(&acquisitions, cfg.k, &cfg.solver.options())?;
        let base = RowBase {
            experiment: name,
            seed,
            repeat,
            coords: Coords {
                r: Some(r),
                missing_frac: Some(frac),
                ..Coords::default()
            },
        };
        let mut out = StudyOutput::default();
        for (l, res) in gp.results.iter().enumerate() {
            let report = bound_report(&gp.graph, &observed[l], &fulls[l], &res.completed)?;
            let variant = format!("acquisition-{l}");
            out.rows
                .push(base.row("graphprop", "psi", &variant, report.psi, Status::Ok));
            out.rows
                .push(base.row("graphprop", "phi", &variant, report.phi, Status::Ok));
            out.rows.push(base.row(
                "graphprop",
                "measured-error",
                &variant,
                report.measured_error,
                Status::Ok,
            ));
            if let Some(b) = report.bound.filter(|_| report.applicable) {
                out.rows.push(base.row("graphprop", "bound", &variant, b, Status::Ok));
            }
            if let Some(b) = report.bound {
                if report.violated(bound_slack(b)) {
                    out.failure = Some(format!(
                        "repeat {repeat} acquisition {l}: measured error {} exceeds bound {b}",
                        report.measured_error
                    ));
                }
            }
            out.tasks.push(report_json(
                &report,
                json!({"repeat": repeat, "acquisition": l, "seed": seed}),
            ));
        }
        Ok(out)
    })?;
    out.artifacts.push(Artifact::Json(
        "bound_report.json".into(),
        Value::Array(out.tasks.clone()),
    ));
    Ok(out)
}

pub fn run_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    match cfg.kind()? {
        ExperimentKind::RankSweep => rank_sweep(cfg),
        ExperimentKind::MissingSweep => missing_sweep(cfg),
        ExperimentKind::OverlapSim => overlap_sim(cfg),
        ExperimentKind::Blogs => blogs(cfg),
        ExperimentKind::Complete => complete(cfg),
        ExperimentKind::BoundReport => bound_study(cfg),
    }
}
