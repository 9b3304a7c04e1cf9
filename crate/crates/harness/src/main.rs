use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphprop_harness::formats::convert_raster;
use graphprop_harness::{run_experiment, write_outputs, ExperimentConfig, ExperimentKind, HarnessError};
use log::{error, info, warn};

/// Graph-propagation tensor completion experiments.
#[derive(Parser)]
#[command(name = "graphprop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Full-scale sizes and repeat counts.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruction error against Tucker rank.
    RankSweep(Common),
    /// Reconstruction error against missing fraction, one tile per rank.
    MissingSweep(Common),
    /// Two rasters with partially overlapping footprints.
    OverlapSim(Common),
    /// Binary label propagation on a graph.
    Blogs(Common),
    /// Complete tensors given per-acquisition fiber masks.
    Complete(Common),
    /// Bound quantities against measured error.
    BoundReport(Common),
    /// Convert a raw raster with a JSON sidecar to the tensor format.
    ConvertRaster {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sidecar: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn configure(kind: ExperimentKind, c: Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(k) = cfg.kind.filter(|&k| k != kind) {
        warn!("config kind {} overridden by subcommand {}", k.name(), kind.name());
    }
    cfg.kind = Some(kind);
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = c.out_dir {
        cfg.out_dir = d;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if c.full_scale || cfg.full_scale {
        cfg.apply_full_scale();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let (kind, common) = match cli.command {
        Command::ConvertRaster { input, sidecar, output } => {
            let t = convert_raster(&input, &sidecar, &output)?;
            info!("wrote {} with shape {:?}", output.display(), t.shape());
            return Ok(());
        }
        Command::RankSweep(c) => (ExperimentKind::RankSweep, c),
        Command::MissingSweep(c) => (ExperimentKind::MissingSweep, c),
        Command::OverlapSim(c) => (ExperimentKind::OverlapSim, c),
        Command::Blogs(c) => (ExperimentKind::Blogs, c),
        Command::Complete(c) => (ExperimentKind::Complete, c),
        Command::BoundReport(c) => (ExperimentKind::BoundReport, c),
    };
    let cfg = configure(kind, common)?;
    let out = run_experiment(&cfg)?;
    for p in write_outputs(&out, &cfg.out_dir)? {
        info!("wrote {}", p.display());
    }
    match out.failure {
        Some(msg) => Err(HarnessError::Data(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
