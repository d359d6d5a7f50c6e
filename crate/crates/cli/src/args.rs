//! Command-line surface.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mts_core::sequence::parse_box_line;
use mts_core::{BoundingBox, TrackerKind};

use crate::commands::UsageError;
use crate::config::{Command, Grid, Overrides, RunConfig, Settings, Suite};

/// Default output root when `--out` is not given.
pub const OUTPUT_ROOT_ENV: &str = "MTS_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "mts", version, about = "Update-pacing tracker ensembles with forward-backward trajectory selection")]
pub struct Cli {
    /// TOML settings file (`jobs`, `seed`, `[mts]`); flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to `$MTS_OUTPUT_ROOT/<command>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run the ensemble wrapper on a sequence or a set of sequences.
    Track(TrackArgs),
    /// Run the plain base tracker, learning on every frame.
    Baseline(TrackArgs),
    /// Write synthetic sequences in OTB layout.
    Synth(SynthArgs),
    /// Score saved results against ground truth.
    Eval(EvalArgs),
    /// Run base and wrapped trackers on a set and tabulate PR/SR changes.
    Compare(CompareArgs),
    /// Grid-search the scoring bandwidths and cyclicity threshold.
    Calibrate(CalibrateArgs),
    /// Repeat a recorded run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct MtsArgs {
    /// Base tracker: ncc or dcf.
    #[arg(long)]
    pub tracker: Option<TrackerKind>,
    /// Ensemble size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Frames between consecutive stop points.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Geometric bandwidth in pixels; overrides --sigma1-scale.
    #[arg(long)]
    pub sigma1: Option<f64>,
    /// Geometric bandwidth relative to the initial box size.
    #[arg(long)]
    pub sigma1_scale: Option<f64>,
    /// Appearance bandwidth in intensity units.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Anchor IoU at or above which a trajectory pair counts as cyclic.
    #[arg(long)]
    pub theta_cyc: Option<f64>,
}

impl MtsArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            tracker: self.tracker,
            n: self.n,
            tau: self.tau,
            sigma1: self.sigma1,
            sigma1_scale: self.sigma1_scale,
            sigma2: self.sigma2,
            theta_cyc: self.theta_cyc,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// OTB sequence directory, directory of sequences, or synthetic spec (.toml).
    #[arg(long)]
    pub seq: PathBuf,
    /// Initial box `x,y,w,h`; required when the sequence has no ground truth.
    #[arg(long, value_parser = parse_box)]
    pub init: Option<BoundingBox>,
    /// Also write frames with the predicted box drawn in.
    #[arg(long)]
    pub overlay: bool,
    #[command(flatten)]
    pub mts: MtsArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synthetic sequence spec (TOML).
    #[arg(long, conflicts_with = "suite")]
    pub spec: Option<PathBuf>,
    /// Built-in suite to generate instead of a spec.
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Number of suite sequences.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Index of the first suite sequence.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub seq: PathBuf,
    /// Directory holding `<sequence>.csv` result files.
    #[arg(long)]
    pub results: PathBuf,
    /// Tracker name used in reports and plot legends.
    #[arg(long, default_value = "tracker")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub seq: PathBuf,
    #[command(flatten)]
    pub mts: MtsArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub seq: PathBuf,
    /// Comma-separated grid values; the current setting when omitted.
    #[arg(long, value_delimiter = ',')]
    pub grid_sigma1_scale: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub grid_sigma2: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub grid_theta_cyc: Vec<f64>,
    #[command(flatten)]
    pub mts: MtsArgs,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

fn parse_box(s: &str) -> Result<BoundingBox, String> {
    parse_box_line(s)
}

fn default_output(command: &str) -> PathBuf {
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("mts-runs"));
    root.join(command)
}

impl Cli {
    /// Merges flags, settings file and defaults into one configuration.
    /// `rerun` has no configuration of its own and yields `None`.
    pub fn resolve(&self) -> Result<Option<RunConfig>> {
        let settings = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let mts_args = match &self.command {
            Cmd::Track(a) | Cmd::Baseline(a) => a.mts.clone(),
            Cmd::Compare(a) => a.mts.clone(),
            Cmd::Calibrate(a) => a.mts.clone(),
            Cmd::Synth(_) | Cmd::Eval(_) => MtsArgs::default(),
            Cmd::Rerun(_) => return Ok(None),
        };
        let mts = mts_args.overrides().apply(settings.mts.clone())?;
        let mut seed = settings.seed.unwrap_or(0);
        let command = match &self.command {
            Cmd::Track(a) => Command::Track { sequences: a.seq.clone(), init: a.init, overlay: a.overlay },
            Cmd::Baseline(a) => Command::Baseline { sequences: a.seq.clone(), init: a.init, overlay: a.overlay },
            Cmd::Synth(a) => {
                if a.spec.is_none() == a.suite.is_none() {
                    return Err(UsageError("synth: give exactly one of --spec or --suite".into()).into());
                }
                seed = a.seed.unwrap_or(seed);
                Command::Synth { spec: a.spec.clone(), suite: a.suite, count: a.count }
            }
            Cmd::Eval(a) => Command::Eval { sequences: a.seq.clone(), results: a.results.clone(), label: a.label.clone() },
            Cmd::Compare(a) => Command::Compare { sequences: a.seq.clone() },
            Cmd::Calibrate(a) => {
                let or_current = |v: &Vec<f64>, current: f64| if v.is_empty() { vec![current] } else { v.clone() };
                Command::Calibrate {
                    sequences: a.seq.clone(),
                    grid: Grid {
                        sigma1_scale: or_current(&a.grid_sigma1_scale, mts.scoring.sigma1_scale),
                        sigma2: or_current(&a.grid_sigma2, mts.scoring.sigma2),
                        theta_cyc: or_current(&a.grid_theta_cyc, mts.scoring.theta_cyc),
                    },
                }
            }
            Cmd::Rerun(_) => unreachable!("handled above"),
        };
        let output = self.out.clone().unwrap_or_else(|| default_output(command.label()));
        Ok(Some(RunConfig {
            command,
            mts,
            jobs: self.jobs.or(settings.jobs).unwrap_or(1),
            seed,
            output,
        }))
    }
}
