//! Resolved run configuration and the optional TOML settings file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mts_core::{BoundingBox, MtsConfig, TrackerKind};
use serde::{Deserialize, Serialize};

/// Everything a run depends on. Written verbatim into the manifest, so a
/// rerun needs nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub mts: MtsConfig,
    /// Worker threads; 1 runs everything on the calling thread.
    pub jobs: usize,
    /// Offset of the first generated suite sequence.
    pub seed: u64,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum Command {
    Track {
        sequences: PathBuf,
        init: Option<BoundingBox>,
        overlay: bool,
    },
    Baseline {
        sequences: PathBuf,
        init: Option<BoundingBox>,
        overlay: bool,
    },
    Synth {
        spec: Option<PathBuf>,
        suite: Option<Suite>,
        count: usize,
    },
    Eval {
        sequences: PathBuf,
        results: PathBuf,
        label: String,
    },
    Compare {
        sequences: PathBuf,
    },
    Calibrate {
        sequences: PathBuf,
        grid: Grid,
    },
}

impl Command {
    pub fn label(&self) -> &'static str {
        match self {
            Command::Track { .. } => "track",
            Command::Baseline { .. } => "baseline",
            Command::Synth { .. } => "synth",
            Command::Eval { .. } => "eval",
            Command::Compare { .. } => "compare",
            Command::Calibrate { .. } => "calibrate",
        }
    }

    /// Files and directories whose content determines the outcome.
    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Command::Track { sequences, .. } | Command::Baseline { sequences, .. } => vec![sequences.clone()],
            Command::Synth { spec, .. } => spec.iter().cloned().collect(),
            Command::Eval { sequences, results, .. } => vec![sequences.clone(), results.clone()],
            Command::Compare { sequences } | Command::Calibrate { sequences, .. } => vec![sequences.clone()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Targets fully hidden for 20 frames inside the first window.
    Occlusion,
}

/// Calibration grid; every combination is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub sigma1_scale: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub theta_cyc: Vec<f64>,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<[f64; 3]>> {
        for (name, axis) in [("sigma1_scale", &self.sigma1_scale), ("sigma2", &self.sigma2), ("theta_cyc", &self.theta_cyc)] {
            if axis.is_empty() {
                bail!("calibrate: empty grid axis {name}");
            }
        }
        let mut out = Vec::new();
        for &a in &self.sigma1_scale {
            for &b in &self.sigma2 {
                for &c in &self.theta_cyc {
                    out.push([a, b, c]);
                }
            }
        }
        Ok(out)
    }
}

/// Optional `--config` file. Command-line flags override its values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub mts: Option<MtsConfig>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("config: cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("config: {}", path.display()))
    }
}

/// Command-line overrides of the ensemble and scoring settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub tracker: Option<TrackerKind>,
    pub n: Option<usize>,
    pub tau: Option<usize>,
    pub sigma1: Option<f64>,
    pub sigma1_scale: Option<f64>,
    pub sigma2: Option<f64>,
    pub theta_cyc: Option<f64>,
}

impl Overrides {
    /// Starts from `base` (or the defaults of the chosen tracker) and
    /// applies every flag that was given.
    pub fn apply(&self, base: Option<MtsConfig>) -> Result<MtsConfig> {
        let mut config = match base {
            Some(mut c) => {
                if let Some(kind) = self.tracker {
                    c.tracker.kind = kind;
                }
                c
            }
            None => MtsConfig::new(self.tracker.unwrap_or(TrackerKind::Ncc)),
        };
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(tau) = self.tau {
            config.tau = Some(tau);
        }
        if let Some(s) = self.sigma1 {
            config.scoring.sigma1 = Some(s);
        }
        if let Some(s) = self.sigma1_scale {
            config.scoring.sigma1_scale = s;
        }
        if let Some(s) = self.sigma2 {
            config.scoring.sigma2 = s;
        }
        if let Some(t) = self.theta_cyc {
            config.scoring.theta_cyc = t;
        }
        config.validate()?;
        config.scoring.resolve(&BoundingBox { x: 0.0, y: 0.0, w: 1.0, h: 1.0 })?;
        Ok(config)
    }
}
