//! Execution of a resolved [`RunConfig`].

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mts_core::evaluation::{compare, emit_plots, evaluate_sequence, EvalReport, SequenceEval};
use mts_core::sequence::{load_result, save_otb, save_result};
use mts_core::synth::{generate_synth, occlusion_suite_spec};
use mts_core::{run_baseline, run_mts, BoundingBox, MtsConfig, Sequence, TrackingResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Command, Grid, RunConfig, Settings, Suite};
use crate::inputs::{load_sequences, load_spec};
use crate::manifest::Manifest;
use crate::overlay;

/// Bad invocation rather than a failure while running; reported with exit
/// code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// What a finished run produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Human-readable summary for standard output.
    pub summary: String,
}

/// Runs `config` on a pool of `config.jobs` threads and writes the manifest
/// once every other output exists.
pub fn execute(config: &RunConfig, invocation: Vec<String>) -> Result<Outcome> {
    if config.jobs == 0 {
        return Err(UsageError("cli: jobs must be at least 1".into()).into());
    }
    let manifest = Manifest::new(config, invocation)?;
    let out = config.output.as_path();
    fs::create_dir_all(out).with_context(|| format!("cli: cannot create {}", out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build()?;
    let mut outcome = pool.install(|| match &config.command {
        Command::Track { sequences, init, overlay } => track(sequences, *init, *overlay, Arm::Wrapped, &config.mts, out),
        Command::Baseline { sequences, init, overlay } => track(sequences, *init, *overlay, Arm::Base, &config.mts, out),
        Command::Synth { spec, suite, count } => synth(spec.as_deref(), *suite, *count, config.seed, out),
        Command::Eval { sequences, results, label } => eval(sequences, results, label, out),
        Command::Compare { sequences } => compare_arms(sequences, &config.mts, out),
        Command::Calibrate { sequences, grid } => calibrate(sequences, grid, &config.mts, out),
    })?;
    outcome.files.push(manifest.save(out)?);
    Ok(outcome)
}

/// Reruns the configuration recorded in a manifest into `output`.
pub fn rerun(manifest: &Path, output: Option<PathBuf>, invocation: Vec<String>) -> Result<Outcome> {
    let recorded = Manifest::load(manifest)?;
    recorded.verify_inputs()?;
    let mut config = recorded.config;
    config.output = output.unwrap_or_else(|| {
        let mut name = config.output.clone().into_os_string();
        name.push("-rerun");
        PathBuf::from(name)
    });
    execute(&config, invocation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Arm {
    Base,
    Wrapped,
}

fn arm_label(arm: Arm, config: &MtsConfig) -> String {
    let base = config.tracker.kind.to_string().to_uppercase();
    match arm {
        Arm::Base => base,
        Arm::Wrapped => format!("MTS+{base}"),
    }
}

fn run_arm(arm: Arm, seq: &Sequence, init: BoundingBox, config: &MtsConfig) -> Result<TrackingResult> {
    let result = match arm {
        Arm::Base => run_baseline(seq.frames(), init, &config.tracker),
        Arm::Wrapped => run_mts(seq.frames(), init, config),
    };
    result.with_context(|| format!("pipeline: sequence {}", seq.name))
}

fn truth_of(seq: &Sequence) -> Result<&[BoundingBox]> {
    seq.ground_truth()
        .ok_or_else(|| UsageError(format!("evaluation: sequence {} has no ground truth", seq.name)).into())
}

fn evaluate(seq: &Sequence, boxes: &[BoundingBox]) -> Result<SequenceEval> {
    Ok(evaluate_sequence(&seq.name, &seq.attributes, boxes, truth_of(seq)?)?)
}

fn write_diagnostics(path: &Path, result: &TrackingResult) -> Result<()> {
    let mut text = String::new();
    for w in &result.windows {
        text.push_str(&serde_json::to_string(w)?);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("pipeline: cannot write {}", path.display()))
}

fn track(sequences: &Path, init: Option<BoundingBox>, draw: bool, arm: Arm, config: &MtsConfig, out: &Path) -> Result<Outcome> {
    let seqs = load_sequences(sequences)?;
    if init.is_some() && seqs.len() > 1 {
        return Err(UsageError("cli: --init needs a single sequence".into()).into());
    }
    let inits = seqs
        .iter()
        .map(|s| match (init, s.ground_truth()) {
            (Some(b), _) => Ok(b),
            (None, Some(gt)) => Ok(gt[0]),
            (None, None) => Err(UsageError(format!("cli: sequence {} has no ground truth; pass --init x,y,w,h", s.name)).into()),
        })
        .collect::<Result<Vec<_>>>()?;
    let results = seqs
        .par_iter()
        .zip(&inits)
        .map(|(s, &b)| run_arm(arm, s, b, config))
        .collect::<Result<Vec<_>>>()?;

    let mut outcome = Outcome::default();
    for (seq, result) in seqs.iter().zip(&results) {
        let csv = out.join(format!("{}.csv", seq.name));
        save_result(&csv, result)?;
        outcome.files.push(csv);
        if arm == Arm::Wrapped {
            let diag = out.join(format!("{}.diagnostics.jsonl", seq.name));
            write_diagnostics(&diag, result)?;
            outcome.files.push(diag);
        }
        if draw {
            let dir = out.join(format!("{}_overlay", seq.name));
            overlay::write_all(&dir, seq.frames(), &result.boxes)?;
            outcome.files.push(dir);
        }
        let _ = write!(outcome.summary, "{}: {} frames", seq.name, result.boxes.len());
        if seq.ground_truth().is_some() && init.is_none() {
            let e = evaluate(seq, &result.boxes)?;
            let _ = write!(outcome.summary, ", PR {:.3}, SR {:.3}", e.pr, e.sr);
        }
        outcome.summary.push('\n');
    }
    Ok(outcome)
}

fn synth(spec: Option<&Path>, suite: Option<Suite>, count: usize, seed: u64, out: &Path) -> Result<Outcome> {
    let specs = match (spec, suite) {
        (Some(path), None) => vec![load_spec(path)?],
        (None, Some(Suite::Occlusion)) => (0..count).map(|i| occlusion_suite_spec(seed as usize + i)).collect(),
        _ => return Err(UsageError("synth: give exactly one of --spec or --suite".into()).into()),
    };
    if specs.is_empty() {
        return Err(UsageError("synth: --count must be at least 1".into()).into());
    }
    let generated = specs
        .par_iter()
        .map(|s| generate_synth(s).with_context(|| format!("synth: {}", s.name)))
        .collect::<Result<Vec<_>>>()?;
    let mut outcome = Outcome::default();
    for (spec, seq) in specs.iter().zip(&generated) {
        let dir = out.join(&seq.name);
        save_otb(seq, &dir)?;
        let spec_path = dir.join("spec.toml");
        fs::write(&spec_path, toml::to_string(spec)?).with_context(|| format!("synth: cannot write {}", spec_path.display()))?;
        let _ = writeln!(outcome.summary, "{}: {} frames of {}x{}", seq.name, seq.len(), spec.width, spec.height);
        outcome.files.push(dir);
    }
    Ok(outcome)
}

/// Per-sequence and per-factor PR/SR, one line each.
pub fn report_table(report: &EvalReport) -> String {
    let mut text = format!("{:<24} {:>7} {:>7}\n", report.tracker, "PR", "SR");
    for s in &report.sequences {
        let _ = writeln!(text, "{:<24} {:>7.3} {:>7.3}", s.name, s.pr, s.sr);
    }
    for (attr, summary) in &report.per_factor {
        let _ = writeln!(text, "{:<24} {:>7.3} {:>7.3}", format!("{}({})", attr, summary.sequences), summary.pr, summary.sr);
    }
    let _ = writeln!(text, "{:<24} {:>7.3} {:>7.3}", "Average", report.pr(), report.sr());
    text
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cli: cannot write {}", path.display()))?;
    Ok(path.to_path_buf())
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).with_context(|| format!("cli: cannot write {}", path.display()))?;
    Ok(path.to_path_buf())
}

fn eval(sequences: &Path, results: &Path, label: &str, out: &Path) -> Result<Outcome> {
    let seqs = load_sequences(sequences)?;
    let evals = seqs
        .iter()
        .map(|seq| {
            let path = results.join(format!("{}.csv", seq.name));
            let result = load_result(&path)?;
            evaluate(seq, &result.boxes)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = EvalReport::aggregate(label, evals)?;
    let table = report_table(&report);
    let mut files = vec![write_json(&out.join("report.json"), &report)?, write_text(&out.join("report.txt"), &table)?];
    files.extend(emit_plots(std::slice::from_ref(&report), &out.join("plots"))?);
    Ok(Outcome { files, summary: table })
}

fn compare_arms(sequences: &Path, config: &MtsConfig, out: &Path) -> Result<Outcome> {
    let seqs = load_sequences(sequences)?;
    let mut files = Vec::new();
    let mut reports = Vec::new();
    for arm in [Arm::Base, Arm::Wrapped] {
        let label = arm_label(arm, config);
        let results = seqs
            .par_iter()
            .map(|s| run_arm(arm, s, truth_of(s)?[0], config))
            .collect::<Result<Vec<_>>>()?;
        let dir = out.join(&label);
        fs::create_dir_all(&dir).with_context(|| format!("cli: cannot create {}", dir.display()))?;
        let mut evals = Vec::new();
        for (seq, result) in seqs.iter().zip(&results) {
            let csv = dir.join(format!("{}.csv", seq.name));
            save_result(&csv, result)?;
            files.push(csv);
            evals.push(evaluate(seq, &result.boxes)?);
        }
        let report = EvalReport::aggregate(label, evals)?;
        files.push(write_json(&dir.join("report.json"), &report)?);
        files.push(write_text(&dir.join("report.txt"), &report_table(&report))?);
        reports.push(report);
    }
    let record = compare(&reports[1], &reports[0])?;
    let table = record.to_table();
    files.push(write_json(&out.join("comparison.json"), &record)?);
    files.push(write_text(&out.join("comparison.txt"), &table)?);
    files.extend(emit_plots(&reports, &out.join("plots"))?);
    Ok(Outcome { files, summary: table })
}

/// Mean scores of one grid point over the calibration set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub sigma1_scale: f64,
    pub sigma2: f64,
    pub theta_cyc: f64,
    pub pr: f64,
    pub sr: f64,
}

/// Evaluates every grid point; returns the rows in grid order and the index
/// of the best mean SR (first on ties).
pub fn calibration_rows(seqs: &[Sequence], grid: &Grid, base: &MtsConfig) -> Result<(Vec<CalibrationRow>, usize)> {
    let points = grid.points()?;
    let mut rows = Vec::with_capacity(points.len());
    for [sigma1_scale, sigma2, theta_cyc] in points {
        let mut config = base.clone();
        config.scoring.sigma1 = None;
        config.scoring.sigma1_scale = sigma1_scale;
        config.scoring.sigma2 = sigma2;
        config.scoring.theta_cyc = theta_cyc;
        let evals = seqs
            .par_iter()
            .map(|s| {
                let truth = truth_of(s)?;
                let result = run_arm(Arm::Wrapped, s, truth[0], &config)?;
                evaluate(s, &result.boxes)
            })
            .collect::<Result<Vec<_>>>()
            .with_context(|| format!("calibrate: sigma1_scale {sigma1_scale}, sigma2 {sigma2}, theta_cyc {theta_cyc}"))?;
        let report = EvalReport::aggregate("calibration", evals)?;
        rows.push(CalibrationRow { sigma1_scale, sigma2, theta_cyc, pr: report.pr(), sr: report.sr() });
    }
    let best = (0..rows.len()).fold(0, |best, i| if rows[i].sr > rows[best].sr { i } else { best });
    Ok((rows, best))
}

fn calibrate(sequences: &Path, grid: &Grid, base: &MtsConfig, out: &Path) -> Result<Outcome> {
    grid.points()?;
    let seqs = load_sequences(sequences)?;
    if seqs.is_empty() {
        bail!("calibrate: no sequences");
    }
    let (rows, best) = calibration_rows(&seqs, grid, base)?;
    let mut csv = String::from("sigma1_scale,sigma2,theta_cyc,pr,sr\n");
    let mut summary = format!("{:>12} {:>8} {:>9} {:>7} {:>7}\n", "sigma1_scale", "sigma2", "theta_cyc", "PR", "SR");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{},{},{}", r.sigma1_scale, r.sigma2, r.theta_cyc, r.pr, r.sr);
        let mark = if i == best { " *" } else { "" };
        let _ = writeln!(summary, "{:>12} {:>8} {:>9} {:>7.3} {:>7.3}{mark}", r.sigma1_scale, r.sigma2, r.theta_cyc, r.pr, r.sr);
    }
    let mut suggested = base.clone();
    suggested.scoring.sigma1 = None;
    suggested.scoring.sigma1_scale = rows[best].sigma1_scale;
    suggested.scoring.sigma2 = rows[best].sigma2;
    suggested.scoring.theta_cyc = rows[best].theta_cyc;
    let settings = Settings { mts: Some(suggested), ..Default::default() };
    let files = vec![
        write_text(&out.join("calibration.csv"), &csv)?,
        write_text(&out.join("suggested.toml"), &toml::to_string(&settings)?)?,
    ];
    Ok(Outcome { files, summary })
}
