//! One-pass evaluation: precision and success curves, their summary scores,
//! per-factor breakdowns and baseline-vs-wrapper comparison tables.
//!
//! Frame 1 is the given initialization and never scored. Precision at `θ`
//! is the fraction of frames whose center error is at most `θ` pixels
//! (θ = 0..=50); success at `θ` is the fraction whose IoU is strictly above
//! `θ` (θ = 0, 0.05, ..., 1). The summary scores are precision at 20 px
//! and the mean of the 21 success samples.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::pipeline::TrackingResult;
use crate::sequence::Attribute;

pub const MAX_PRECISION_THRESHOLD: usize = 50;
pub const PRECISION_SCORE_THRESHOLD: usize = 20;
pub const SUCCESS_STEPS: usize = 20;

pub fn precision_thresholds() -> Vec<f64> {
    (0..=MAX_PRECISION_THRESHOLD).map(|t| t as f64).collect()
}

pub fn success_thresholds() -> Vec<f64> {
    (0..=SUCCESS_STEPS).map(|k| k as f64 / SUCCESS_STEPS as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEval {
    pub name: String,
    pub attributes: Vec<Attribute>,
    /// Per scored frame (frames 2..=T).
    pub center_errors: Vec<f64>,
    pub ious: Vec<f64>,
    pub precision: Vec<f64>,
    pub success: Vec<f64>,
    pub pr: f64,
    pub sr: f64,
}

/// Scores one tracking result against its ground truth.
pub fn evaluate_ope(result: &TrackingResult, truth: &[BoundingBox]) -> Result<SequenceEval> {
    evaluate_sequence("", &[], &result.boxes, truth)
}

pub fn evaluate_sequence(name: &str, attributes: &[Attribute], predicted: &[BoundingBox], truth: &[BoundingBox]) -> Result<SequenceEval> {
    if predicted.len() != truth.len() {
        return Err(Error::Evaluation(format!(
            "{name}: {} predictions for {} ground-truth boxes",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.len() < 2 {
        return Err(Error::Evaluation(format!("{name}: nothing to score beyond the initial frame")));
    }
    let pairs = predicted.iter().zip(truth).skip(1);
    let center_errors: Vec<f64> = pairs.clone().map(|(p, t)| p.center_distance(t)).collect();
    let ious: Vec<f64> = pairs.map(|(p, t)| iou(p, t)).collect();
    let m = center_errors.len() as f64;
    let precision: Vec<f64> = precision_thresholds()
        .iter()
        .map(|&th| center_errors.iter().filter(|&&e| e <= th).count() as f64 / m)
        .collect();
    let success: Vec<f64> = success_thresholds()
        .iter()
        .map(|&th| ious.iter().filter(|&&o| o > th).count() as f64 / m)
        .collect();
    let pr = precision[PRECISION_SCORE_THRESHOLD];
    let sr = mean(&success);
    Ok(SequenceEval {
        name: name.to_string(),
        attributes: attributes.to_vec(),
        center_errors,
        ious,
        precision,
        success,
        pr,
        sr,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_curve<'a>(curves: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let curves: Vec<&[f64]> = curves.collect();
    let len = curves.first().map_or(0, |c| c.len());
    (0..len).map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64).collect()
}

/// Curves averaged over a group of sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sequences: usize,
    pub precision: Vec<f64>,
    pub success: Vec<f64>,
    pub pr: f64,
    pub sr: f64,
}

impl Summary {
    fn of(evals: &[&SequenceEval]) -> Self {
        let precision = mean_curve(evals.iter().map(|e| e.precision.as_slice()));
        let success = mean_curve(evals.iter().map(|e| e.success.as_slice()));
        Self {
            sequences: evals.len(),
            pr: precision[PRECISION_SCORE_THRESHOLD],
            sr: mean(&success),
            precision,
            success,
        }
    }
}

/// Evaluation of one tracker over a set of sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tracker: String,
    pub sequences: Vec<SequenceEval>,
    pub overall: Summary,
    pub per_factor: BTreeMap<Attribute, Summary>,
}

impl EvalReport {
    /// Averages per-sequence curves with equal weight per sequence.
    pub fn aggregate(tracker: impl Into<String>, sequences: Vec<SequenceEval>) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::Evaluation("no sequences to aggregate".into()));
        }
        let all: Vec<&SequenceEval> = sequences.iter().collect();
        let overall = Summary::of(&all);
        let mut per_factor = BTreeMap::new();
        for attr in Attribute::ALL {
            let group: Vec<&SequenceEval> = sequences.iter().filter(|s| s.attributes.contains(&attr)).collect();
            if !group.is_empty() {
                per_factor.insert(attr, Summary::of(&group));
            }
        }
        Ok(Self {
            tracker: tracker.into(),
            sequences,
            overall,
            per_factor,
        })
    }

    pub fn pr(&self) -> f64 {
        self.overall.pr
    }

    pub fn sr(&self) -> f64 {
        self.overall.sr
    }
}

/// Relative change in percent, undefined when the reference is zero.
pub fn percent_change(old: f64, new: f64) -> Option<f64> {
    (old != 0.0).then(|| (new - old) / old * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Factor code, or `Average` for the overall row.
    pub label: String,
    pub sequences: usize,
    pub base_pr: f64,
    pub base_sr: f64,
    pub wrapped_pr: f64,
    pub wrapped_sr: f64,
    pub pr_change: Option<f64>,
    pub sr_change: Option<f64>,
}

impl ComparisonRow {
    fn new(label: String, base: &Summary, wrapped: &Summary) -> Self {
        Self {
            label,
            sequences: base.sequences,
            base_pr: base.pr,
            base_sr: base.sr,
            wrapped_pr: wrapped.pr,
            wrapped_sr: wrapped.sr,
            pr_change: percent_change(base.pr, wrapped.pr),
            sr_change: percent_change(base.sr, wrapped.sr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub base: String,
    pub wrapped: String,
    pub rows: Vec<ComparisonRow>,
}

fn fmt_pct(p: Option<f64>) -> String {
    p.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}%"))
}

impl ComparisonRecord {
    pub fn average(&self) -> &ComparisonRow {
        self.rows.last().expect("comparison always has an average row")
    }

    pub fn row(&self, label: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// PR/SR pairs per factor with relative changes, one row per line.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>13} {:>13} {:>17}", "factor", self.base, self.wrapped, "change");
        for r in &self.rows {
            let label = if r.label == "Average" {
                r.label.clone()
            } else {
                format!("{}({})", r.label, r.sequences)
            };
            let _ = writeln!(
                out,
                "{:<10} {:>13} {:>13} {:>17}",
                label,
                format!("{:.3}/{:.3}", r.base_pr, r.base_sr),
                format!("{:.3}/{:.3}", r.wrapped_pr, r.wrapped_sr),
                format!("{}/{}", fmt_pct(r.pr_change), fmt_pct(r.sr_change)),
            );
        }
        out
    }
}

/// Lines up two evaluations of the same sequence set.
pub fn compare(wrapped: &EvalReport, base: &EvalReport) -> Result<ComparisonRecord> {
    let names = |r: &EvalReport| {
        let mut n: Vec<String> = r.sequences.iter().map(|s| s.name.clone()).collect();
        n.sort();
        n
    };
    if names(wrapped) != names(base) {
        return Err(Error::Evaluation("compared reports cover different sequence sets".into()));
    }
    let mut rows: Vec<ComparisonRow> = base
        .per_factor
        .iter()
        .map(|(attr, b)| ComparisonRow::new(attr.code().to_string(), b, &wrapped.per_factor[attr]))
        .collect();
    rows.push(ComparisonRow::new("Average".into(), &base.overall, &wrapped.overall));
    Ok(ComparisonRecord {
        base: base.tracker.clone(),
        wrapped: wrapped.tracker.clone(),
        rows,
    })
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn svg_plot(title: &str, x_label: &str, xs: &[f64], curves: &[(String, &[f64])]) -> String {
    let (w, h) = (480.0, 360.0);
    let (left, right, top, bottom) = (56.0, 16.0, 32.0, 48.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let x_max = xs.last().copied().unwrap_or(1.0);
    let px = |x: f64| left + x / x_max * pw;
    let py = |y: f64| top + (1.0 - y) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle" font-family="sans-serif">{title}</text>"#, w / 2.0);
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=5 {
        let y = k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end" font-family="sans-serif">{y:.1}</text>"#, left - 4.0, py(y) + 3.0);
        let x = x_max * k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="middle" font-family="sans-serif">{}</text>"#, px(x), top + ph + 14.0, format_tick(x));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle" font-family="sans-serif">{x_label}</text>"#, left + pw / 2.0, h - 10.0);
    for (i, (label, ys)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = xs.iter().zip(ys.iter()).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, points.join(" "));
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, left + pw - 150.0, left + pw - 130.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" font-family="sans-serif">{}</text>"#, left + pw - 126.0, ly + 4.0, xml_escape(label));
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.1}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Legend order: highest score first, ties by name.
fn ranked(reports: &[EvalReport], score: impl Fn(&EvalReport) -> f64) -> Vec<&EvalReport> {
    let mut v: Vec<&EvalReport> = reports.iter().collect();
    v.sort_by(|a, b| score(b).total_cmp(&score(a)).then_with(|| a.tracker.cmp(&b.tracker)));
    v
}

pub fn precision_legend(reports: &[EvalReport]) -> Vec<String> {
    ranked(reports, EvalReport::pr)
        .iter()
        .map(|r| format!("{} [{:.3}]", r.tracker, r.pr()))
        .collect()
}

pub fn success_legend(reports: &[EvalReport]) -> Vec<String> {
    ranked(reports, EvalReport::sr)
        .iter()
        .map(|r| format!("{} [{:.3}]", r.tracker, r.sr()))
        .collect()
}

pub fn write_curve_csv(path: &Path, thresholds: &[f64], values: &[f64]) -> Result<()> {
    let mut text = String::from("threshold,value\n");
    for (t, v) in thresholds.iter().zip(values) {
        let _ = writeln!(text, "{},{}", crate::sequence::format_sig6(*t), crate::sequence::format_sig6(*v));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let parse_err = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            };
            let (a, b) = l.split_once(',').ok_or_else(|| parse_err("expected threshold,value".into()))?;
            let a = a.trim().parse().map_err(|_| parse_err(format!("bad threshold '{a}'")))?;
            let b = b.trim().parse().map_err(|_| parse_err(format!("bad value '{b}'")))?;
            Ok((a, b))
        })
        .collect()
}

/// Writes `precision.svg`, `success.svg` and per-tracker curve CSVs into
/// `dir`, returning every path written.
pub fn emit_plots(reports: &[EvalReport], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let pt = precision_thresholds();
    let st = success_thresholds();

    let by_pr = ranked(reports, EvalReport::pr);
    let curves: Vec<(String, &[f64])> = by_pr
        .iter()
        .zip(precision_legend(reports))
        .map(|(r, label)| (label, r.overall.precision.as_slice()))
        .collect();
    let path = dir.join("precision.svg");
    fs::write(&path, svg_plot("Precision plots of OPE", "Location error threshold (px)", &pt, &curves)).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let by_sr = ranked(reports, EvalReport::sr);
    let curves: Vec<(String, &[f64])> = by_sr
        .iter()
        .zip(success_legend(reports))
        .map(|(r, label)| (label, r.overall.success.as_slice()))
        .collect();
    let path = dir.join("success.svg");
    fs::write(&path, svg_plot("Success plots of OPE", "Overlap threshold", &st, &curves)).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    for r in reports {
        let stem = file_stem(&r.tracker);
        let p = dir.join(format!("{stem}_precision.csv"));
        write_curve_csv(&p, &pt, &r.overall.precision)?;
        written.push(p);
        let s = dir.join(format!("{stem}_success.csv"));
        write_curve_csv(&s, &st, &r.overall.success)?;
        written.push(s);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x: f64, y: f64) -> BoundingBox {
        BoundingBox::new(x, y, 20.0, 20.0).unwrap()
    }

    fn result(boxes: Vec<BoundingBox>) -> TrackingResult {
        TrackingResult { boxes, windows: vec![] }
    }

    #[test]
    fn perfect_prediction() {
        let truth: Vec<BoundingBox> = (0..10).map(|k| bb(k as f64, 2.0 * k as f64)).collect();
        let e = evaluate_ope(&result(truth.clone()), &truth).unwrap();
        assert_eq!(e.pr, 1.0);
        assert!((e.sr - 20.0 / 21.0).abs() < 1e-15);
        assert_eq!(*e.success.last().unwrap(), 0.0);
        assert_eq!(e.center_errors.len(), 9);
    }

    #[test]
    fn far_off_prediction() {
        let truth: Vec<BoundingBox> = (0..10).map(|_| bb(0.0, 0.0)).collect();
        let mut pred: Vec<BoundingBox> = (0..10).map(|_| bb(200.0, 0.0)).collect();
        pred[0] = truth[0];
        let e = evaluate_ope(&result(pred), &truth).unwrap();
        assert_eq!(e.pr, 0.0);
        assert_eq!(e.sr, 0.0);
    }

    #[test]
    fn frame_one_is_not_scored() {
        let truth = vec![bb(0.0, 0.0), bb(0.0, 0.0)];
        let pred = vec![bb(300.0, 0.0), bb(0.0, 0.0)];
        assert_eq!(evaluate_ope(&result(pred), &truth).unwrap().pr, 1.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(evaluate_ope(&result(vec![bb(0.0, 0.0); 3]), &[bb(0.0, 0.0); 4]).is_err());
    }

    #[test]
    fn percent_change_matches_published_arithmetic() {
        let pr = percent_change(0.656, 0.727).unwrap();
        assert_eq!(format!("{pr:.2}"), "10.82");
        let sr = percent_change(0.474, 0.505).unwrap();
        assert_eq!(format!("{sr:.2}"), "6.54");
        assert_eq!(percent_change(0.0, 0.5), None);
    }

    #[test]
    fn identical_reports_compare_to_zero() {
        let truth: Vec<BoundingBox> = (0..6).map(|k| bb(k as f64, 0.0)).collect();
        let mut pred = truth.clone();
        pred[3] = bb(10.0, 0.0);
        let e = evaluate_sequence("a", &[Attribute::Occ], &pred, &truth).unwrap();
        let r = EvalReport::aggregate("base", vec![e]).unwrap();
        let c = compare(&r, &r).unwrap();
        assert_eq!(c.rows.len(), 2);
        assert!(c.rows.iter().all(|row| row.pr_change == Some(0.0) && row.sr_change == Some(0.0)));
        assert!(c.to_table().contains("OCC(1)"));
    }

    #[test]
    fn mismatched_sets_rejected() {
        let truth = vec![bb(0.0, 0.0); 3];
        let a = EvalReport::aggregate("x", vec![evaluate_sequence("a", &[], &truth, &truth).unwrap()]).unwrap();
        let b = EvalReport::aggregate("y", vec![evaluate_sequence("b", &[], &truth, &truth).unwrap()]).unwrap();
        assert!(compare(&a, &b).is_err());
    }
}
