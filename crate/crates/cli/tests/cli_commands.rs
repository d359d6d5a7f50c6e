use std::fs;
use std::path::{Path, PathBuf};

use mts_cli::manifest::{Manifest, MANIFEST_FILE};
use mts_cli::{run_from, UsageError};
use mts_core::evaluation::ComparisonRecord;
use mts_core::synth::{SynthSpec, Waypoint};

fn run(args: &[&str]) -> anyhow::Result<mts_cli::Outcome> {
    run_from(std::iter::once("mts").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn still_spec(dir: &Path) -> PathBuf {
    let spec = SynthSpec {
        name: "still".into(),
        frames: 24,
        width: 96,
        height: 80,
        target_w: 24,
        target_h: 24,
        texture_seed: 11,
        seed: 12,
        noise_sigma: 0.0,
        background_cell: 12,
        target_cell: 4,
        background_range: [0.2, 0.8],
        target_range: [0.0, 1.0],
        waypoints: vec![Waypoint { frame: 1, x: 36.0, y: 28.0 }],
        occlusions: vec![],
        gain: vec![],
        attributes: vec![],
    };
    let path = dir.join("still.toml");
    fs::write(&path, toml::to_string(&spec).unwrap()).unwrap();
    path
}

fn moving_spec(dir: &Path) -> PathBuf {
    let text = r#"
name = "drift"
frames = 30
width = 112
height = 96
target_w = 24
target_h = 20
texture_seed = 4
seed = 5
noise_sigma = 0.02
waypoints = [{ frame = 1, x = 20.0, y = 20.0 }, { frame = 30, x = 60.0, y = 50.0 }]
"#;
    let path = dir.join("drift.toml");
    fs::write(&path, text).unwrap();
    path
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != MANIFEST_FILE {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn single_member_track_equals_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = moving_spec(tmp.path());
    for tracker in ["ncc", "dcf"] {
        let (a, b) = (tmp.path().join(format!("t-{tracker}")), tmp.path().join(format!("b-{tracker}")));
        run(&["track", "--seq", p(&spec), "--n", "1", "--tracker", tracker, "--out", p(&a)]).unwrap();
        run(&["baseline", "--seq", p(&spec), "--tracker", tracker, "--out", p(&b)]).unwrap();
        assert_eq!(fs::read(a.join("drift.csv")).unwrap(), fs::read(b.join("drift.csv")).unwrap(), "{tracker}");
    }
}

#[test]
fn missing_ground_truth_needs_an_initial_box() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("seqs");
    run(&["synth", "--spec", p(&moving_spec(tmp.path())), "--out", p(&seq)]).unwrap();
    fs::remove_file(seq.join("drift/groundtruth_rect.txt")).unwrap();
    let err = run(&["track", "--seq", p(&seq.join("drift")), "--out", p(&tmp.path().join("o"))]).unwrap_err();
    assert!(err.downcast_ref::<UsageError>().is_some(), "{err:#}");
    assert!(err.to_string().starts_with("cli:"), "{err}");
    let out = tmp.path().join("o2");
    let done = run(&["track", "--seq", p(&seq.join("drift")), "--init", "20,20,24,20", "--out", p(&out)]).unwrap();
    assert!(out.join("drift.csv").is_file() && out.join(MANIFEST_FILE).is_file());
    assert!(done.summary.contains("30 frames"));
}

#[test]
fn synth_is_byte_reproducible_and_reloads() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        run(&["synth", "--suite", "occlusion", "--count", "2", "--out", p(out)]).unwrap();
    }
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert!(ta.len() > 2 * 120);
    assert_eq!(ta, tb);
    let seqs = mts_cli::inputs::load_sequences(&a).unwrap();
    assert_eq!(seqs.len(), 2);
    let regenerated = mts_cli::inputs::load_sequence(&a.join("occlusion-01/spec.toml")).unwrap();
    assert_eq!(regenerated.ground_truth(), seqs[1].ground_truth());
    for (x, y) in regenerated.frames().iter().zip(seqs[1].frames()) {
        assert_eq!(x.pixels(), y.pixels());
    }
}

#[test]
fn compare_on_a_static_scene_shows_no_change() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    run(&["compare", "--seq", p(&still_spec(tmp.path())), "--n", "3", "--tau", "5", "--out", p(&out)]).unwrap();
    let record: ComparisonRecord = serde_json::from_str(&fs::read_to_string(out.join("comparison.json")).unwrap()).unwrap();
    let avg = record.average();
    assert_eq!((avg.base_pr, avg.wrapped_pr), (1.0, 1.0));
    assert_eq!(avg.pr_change, Some(0.0));
    assert_eq!(avg.sr_change, Some(0.0));
    assert!(out.join("NCC/still.csv").is_file() && out.join("MTS+NCC/report.txt").is_file());
}

#[test]
fn compare_on_the_occlusion_suite_favours_the_ensemble() {
    let tmp = tempfile::tempdir().unwrap();
    let seqs = tmp.path().join("suite");
    run(&["synth", "--suite", "occlusion", "--out", p(&seqs)]).unwrap();
    let out = tmp.path().join("cmp");
    run(&["compare", "--seq", p(&seqs), "--n", "8", "--tau", "10", "--out", p(&out)]).unwrap();
    let record: ComparisonRecord = serde_json::from_str(&fs::read_to_string(out.join("comparison.json")).unwrap()).unwrap();
    let occ = record.row("OCC").unwrap();
    assert_eq!(occ.sequences, 10);
    assert!(occ.wrapped_pr > occ.base_pr && occ.wrapped_sr > occ.base_sr, "{occ:?}");
}

#[test]
fn calibrate_covers_the_grid_and_suggests_the_best_row() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = moving_spec(tmp.path());
    let single = tmp.path().join("single");
    run(&["calibrate", "--seq", p(&spec), "--n", "2", "--tau", "5", "--out", p(&single)]).unwrap();
    let csv = fs::read_to_string(single.join("calibration.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");

    let grid = tmp.path().join("grid");
    run(&["calibrate", "--seq", p(&spec), "--n", "2", "--tau", "5", "--grid-sigma2", "0.05,0.2", "--grid-theta-cyc", "0.3,0.5", "--out", p(&grid)])
        .unwrap();
    let csv = fs::read_to_string(grid.join("calibration.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    let defaults = mts_core::MtsConfig::new(mts_core::TrackerKind::Ncc).scoring;
    assert!(rows.iter().any(|r| r[0] == defaults.sigma1_scale && r[1] == defaults.sigma2 && r[2] == defaults.theta_cyc));
    let best_sr = rows.iter().map(|r| r[4]).fold(f64::MIN, f64::max);
    let suggested = mts_cli::config::Settings::load(&grid.join("suggested.toml")).unwrap().mts.unwrap();
    assert_eq!((suggested.n, suggested.tau()), (2, 5));
    let best = rows.iter().find(|r| r[1] == suggested.scoring.sigma2 && r[2] == suggested.scoring.theta_cyc).unwrap();
    assert_eq!(best[4], best_sr);
}

#[test]
fn rerun_from_the_manifest_is_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    run(&["track", "--seq", p(&moving_spec(tmp.path())), "--n", "3", "--tau", "4", "--overlay", "--out", p(&out)]).unwrap();
    let manifest = Manifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.inputs.len(), 1);
    let again = tmp.path().join("again");
    run(&["rerun", "--manifest", p(&out.join(MANIFEST_FILE)), "--out", p(&again)]).unwrap();
    assert_eq!(read_tree(&out), read_tree(&again));
    assert_eq!(Manifest::load(&again.join(MANIFEST_FILE)).unwrap().config.mts, manifest.config.mts);

    fs::write(tmp.path().join("drift.toml"), "name = \"changed\"").unwrap();
    let err = run(&["rerun", "--manifest", p(&out.join(MANIFEST_FILE)), "--out", p(&tmp.path().join("x"))]).unwrap_err();
    assert!(err.to_string().starts_with("manifest:"), "{err}");
}

#[test]
fn settings_files_reject_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("mts.toml");
    fs::write(&cfg, "jobs = 1\nspeed = 3\n").unwrap();
    let err = run(&["--config", p(&cfg), "track", "--seq", p(&moving_spec(tmp.path())), "--out", p(&tmp.path().join("o"))]).unwrap_err();
    assert!(format!("{err:#}").contains("speed"), "{err:#}");

    fs::write(&cfg, "seed = 3\n[mts]\nn = 2\n[mts.tracker]\nkind = \"ncc\"\n").unwrap();
    let out = tmp.path().join("ok");
    run(&["--config", p(&cfg), "track", "--seq", p(&moving_spec(tmp.path())), "--tau", "6", "--out", p(&out)]).unwrap();
    let m = Manifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!((m.config.mts.n, m.config.mts.tau(), m.config.seed), (2, 6, 3));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let err = run(&["track"]).unwrap_err();
    assert!(err.downcast_ref::<UsageError>().is_some());
    let err = run(&["compare", "--seq", "/nonexistent/place", "--out", "/tmp/none"]).unwrap_err();
    assert!(err.downcast_ref::<UsageError>().is_none());
    assert!(format!("{err:#}").contains("cli: input /nonexistent/place does not exist"), "{err:#}");
}
