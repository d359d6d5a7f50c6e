use mts_core::evaluation::{compare, evaluate_sequence, percent_change, EvalReport};
use mts_core::sequence::Attribute;
use mts_core::BoundingBox;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let h = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    w * h / (a.w * a.h + b.w * b.h - w * h)
}

/// Recount of both scores, one frame and one threshold at a time.
fn recount(pred: &[BoundingBox], truth: &[BoundingBox]) -> (f64, f64) {
    let frames = pred.len() - 1;
    let mut close = 0;
    for t in 1..pred.len() {
        let dx = (pred[t].x + pred[t].w / 2.0) - (truth[t].x + truth[t].w / 2.0);
        let dy = (pred[t].y + pred[t].h / 2.0) - (truth[t].y + truth[t].h / 2.0);
        if (dx * dx + dy * dy).sqrt() <= 20.0 {
            close += 1;
        }
    }
    let mut area = 0.0;
    for k in 0..=20 {
        let th = k as f64 * 0.05;
        let mut hits = 0;
        for t in 1..pred.len() {
            if overlap(&pred[t], &truth[t]) > th {
                hits += 1;
            }
        }
        area += hits as f64 / frames as f64;
    }
    (close as f64 / frames as f64, area / 21.0)
}

fn random_track(rng: &mut ChaCha8Rng, len: usize) -> (Vec<BoundingBox>, Vec<BoundingBox>) {
    let spread = rng.random_range(1.0..60.0);
    let mut truth = Vec::with_capacity(len);
    let mut pred = Vec::with_capacity(len);
    for _ in 0..len {
        let t = BoundingBox::new(rng.random_range(0.0..200.0), rng.random_range(0.0..200.0), rng.random_range(5.0..60.0), rng.random_range(5.0..60.0)).unwrap();
        let p = BoundingBox::new(
            t.x + rng.random_range(-spread..spread),
            t.y + rng.random_range(-spread..spread),
            (t.w * rng.random_range(0.6..1.5)).max(1.0),
            (t.h * rng.random_range(0.6..1.5)).max(1.0),
        )
        .unwrap();
        truth.push(t);
        pred.push(p);
    }
    (pred, truth)
}

#[test]
fn scores_match_a_brute_force_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..50 {
        let len = rng.random_range(2..300);
        let (pred, truth) = random_track(&mut rng, len);
        let eval = evaluate_sequence("r", &[], &pred, &truth).unwrap();
        let (pr, sr) = recount(&pred, &truth);
        assert!((eval.pr - pr).abs() < 1e-12, "case {case}: {} vs {pr}", eval.pr);
        assert!((eval.sr - sr).abs() < 1e-12, "case {case}: {} vs {sr}", eval.sr);
    }
}

#[test]
fn reference_percent_changes() {
    let d = percent_change(0.656, 0.727).unwrap();
    assert_eq!(format!("{d:.2}"), "10.82");
    assert_eq!(percent_change(0.0, 0.5), None);
}

#[test]
fn comparison_rows_recompute_from_the_reports() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut base = Vec::new();
    let mut wrapped = Vec::new();
    for i in 0..6 {
        let attrs = if i % 2 == 0 { vec![Attribute::Occ] } else { vec![Attribute::Iv, Attribute::Occ] };
        let (p, t) = random_track(&mut rng, 40);
        base.push(evaluate_sequence(&format!("s{i}"), &attrs, &p, &t).unwrap());
        let (p, t) = random_track(&mut rng, 40);
        wrapped.push(evaluate_sequence(&format!("s{i}"), &attrs, &p, &t).unwrap());
    }
    let base = EvalReport::aggregate("NCC", base).unwrap();
    let wrapped = EvalReport::aggregate("MTS+NCC", wrapped).unwrap();
    let record = compare(&wrapped, &base).unwrap();
    let avg = record.average();
    let mean = |r: &EvalReport, f: fn(&mts_core::evaluation::SequenceEval) -> f64| r.sequences.iter().map(f).sum::<f64>() / r.sequences.len() as f64;
    assert!((avg.base_pr - mean(&base, |s| s.pr)).abs() < 1e-12);
    assert!((avg.wrapped_sr - mean(&wrapped, |s| s.sr)).abs() < 1e-12);
    assert_eq!(avg.pr_change, percent_change(avg.base_pr, avg.wrapped_pr));
    let occ = record.row("OCC").unwrap();
    assert_eq!(occ.sequences, 6);
    let iv = record.row("IV").unwrap();
    assert_eq!(iv.sequences, 3);
}
