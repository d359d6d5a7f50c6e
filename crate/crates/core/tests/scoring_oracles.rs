//! Scoring functions checked against closed forms and against a from-scratch
//! recomputation that shares no code with the library.

use mts_core::analysis::{
    appearance_similarity, geometric_similarity, robustness_score, select_best, AppearanceSet, RobustnessReport,
    ScoringParams, WeightMask,
};
use mts_core::ensemble::{Direction, Trajectory};
use mts_core::{extract_patch, BoundingBox, Frame, PatchSize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PATCH: PatchSize = PatchSize { height: 32, width: 32 };

fn params(sigma1: f64, sigma2: f64, mask: WeightMask) -> ScoringParams {
    ScoringParams::new(sigma1, sigma2, 1e6, 1.0, 0.5, mask).unwrap()
}

#[test]
fn geometric_term_at_reference_distances() {
    let sigma1 = 7.5;
    let a = BoundingBox::new(20.0, 30.0, 16.0, 16.0).unwrap();
    for (k, expected) in [(0.0, 1.0), (1.0, (-1.0f64).exp()), (2.0, (-4.0f64).exp())] {
        let b = a.translated(0.6 * k * sigma1, 0.8 * k * sigma1);
        let got = geometric_similarity(&a, &b, sigma1);
        assert!((got - expected).abs() < 1e-12, "d = {k} sigma1: {got} vs {expected}");
    }
}

#[test]
fn appearance_term_with_uniform_mask_and_uniform_residual() {
    let sigma2 = 0.2;
    let frame = Frame::from_fn(1, 64, 64, |_, _| 0.3 + 2.0 * sigma2).unwrap();
    let reference = extract_patch(&Frame::from_fn(1, 64, 64, |_, _| 0.3).unwrap(), &BoundingBox::new(0.0, 0.0, 32.0, 32.0).unwrap(), PATCH);
    let set = AppearanceSet::new(vec![reference]).unwrap();
    let p = params(10.0, sigma2, WeightMask::uniform(PATCH));
    let phi = appearance_similarity(&frame, &BoundingBox::new(10.0, 12.0, 32.0, 32.0).unwrap(), &set, &p);
    assert!((phi - (-1.0f64).exp()).abs() < 1e-12, "{phi}");
}

/// Bilinear sample with edge clamping, written out longhand.
fn sample(frame: &Frame, x: f64, y: f64) -> f64 {
    let x = x.max(0.0).min((frame.width() - 1) as f64);
    let y = y.max(0.0).min((frame.height() - 1) as f64);
    let (c, r) = (x.floor() as usize, y.floor() as usize);
    let (c2, r2) = ((c + 1).min(frame.width() - 1), (r + 1).min(frame.height() - 1));
    let (u, v) = (x - c as f64, y - r as f64);
    (1.0 - v) * ((1.0 - u) * frame.get(c, r) + u * frame.get(c2, r))
        + v * ((1.0 - u) * frame.get(c, r2) + u * frame.get(c2, r2))
}

fn patch(frame: &Frame, b: &BoundingBox) -> Vec<f64> {
    let mut out = Vec::with_capacity(PATCH.len());
    for i in 0..PATCH.height {
        for j in 0..PATCH.width {
            let x = b.x + (j as f64 + 0.5) * b.w / PATCH.width as f64 - 0.5;
            let y = b.y + (i as f64 + 0.5) * b.h / PATCH.height as f64 - 0.5;
            out.push(sample(frame, x, y));
        }
    }
    out
}

fn gaussian_mask() -> Vec<f64> {
    let (sy, sx) = (PATCH.height as f64 / 2.0, PATCH.width as f64 / 2.0);
    let (cy, cx) = ((PATCH.height - 1) as f64 / 2.0, (PATCH.width - 1) as f64 / 2.0);
    let raw: Vec<f64> = (0..PATCH.len())
        .map(|k| {
            let (i, j) = ((k / PATCH.width) as f64, (k % PATCH.width) as f64);
            (-((i - cy).powi(2) / (2.0 * sy * sy) + (j - cx).powi(2) / (2.0 * sx * sx))).exp()
        })
        .collect();
    let peak = raw.iter().cloned().fold(0.0, f64::max);
    raw.into_iter().map(|v| v / peak).collect()
}

fn brute_psi(fwd: &[BoundingBox], bwd: &[BoundingBox], frames: &[Frame], refs: &[Vec<f64>], s1: f64, s2: f64) -> f64 {
    let mask = gaussian_mask();
    let overlap = {
        let (a, b) = (fwd[0], bwd[0]);
        let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
        let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
        let inter = iw * ih;
        inter / (a.w * a.h + b.w * b.h - inter)
    };
    let chi = if overlap >= 0.5 { 1e6 } else { 1.0 };
    let mut total = 0.0;
    for k in 1..fwd.len() {
        let (f, b) = (fwd[k], bwd[k]);
        let d2 = (f.x + f.w / 2.0 - b.x - b.w / 2.0).powi(2) + (f.y + f.h / 2.0 - b.y - b.h / 2.0).powi(2);
        let geo = (-d2 / (s1 * s1)).exp();
        let p = patch(&frames[k], &b);
        let energy: f64 = refs
            .iter()
            .map(|q| p.iter().zip(q).zip(&mask).map(|((p, q), m)| (m * (p - q)).powi(2)).sum::<f64>())
            .sum();
        let app = (-energy / (4.0 * PATCH.len() as f64 * s2 * s2)).exp();
        total += geo * app;
    }
    chi * total
}

fn random_box(rng: &mut ChaCha8Rng, near: Option<BoundingBox>) -> BoundingBox {
    match near {
        Some(b) => BoundingBox::new(b.x + rng.random_range(-4.0..4.0), b.y + rng.random_range(-4.0..4.0), b.w, b.h).unwrap(),
        None => BoundingBox::new(rng.random_range(-5.0..40.0), rng.random_range(-5.0..30.0), rng.random_range(8.0..30.0), rng.random_range(8.0..30.0)).unwrap(),
    }
}

#[test]
fn robustness_score_matches_independent_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let frames: Vec<Frame> = (1..=12)
        .map(|t| {
            let phase = rng.random_range(0.0..6.0);
            Frame::from_fn(t, 64, 48, move |c, r| 0.5 + 0.4 * ((c as f64 * 0.37 + phase).sin() * (r as f64 * 0.23 - phase).cos())).unwrap()
        })
        .collect();
    let init = BoundingBox::new(12.0, 9.0, 20.0, 18.0).unwrap();
    let references = vec![extract_patch(&frames[0], &init, PATCH), extract_patch(&frames[3], &init.translated(2.0, 1.0), PATCH)];
    let ref_pixels: Vec<Vec<f64>> = references.iter().map(|p| p.pixels.clone()).collect();
    let set = AppearanceSet::new(references).unwrap();

    for case in 0..1000 {
        let len = rng.random_range(2..=frames.len());
        let anchor = rng.random_range(1..=frames.len() + 1 - len);
        let w = &frames[anchor - 1..anchor - 1 + len];
        let start = random_box(&mut rng, None);
        let mut fwd = vec![start];
        for _ in 1..len {
            let prev = *fwd.last().unwrap();
            fwd.push(random_box(&mut rng, Some(prev)));
        }
        let cyclic_case = rng.random_bool(0.5);
        let mut bwd: Vec<BoundingBox> = fwd.iter().map(|b| random_box(&mut rng, Some(*b))).collect();
        bwd[len - 1] = fwd[len - 1];
        if cyclic_case {
            bwd[0] = fwd[0];
        }
        let s1 = rng.random_range(2.0..20.0);
        let s2 = rng.random_range(0.05..0.5);
        let p = params(s1, s2, WeightMask::gaussian(PATCH));

        let last = anchor + len - 1;
        let ft = Trajectory::new(Direction::Forward, anchor, last, fwd.clone()).unwrap();
        let bt = Trajectory::new(Direction::Backward, anchor, last, bwd.iter().rev().copied().collect()).unwrap();
        let report = robustness_score(0, &ft, &bt, &frames, &set, &p).unwrap();
        let expected = brute_psi(&fwd, &bwd, w, &ref_pixels, s1, s2);
        let rel = (report.psi - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        assert!(rel <= 1e-10, "case {case}: {} vs {expected} (rel {rel})", report.psi);
        assert_eq!(report.psi, report.recomputed_psi());
    }
}

#[test]
fn cyclic_pairs_always_outrank_noncyclic_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut with_cyclic = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=10);
        let len = rng.random_range(1..=1000);
        let reports: Vec<RobustnessReport> = (0..n)
            .map(|i| {
                let cyclic = rng.random_bool(0.3);
                let (geo, app): (Vec<f64>, Vec<f64>) = if cyclic {
                    // per-frame products with mean at least 0.01
                    (0..len).map(|_| (rng.random_range(0.1..=1.0), rng.random_range(0.1..=1.0))).unzip()
                } else {
                    (0..len).map(|_| (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0))).unzip()
                };
                let chi = if cyclic { 1e6 } else { 1.0 };
                let psi = chi * geo.iter().zip(&app).map(|(g, a)| g * a).sum::<f64>();
                RobustnessReport { tracker_index: i, cyclic, first_frame: 2, geo, app, chi, psi }
            })
            .collect();
        let best = select_best(&reports).unwrap();
        if reports.iter().any(|r| r.cyclic) {
            with_cyclic += 1;
            assert!(reports[best].cyclic);
        }
    }
    assert!(with_cyclic > 500);
}
