//! Scoring of forward/backward trajectory pairs and winner selection.
//!
//! Per frame, geometric similarity is `exp(-d^2 / sigma1^2)` for the center
//! distance `d` between the forward and backward boxes, and appearance
//! similarity is `exp(-sum_Q ||K * (P - Q)||^2 / (4 w h sigma2^2))` for the
//! backward-box patch `P` against every reference patch `Q`. A pair's score
//! is the sum of their products over the window, weighted heavily when the
//! backward trajectory returns to the anchor box.

use serde::{Deserialize, Serialize};

use crate::ensemble::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::{extract_patch, iou, BoundingBox, Frame, Patch, PatchSize};

/// Pixel weights over the canonical patch grid, peak-normalized to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMask {
    size: PatchSize,
    weights: Vec<f64>,
}

impl WeightMask {
    /// Centered Gaussian with per-axis sigma of half the patch side.
    pub fn gaussian(size: PatchSize) -> Self {
        let sr = 0.5 * size.height as f64;
        let sc = 0.5 * size.width as f64;
        let cr = (size.height as f64 - 1.0) / 2.0;
        let cc = (size.width as f64 - 1.0) / 2.0;
        let mut weights = Vec::with_capacity(size.len());
        for r in 0..size.height {
            for c in 0..size.width {
                let e = (r as f64 - cr).powi(2) / (2.0 * sr * sr) + (c as f64 - cc).powi(2) / (2.0 * sc * sc);
                weights.push((-e).exp());
            }
        }
        let peak = weights.iter().copied().fold(f64::MIN, f64::max);
        weights.iter_mut().for_each(|w| *w /= peak);
        Self { size, weights }
    }

    /// All weights equal to 1.
    pub fn uniform(size: PatchSize) -> Self {
        Self {
            size,
            weights: vec![1.0; size.len()],
        }
    }

    pub fn size(&self) -> PatchSize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringParams {
    /// Geometric bandwidth in pixels.
    pub sigma1: f64,
    /// Appearance bandwidth in intensity units.
    pub sigma2: f64,
    pub chi_cyclic: f64,
    pub chi_noncyclic: f64,
    /// Minimum anchor-frame IoU for a cyclic pair (inclusive).
    pub theta_cyc: f64,
    pub mask: WeightMask,
}

impl ScoringParams {
    pub fn new(sigma1: f64, sigma2: f64, chi_cyclic: f64, chi_noncyclic: f64, theta_cyc: f64, mask: WeightMask) -> Result<Self> {
        let p = Self {
            sigma1,
            sigma2,
            chi_cyclic,
            chi_noncyclic,
            theta_cyc,
            mask,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::param("analysis", msg));
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return fail(format!("sigma1 {} must be positive", self.sigma1));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return fail(format!("sigma2 {} must be positive", self.sigma2));
        }
        if !(self.chi_noncyclic > 0.0 && self.chi_cyclic > self.chi_noncyclic) {
            return fail(format!(
                "weights must satisfy chi_cyclic > chi_noncyclic > 0 (got {} and {})",
                self.chi_cyclic, self.chi_noncyclic
            ));
        }
        if !(self.theta_cyc > 0.0 && self.theta_cyc < 1.0) {
            return fail(format!("theta_cyc {} outside (0, 1)", self.theta_cyc));
        }
        Ok(())
    }
}

/// User-facing scoring configuration, resolved against the initial target
/// box by [`ScoringConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringConfig {
    /// Absolute geometric bandwidth; overrides `sigma1_scale` when set.
    pub sigma1: Option<f64>,
    /// Geometric bandwidth as a multiple of `sqrt(w0 * h0)`.
    pub sigma1_scale: f64,
    pub sigma2: f64,
    pub chi_cyclic: f64,
    pub chi_noncyclic: f64,
    pub theta_cyc: f64,
    pub patch_size: PatchSize,
    /// Add the winner's end-of-window patch to the reference set after each window.
    pub append_selected_patch: bool,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            sigma1: None,
            sigma1_scale: 0.5,
            sigma2: 0.05,
            chi_cyclic: 1e6,
            chi_noncyclic: 1.0,
            theta_cyc: 0.5,
            patch_size: PatchSize::default(),
            append_selected_patch: false,
        }
    }
}

impl ScoringConfig {
    pub fn resolve(&self, init_box: &BoundingBox) -> Result<ScoringParams> {
        let sigma1 = self
            .sigma1
            .unwrap_or(self.sigma1_scale * (init_box.w * init_box.h).sqrt());
        if self.patch_size.is_empty() {
            return Err(Error::param("analysis", "empty patch size"));
        }
        ScoringParams::new(
            sigma1,
            self.sigma2,
            self.chi_cyclic,
            self.chi_noncyclic,
            self.theta_cyc,
            WeightMask::gaussian(self.patch_size),
        )
    }
}

/// Reference appearances; never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceSet {
    patches: Vec<Patch>,
}

impl AppearanceSet {
    pub fn new(patches: Vec<Patch>) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::param("analysis", "appearance set must hold at least one patch"));
        }
        if patches.iter().any(|p| p.size != patches[0].size) {
            return Err(Error::param("analysis", "appearance patches differ in size"));
        }
        Ok(Self { patches })
    }

    pub fn push(&mut self, patch: Patch) -> Result<()> {
        if patch.size != self.patches[0].size {
            return Err(Error::param("analysis", "appearance patches differ in size"));
        }
        self.patches.push(patch);
        Ok(())
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub tracker_index: usize,
    pub cyclic: bool,
    /// Frame of `geo[0]` and `app[0]`.
    pub first_frame: usize,
    pub geo: Vec<f64>,
    pub app: Vec<f64>,
    /// Weight applied to the summed products.
    pub chi: f64,
    pub psi: f64,
}

impl RobustnessReport {
    /// Recomputes the score from the stored per-frame series.
    pub fn recomputed_psi(&self) -> f64 {
        self.chi * product_sum(&self.geo, &self.app)
    }
}

fn product_sum(geo: &[f64], app: &[f64]) -> f64 {
    geo.iter().zip(app).map(|(g, a)| g * a).sum()
}

/// `exp(-x)` kept strictly positive when it would underflow.
fn decay(x: f64) -> f64 {
    (-x).exp().max(f64::MIN_POSITIVE)
}

fn check_pair(fwd: &Trajectory, bwd: &Trajectory) -> Result<()> {
    if fwd.frames() != bwd.frames() {
        return Err(Error::TrajectoryMismatch(format!(
            "forward covers {:?}, backward covers {:?}",
            fwd.frames(),
            bwd.frames()
        )));
    }
    Ok(())
}

/// True when the backward trajectory lands on the forward one at the
/// anchor frame with IoU of at least `theta_cyc`.
pub fn check_cyclicity(fwd: &Trajectory, bwd: &Trajectory, theta_cyc: f64) -> Result<bool> {
    check_pair(fwd, bwd)?;
    let anchor = *fwd.frames().start();
    let (f, b) = (fwd.box_at(anchor).unwrap(), bwd.box_at(anchor).unwrap());
    Ok(iou(&f, &b) >= theta_cyc)
}

pub fn geometric_similarity(fwd_box: &BoundingBox, bwd_box: &BoundingBox, sigma1: f64) -> f64 {
    let d = fwd_box.center_distance(bwd_box);
    decay(d * d / (sigma1 * sigma1))
}

/// Weighted residual energy of a patch against every reference.
pub fn residual_energy(patch: &Patch, set: &AppearanceSet, mask: &WeightMask) -> f64 {
    set.patches()
        .iter()
        .map(|q| {
            patch
                .pixels
                .iter()
                .zip(&q.pixels)
                .zip(mask.weights())
                .map(|((p, q), k)| {
                    let r = k * (p - q);
                    r * r
                })
                .sum::<f64>()
        })
        .sum()
}

pub fn appearance_similarity(frame: &Frame, bwd_box: &BoundingBox, set: &AppearanceSet, params: &ScoringParams) -> f64 {
    let size = params.mask.size();
    let patch = extract_patch(frame, bwd_box, size);
    let energy = residual_energy(&patch, set, &params.mask);
    let norm = 4.0 * size.width as f64 * size.height as f64 * params.sigma2 * params.sigma2;
    decay(energy / norm)
}

/// Scores one member's pair over the predicted frames of the window (the
/// anchor frame itself only enters through the cyclicity check).
pub fn robustness_score(
    tracker_index: usize,
    fwd: &Trajectory,
    bwd: &Trajectory,
    frames: &[Frame],
    set: &AppearanceSet,
    params: &ScoringParams,
) -> Result<RobustnessReport> {
    let cyclic = check_cyclicity(fwd, bwd, params.theta_cyc)?;
    let first_frame = fwd.frames().start() + 1;
    let last = *fwd.frames().end();
    let mut geo = Vec::with_capacity(last + 1 - first_frame);
    let mut app = Vec::with_capacity(last + 1 - first_frame);
    for t in first_frame..=last {
        let frame = crate::ensemble::frame_at(frames, t)?;
        let (f, b) = (fwd.box_at(t).unwrap(), bwd.box_at(t).unwrap());
        geo.push(geometric_similarity(&f, &b, params.sigma1));
        app.push(appearance_similarity(frame, &b, set, params));
    }
    let chi = if cyclic { params.chi_cyclic } else { params.chi_noncyclic };
    let psi = chi * product_sum(&geo, &app);
    Ok(RobustnessReport {
        tracker_index,
        cyclic,
        first_frame,
        geo,
        app,
        chi,
        psi,
    })
}

/// Tracker index with the highest score; equal scores go to the larger index.
pub fn select_best(reports: &[RobustnessReport]) -> Result<usize> {
    reports
        .iter()
        .max_by(|a, b| {
            a.psi
                .total_cmp(&b.psi)
                .then(a.tracker_index.cmp(&b.tracker_index))
        })
        .map(|r| r.tracker_index)
        .ok_or(Error::EmptyReports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Direction;

    fn bb(x: f64, y: f64) -> BoundingBox {
        BoundingBox::new(x, y, 10.0, 10.0).unwrap()
    }

    fn traj(direction: Direction, boxes: Vec<BoundingBox>) -> Trajectory {
        let n = boxes.len();
        Trajectory::new(direction, 1, n, boxes).unwrap()
    }

    fn report(i: usize, psi: f64) -> RobustnessReport {
        RobustnessReport {
            tracker_index: i,
            cyclic: false,
            first_frame: 2,
            geo: vec![],
            app: vec![],
            chi: 1.0,
            psi,
        }
    }

    #[test]
    fn cyclicity_rules() {
        let fwd = traj(Direction::Forward, vec![bb(0.0, 0.0), bb(3.0, 0.0), bb(6.0, 0.0)]);
        let back_home = traj(Direction::Backward, vec![bb(6.0, 0.0), bb(3.0, 0.0), bb(0.0, 0.0)]);
        assert!(check_cyclicity(&fwd, &back_home, 0.5).unwrap());
        let lost = traj(Direction::Backward, vec![bb(6.0, 0.0), bb(30.0, 0.0), bb(50.0, 0.0)]);
        assert!(!check_cyclicity(&fwd, &lost, 0.5).unwrap());
        // threshold set to exactly the anchor IoU of this pair (1/3)
        let edge = traj(Direction::Backward, vec![bb(6.0, 0.0), bb(3.0, 0.0), bb(0.0, 5.0)]);
        let boundary = iou(&bb(0.0, 0.0), &bb(0.0, 5.0));
        assert!(check_cyclicity(&fwd, &edge, boundary).unwrap());
        let short = Trajectory::new(Direction::Backward, 2, 3, vec![bb(0.0, 0.0), bb(0.0, 0.0)]).unwrap();
        assert!(check_cyclicity(&fwd, &short, 0.5).is_err());
    }

    #[test]
    fn geometric_analytic_points() {
        let a = bb(0.0, 0.0);
        assert_eq!(geometric_similarity(&a, &a, 4.0), 1.0);
        let g = geometric_similarity(&a, &bb(3.0, 4.0), 5.0);
        assert!((g - (-1.0f64).exp()).abs() < 1e-12);
        assert!(geometric_similarity(&a, &bb(1e6, 0.0), 1.0) > 0.0);
    }

    #[test]
    fn appearance_of_matching_patch_is_one() {
        let f = Frame::from_fn(1, 40, 40, |c, r| ((c * 3 + r) % 7) as f64 / 6.0).unwrap();
        let b = BoundingBox::new(4.0, 4.0, 32.0, 32.0).unwrap();
        let set = AppearanceSet::new(vec![extract_patch(&f, &b, PatchSize::default())]).unwrap();
        let params = ScoringConfig::default().resolve(&b).unwrap();
        assert_eq!(appearance_similarity(&f, &b, &set, &params), 1.0);
    }

    #[test]
    fn mask_is_peak_normalized() {
        let m = WeightMask::gaussian(PatchSize::default());
        let max = m.weights().iter().copied().fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        assert!(m.weights().iter().all(|&w| w > 0.0 && w <= 1.0));
        // symmetric about the center
        assert_eq!(m.weights()[0], m.weights()[32 * 32 - 1]);
    }

    #[test]
    fn params_validation() {
        let mask = WeightMask::uniform(PatchSize::default());
        assert!(ScoringParams::new(1.0, 0.2, 1e6, 1.0, 0.5, mask.clone()).is_ok());
        assert!(ScoringParams::new(0.0, 0.2, 1e6, 1.0, 0.5, mask.clone()).is_err());
        assert!(ScoringParams::new(1.0, 0.2, 1.0, 1.0, 0.5, mask.clone()).is_err());
        assert!(ScoringParams::new(1.0, 0.2, 1e6, 1.0, 1.0, mask).is_err());
    }

    #[test]
    fn empty_appearance_set_rejected() {
        assert!(AppearanceSet::new(vec![]).is_err());
    }

    #[test]
    fn select_best_rules() {
        assert!(matches!(select_best(&[]), Err(Error::EmptyReports)));
        assert_eq!(select_best(&[report(3, 0.5)]).unwrap(), 3);
        let tied = [report(0, 1.0), report(2, 7.0), report(3, 2.0), report(5, 7.0)];
        assert_eq!(select_best(&tied).unwrap(), 5);
        let mut shuffled = tied.clone();
        shuffled.reverse();
        assert_eq!(select_best(&shuffled).unwrap(), 5);
    }
}
