//! Window-by-window driver: plan, paced forward pass, backward pass, score,
//! select, hand off.

use serde::{Deserialize, Serialize};

use crate::analysis::{robustness_score, select_best, AppearanceSet, RobustnessReport, ScoringConfig};
use crate::ensemble::{self, member_records, run_backward, run_forward, Execution, MemberRecord, WindowPlan};
use crate::error::{Error, Result};
use crate::geometry::{extract_patch, BoundingBox, Frame};
use crate::tracker::{Tracker, TrackerConfig, TrackerKind, TrackerState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtsConfig {
    /// Ensemble size.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Interval length in frames; defaults per tracker family.
    #[serde(default)]
    pub tau: Option<usize>,
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default)]
    pub execution: Execution,
}

fn default_n() -> usize {
    8
}

impl MtsConfig {
    pub fn new(kind: TrackerKind) -> Self {
        Self {
            n: default_n(),
            tau: None,
            tracker: TrackerConfig::new(kind),
            scoring: ScoringConfig::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_ensemble(mut self, n: usize, tau: usize) -> Self {
        self.n = n;
        self.tau = Some(tau);
        self
    }

    pub fn tau(&self) -> usize {
        self.tau.unwrap_or_else(|| self.tracker.kind.default_tau())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::param("pipeline", "n must be >= 1"));
        }
        if self.tau() < 1 {
            return Err(Error::param("pipeline", "tau must be >= 1"));
        }
        self.tracker.validate()
    }
}

/// Per-window record of what was scored and which member won.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDiagnostics {
    pub anchor: usize,
    pub end: usize,
    pub selected: usize,
    pub psi: Vec<f64>,
    pub cyclic: Vec<bool>,
    pub stop_frames: Vec<Option<usize>>,
    /// Hash of the base state the window started from.
    pub start_state: String,
    /// Hash of the winner's post-forward state, handed to the next window.
    pub handoff_state: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingResult {
    /// One box per frame; `boxes[0]` is the initialization box of frame 1.
    pub boxes: Vec<BoundingBox>,
    pub windows: Vec<WindowDiagnostics>,
}

impl TrackingResult {
    pub fn box_at(&self, frame: usize) -> Option<BoundingBox> {
        self.boxes.get(frame.checked_sub(1)?).copied()
    }
}

/// Everything computed for one window, for callers that want more than the
/// diagnostics summary.
pub struct WindowTrace<'a> {
    pub plan: &'a WindowPlan,
    pub members: &'a [MemberRecord],
    pub reports: &'a [RobustnessReport],
    pub selected: usize,
}

/// Runs the ensemble wrapper over a whole sequence with the configured base
/// tracker initialized on frame 1.
pub fn run_mts(frames: &[Frame], init_box: BoundingBox, config: &MtsConfig) -> Result<TrackingResult> {
    config.validate()?;
    let first = ensemble::frame_at(frames, 1)?;
    let base = TrackerState::init(first, init_box, &config.tracker)?;
    run_mts_with(base, frames, config, |_| {})
}

/// Generic driver over any base tracker positioned at the frame-1 box.
/// `on_window` sees every window's full trace before the hand-off.
pub fn run_mts_with<T, F>(mut base: T, frames: &[Frame], config: &MtsConfig, mut on_window: F) -> Result<TrackingResult>
where
    T: Tracker,
    F: FnMut(&WindowTrace<'_>),
{
    config.validate()?;
    let last = frames.len();
    if last < 2 {
        return Err(Error::param("pipeline", "a sequence needs at least two frames"));
    }
    for t in 1..=last {
        ensemble::frame_at(frames, t)?;
    }
    let init_box = base.current_box();
    let params = config.scoring.resolve(&init_box)?;
    let mut appearance = AppearanceSet::new(vec![extract_patch(&frames[0], &init_box, config.scoring.patch_size)])?;
    let exec = config.execution;

    let mut boxes = Vec::with_capacity(last);
    boxes.push(init_box);
    let mut windows = Vec::new();
    let mut anchor = 1;
    while anchor < last {
        let plan = WindowPlan::new(anchor, base.current_box(), config.n, config.tau(), last)?;
        let forward = run_forward(&base, &plan, frames, exec)?;
        let backward = run_backward(&forward, &plan, frames, exec)?;

        let score = |i: usize| robustness_score(i, &forward[i].trajectory, &backward[i], frames, &appearance, &params);
        let reports: Vec<RobustnessReport> = match exec {
            Execution::Sequential => (0..plan.n).map(score).collect::<Result<_>>()?,
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..plan.n).into_par_iter().map(score).collect::<Result<_>>()?
            }
        };
        let selected = select_best(&reports)?;

        let members = member_records(&plan, &forward, &backward);
        on_window(&WindowTrace {
            plan: &plan,
            members: &members,
            reports: &reports,
            selected,
        });

        let winner = forward.into_iter().nth(selected).expect("selected index within ensemble");
        boxes.extend_from_slice(&winner.trajectory.boxes()[1..]);
        let start_state = base.state_hash();
        base = winner.state;
        windows.push(WindowDiagnostics {
            anchor: plan.anchor,
            end: plan.end,
            selected,
            psi: reports.iter().map(|r| r.psi).collect(),
            cyclic: reports.iter().map(|r| r.cyclic).collect(),
            stop_frames: plan.stop_frames().to_vec(),
            start_state,
            handoff_state: base.state_hash(),
        });
        if config.scoring.append_selected_patch {
            appearance.push(extract_patch(&frames[plan.end - 1], &base.current_box(), config.scoring.patch_size))?;
        }
        anchor = plan.end;
    }
    debug_assert_eq!(boxes.len(), last);
    Ok(TrackingResult { boxes, windows })
}

/// Plain base tracker: predict then learn on every frame.
pub fn run_baseline(frames: &[Frame], init_box: BoundingBox, tracker: &TrackerConfig) -> Result<TrackingResult> {
    let first = ensemble::frame_at(frames, 1)?;
    let state = TrackerState::init(first, init_box, tracker)?;
    run_baseline_with(state, frames)
}

pub fn run_baseline_with<T: Tracker>(mut state: T, frames: &[Frame]) -> Result<TrackingResult> {
    if frames.len() < 2 {
        return Err(Error::param("pipeline", "a sequence needs at least two frames"));
    }
    let mut boxes = Vec::with_capacity(frames.len());
    boxes.push(state.current_box());
    for t in 2..=frames.len() {
        let frame = ensemble::frame_at(frames, t)?;
        let predicted = state.predict(frame);
        state.update(frame, predicted);
        boxes.push(predicted);
    }
    Ok(TrackingResult {
        boxes,
        windows: Vec::new(),
    })
}
