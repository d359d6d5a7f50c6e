//! Paced forward runs and backward re-tracking over one window.
//!
//! Member `k` (0-based) of an `n`-member ensemble learns on every frame
//! strictly before `anchor + (k + 1) * tau`; the last member never stops.
//! All members start from snapshots of the same base state, so two members
//! agree bit-for-bit until the earlier one stops learning.

use std::io::Write;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Frame};
use crate::tracker::Tracker;

/// How the independent member runs are scheduled. Both modes produce
/// bit-identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowPlan {
    /// Frame with a trusted box.
    pub anchor: usize,
    pub anchor_box: BoundingBox,
    /// Last frame of the window.
    pub end: usize,
    pub n: usize,
    pub tau: usize,
    stop_frames: Vec<Option<usize>>,
}

impl WindowPlan {
    /// Plans the window starting after `anchor`, `n * tau` frames long and
    /// clipped at `last_frame`.
    pub fn new(anchor: usize, anchor_box: BoundingBox, n: usize, tau: usize, last_frame: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::param("ensemble", "tracker count n must be >= 1"));
        }
        if tau < 1 {
            return Err(Error::param("ensemble", "interval tau must be >= 1"));
        }
        if anchor >= last_frame {
            return Err(Error::param(
                "ensemble",
                format!("anchor frame {anchor} must precede the last frame {last_frame}"),
            ));
        }
        let end = anchor.saturating_add(n.saturating_mul(tau)).min(last_frame);
        let stop_frames = (0..n)
            .map(|k| (k + 1 < n).then(|| anchor + (k + 1) * tau))
            .collect();
        Ok(Self {
            anchor,
            anchor_box,
            end,
            n,
            tau,
            stop_frames,
        })
    }

    /// First predicted frame.
    pub fn start(&self) -> usize {
        self.anchor + 1
    }

    /// Frame from which `member` stops learning; `None` for the last member.
    pub fn stop_frame(&self, member: usize) -> Option<usize> {
        self.stop_frames[member]
    }

    pub fn stop_frames(&self) -> &[Option<usize>] {
        &self.stop_frames
    }

    /// Whether `member` learns from its prediction at frame `t`.
    pub fn learns_at(&self, member: usize, t: usize) -> bool {
        self.stop_frames[member].is_none_or(|stop| t < stop)
    }

    /// Number of frames covered including the anchor.
    pub fn span(&self) -> usize {
        self.end - self.anchor + 1
    }

    pub fn frames(&self) -> RangeInclusive<usize> {
        self.anchor..=self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Boxes over an inclusive frame range, stored in traversal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub direction: Direction,
    first: usize,
    last: usize,
    boxes: Vec<BoundingBox>,
}

impl Trajectory {
    /// `boxes` run from `first` to `last` for forward trajectories and from
    /// `last` down to `first` for backward ones.
    pub fn new(direction: Direction, first: usize, last: usize, boxes: Vec<BoundingBox>) -> Result<Self> {
        if last < first || boxes.len() != last - first + 1 {
            return Err(Error::TrajectoryMismatch(format!(
                "{} boxes for frames {first}..={last}",
                boxes.len()
            )));
        }
        Ok(Self {
            direction,
            first,
            last,
            boxes,
        })
    }

    pub fn frames(&self) -> RangeInclusive<usize> {
        self.first..=self.last
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Boxes in traversal order.
    pub fn boxes(&self) -> &[BoundingBox] {
        &self.boxes
    }

    pub fn box_at(&self, t: usize) -> Option<BoundingBox> {
        if !self.frames().contains(&t) {
            return None;
        }
        let i = match self.direction {
            Direction::Forward => t - self.first,
            Direction::Backward => self.last - t,
        };
        Some(self.boxes[i])
    }

    /// Boxes ordered by ascending frame index.
    pub fn chronological(&self) -> Vec<BoundingBox> {
        match self.direction {
            Direction::Forward => self.boxes.clone(),
            Direction::Backward => self.boxes.iter().rev().copied().collect(),
        }
    }
}

/// One member's forward trajectory and its state after the last frame.
#[derive(Debug, Clone)]
pub struct ForwardRun<T> {
    pub trajectory: Trajectory,
    pub state: T,
}

/// Looks up frame `t` in a sequence stored 1-based.
pub fn frame_at(frames: &[Frame], t: usize) -> Result<&Frame> {
    frames
        .get(t.wrapping_sub(1))
        .filter(|f| f.index() == t)
        .ok_or(Error::FrameOutOfRange { index: t, len: frames.len() })
}

fn check_coverage(frames: &[Frame], plan: &WindowPlan) -> Result<()> {
    for t in plan.frames() {
        frame_at(frames, t)?;
    }
    Ok(())
}

fn map_members<R, F>(n: usize, exec: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Forward pass with paced updates. Every member starts from a snapshot of
/// `base`, whose current box must be the plan's anchor box.
pub fn run_forward<T: Tracker>(base: &T, plan: &WindowPlan, frames: &[Frame], exec: Execution) -> Result<Vec<ForwardRun<T>>> {
    check_coverage(frames, plan)?;
    if base.current_box() != plan.anchor_box {
        return Err(Error::param("ensemble", "base tracker is not positioned at the anchor box"));
    }
    let runs = map_members(plan.n, exec, |member| {
        let mut state = base.snapshot();
        let mut boxes = Vec::with_capacity(plan.span());
        boxes.push(plan.anchor_box);
        for t in plan.start()..=plan.end {
            let frame = &frames[t - 1];
            let predicted = state.predict(frame);
            if plan.learns_at(member, t) {
                state.update(frame, predicted);
            } else {
                state.relocate(predicted);
            }
            boxes.push(predicted);
        }
        ForwardRun {
            trajectory: Trajectory {
                direction: Direction::Forward,
                first: plan.anchor,
                last: plan.end,
                boxes,
            },
            state,
        }
    });
    Ok(runs)
}

/// Backward pass from each member's post-forward state, learning on every
/// frame. The forward runs are left untouched.
pub fn run_backward<T: Tracker>(forward: &[ForwardRun<T>], plan: &WindowPlan, frames: &[Frame], exec: Execution) -> Result<Vec<Trajectory>> {
    check_coverage(frames, plan)?;
    if forward.len() != plan.n {
        return Err(Error::TrajectoryMismatch(format!(
            "{} forward runs for an ensemble of {}",
            forward.len(),
            plan.n
        )));
    }
    if let Some(bad) = forward.iter().find(|r| r.trajectory.frames() != plan.frames()) {
        return Err(Error::TrajectoryMismatch(format!(
            "forward trajectory covers {:?}, plan covers {:?}",
            bad.trajectory.frames(),
            plan.frames()
        )));
    }
    let trajectories = map_members(plan.n, exec, |member| {
        let run = &forward[member];
        let mut state = run.state.snapshot();
        let start_box = run.trajectory.box_at(plan.end).expect("forward run covers plan end");
        state.relocate(start_box);
        let mut boxes = Vec::with_capacity(plan.span());
        boxes.push(start_box);
        for t in (plan.anchor..plan.end).rev() {
            let frame = &frames[t - 1];
            let predicted = state.predict(frame);
            state.update(frame, predicted);
            boxes.push(predicted);
        }
        Trajectory {
            direction: Direction::Backward,
            first: plan.anchor,
            last: plan.end,
            boxes,
        }
    });
    Ok(trajectories)
}

/// Per-member record of one window, for line-delimited debug dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub member: usize,
    pub anchor: usize,
    pub end: usize,
    pub stop_frame: Option<usize>,
    pub forward: Vec<BoundingBox>,
    pub backward: Vec<BoundingBox>,
}

pub fn member_records<T>(plan: &WindowPlan, forward: &[ForwardRun<T>], backward: &[Trajectory]) -> Vec<MemberRecord> {
    forward
        .iter()
        .zip(backward)
        .enumerate()
        .map(|(member, (f, b))| MemberRecord {
            member,
            anchor: plan.anchor,
            end: plan.end,
            stop_frame: plan.stop_frame(member),
            forward: f.trajectory.chronological(),
            backward: b.chronological(),
        })
        .collect()
}

/// Writes one JSON object per line.
pub fn write_debug_dump<W: Write>(mut out: W, records: &[MemberRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb() -> BoundingBox {
        BoundingBox::new(10.0, 10.0, 8.0, 8.0).unwrap()
    }

    #[test]
    fn plan_matches_five_member_diagram() {
        let p = WindowPlan::new(0, bb(), 5, 3, 100).unwrap();
        assert_eq!(p.end, 15);
        assert_eq!(p.stop_frames(), &[Some(3), Some(6), Some(9), Some(12), None]);
        assert_eq!(p.start(), 1);
        assert_eq!(p.span(), 16);
    }

    #[test]
    fn single_member_plan() {
        let p = WindowPlan::new(4, bb(), 1, 7, 100).unwrap();
        assert_eq!(p.stop_frames(), &[None]);
        assert_eq!(p.end, 11);
        let p = WindowPlan::new(97, bb(), 1, 7, 100).unwrap();
        assert_eq!(p.end, 100);
    }

    #[test]
    fn plan_clips_at_sequence_end() {
        let p = WindowPlan::new(90, bb(), 5, 3, 100).unwrap();
        assert_eq!(p.end, 100);
        assert_eq!(p.stop_frames(), &[Some(93), Some(96), Some(99), Some(102), None]);
        // member 3 stops past the end, so it learns on every frame in the window
        assert!((91..=100).all(|t| p.learns_at(3, t)));
        assert!(!p.learns_at(0, 93));
        assert!(p.learns_at(0, 92));
    }

    #[test]
    fn plan_rejects_bad_arguments() {
        assert!(WindowPlan::new(0, bb(), 0, 3, 100).is_err());
        assert!(WindowPlan::new(0, bb(), 3, 0, 100).is_err());
        assert!(WindowPlan::new(100, bb(), 3, 3, 100).is_err());
    }

    #[test]
    fn backward_box_lookup() {
        let boxes: Vec<BoundingBox> = (0..4).map(|k| bb().translated(k as f64, 0.0)).collect();
        let t = Trajectory::new(Direction::Backward, 5, 8, boxes.clone()).unwrap();
        assert_eq!(t.box_at(8), Some(boxes[0]));
        assert_eq!(t.box_at(5), Some(boxes[3]));
        assert_eq!(t.box_at(9), None);
        assert_eq!(t.chronological()[0], boxes[3]);
        assert!(Trajectory::new(Direction::Forward, 5, 8, boxes[..3].to_vec()).is_err());
    }

    #[test]
    fn frame_lookup_checks_range() {
        let frames: Vec<Frame> = (1..=3).map(|i| Frame::from_fn(i, 4, 4, |_, _| 0.0).unwrap()).collect();
        assert_eq!(frame_at(&frames, 2).unwrap().index(), 2);
        assert!(frame_at(&frames, 0).is_err());
        assert!(frame_at(&frames, 4).is_err());
    }
}
