//! Deterministic synthetic sequences with exact ground truth.
//!
//! A value-noise target is composited over a smoother value-noise
//! background and moved along piecewise-linear waypoints. Occlusions paint
//! background over (part of) the target; a per-frame gain and Gaussian
//! sensor noise follow. Frames are quantized to 8 bits so a sequence
//! written as PNGs reloads bit-identically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Frame};
use crate::sequence::{Attribute, Sequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub frame: usize,
    /// Target left edge.
    pub x: f64,
    /// Target top edge.
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    /// Fraction of the target width hidden, from the left edge; 1 is full cover.
    #[serde(default = "full_cover")]
    pub cover: f64,
}

fn full_cover() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainPoint {
    pub frame: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub name: String,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub target_w: usize,
    pub target_h: usize,
    /// Seed of both textures.
    pub texture_seed: u64,
    /// Seed of the sensor noise.
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Value-noise cell size of the background texture, in pixels.
    #[serde(default = "default_background_cell")]
    pub background_cell: usize,
    /// Value-noise cell size of the target texture, in pixels.
    #[serde(default = "default_target_cell")]
    pub target_cell: usize,
    /// Intensity range of the background texture.
    #[serde(default = "default_background_range")]
    pub background_range: [f64; 2],
    /// Intensity range of the target texture.
    #[serde(default = "default_target_range")]
    pub target_range: [f64; 2],
    pub waypoints: Vec<Waypoint>,
    #[serde(default)]
    pub occlusions: Vec<Occlusion>,
    /// Multiplicative gain, interpolated linearly; 1 when empty.
    #[serde(default)]
    pub gain: Vec<GainPoint>,
    #[serde(default)]
    pub attributes: Vec<Attribute>,
}

fn default_background_cell() -> usize {
    12
}

fn default_target_cell() -> usize {
    4
}

fn default_background_range() -> [f64; 2] {
    [0.2, 0.8]
}

fn default_target_range() -> [f64; 2] {
    [0.0, 1.0]
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::param("synth", msg));
        if self.frames < 1 {
            return fail("at least one frame required".into());
        }
        if self.width == 0 || self.height == 0 {
            return fail("empty image".into());
        }
        if self.target_w < 2 || self.target_h < 2 || self.target_w * self.target_h < 4 {
            return fail("target must be at least 2x2".into());
        }
        if self.background_cell == 0 || self.target_cell == 0 {
            return fail("texture cell sizes must be positive".into());
        }
        for (name, [lo, hi]) in [("background_range", self.background_range), ("target_range", self.target_range)] {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return fail(format!("{name} [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise_sigma {} must be non-negative", self.noise_sigma));
        }
        let in_range = |f: usize| (1..=self.frames).contains(&f);
        if self.waypoints.is_empty() {
            return fail("at least one waypoint required".into());
        }
        if self.waypoints.windows(2).any(|w| w[1].frame <= w[0].frame) {
            return fail("waypoint frames must be strictly increasing".into());
        }
        if let Some(w) = self.waypoints.iter().find(|w| !in_range(w.frame) || !w.x.is_finite() || !w.y.is_finite()) {
            return fail(format!("waypoint at frame {} outside 1..={} or not finite", w.frame, self.frames));
        }
        for o in &self.occlusions {
            if o.start > o.end || !in_range(o.start) || !in_range(o.end) {
                return fail(format!("occlusion {}..={} outside 1..={}", o.start, o.end, self.frames));
            }
            if !(o.cover > 0.0 && o.cover <= 1.0) {
                return fail(format!("occlusion cover {} outside (0, 1]", o.cover));
            }
        }
        if self.gain.windows(2).any(|w| w[1].frame <= w[0].frame) {
            return fail("gain frames must be strictly increasing".into());
        }
        if let Some(g) = self.gain.iter().find(|g| !in_range(g.frame) || !(g.gain > 0.0)) {
            return fail(format!("gain point at frame {} invalid (gain must be > 0)", g.frame));
        }
        Ok(())
    }

    /// Integer target position at frame `t`.
    pub fn position(&self, t: usize) -> (i64, i64) {
        let (x, y) = interpolate(&self.waypoints, t, |w| (w.frame, (w.x, w.y)));
        (x.round() as i64, y.round() as i64)
    }

    pub fn gain_at(&self, t: usize) -> f64 {
        if self.gain.is_empty() {
            return 1.0;
        }
        interpolate(&self.gain, t, |g| (g.frame, (g.gain, 0.0))).0
    }

    /// Hidden fraction of the target at frame `t`.
    pub fn cover_at(&self, t: usize) -> f64 {
        self.occlusions
            .iter()
            .filter(|o| (o.start..=o.end).contains(&t))
            .map(|o| o.cover)
            .fold(0.0, f64::max)
    }

    pub fn ground_truth(&self, t: usize) -> BoundingBox {
        let (x, y) = self.position(t);
        BoundingBox {
            x: x as f64,
            y: y as f64,
            w: self.target_w as f64,
            h: self.target_h as f64,
        }
    }
}

fn interpolate<T>(points: &[T], t: usize, key: impl Fn(&T) -> (usize, (f64, f64))) -> (f64, f64) {
    let first = key(&points[0]);
    if t <= first.0 {
        return first.1;
    }
    for pair in points.windows(2) {
        let (f0, (a0, b0)) = key(&pair[0]);
        let (f1, (a1, b1)) = key(&pair[1]);
        if t <= f1 {
            let s = (t - f0) as f64 / (f1 - f0) as f64;
            return (a0 + s * (a1 - a0), b0 + s * (b1 - b0));
        }
    }
    key(points.last().unwrap()).1
}

/// Bilinearly interpolated random lattice.
struct ValueNoise {
    cell: usize,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, width: usize, height: usize, cell: usize, lo: f64, hi: f64) -> Self {
        let cols = width / cell + 2;
        let rows = height / cell + 2;
        let lattice = (0..cols * rows).map(|_| rng.random_range(lo..hi)).collect();
        Self { cell, cols, lattice }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        let (gx, gy) = (x / self.cell, y / self.cell);
        let fx = (x % self.cell) as f64 / self.cell as f64;
        let fy = (y % self.cell) as f64 / self.cell as f64;
        let v = |c: usize, r: usize| self.lattice[r * self.cols + c];
        let top = v(gx, gy) * (1.0 - fx) + v(gx + 1, gy) * fx;
        let bottom = v(gx, gy + 1) * (1.0 - fx) + v(gx + 1, gy + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

struct Scene {
    background: ValueNoise,
    target: ValueNoise,
}

impl Scene {
    fn new(spec: &SynthSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.texture_seed);
        let background = ValueNoise::new(&mut rng, spec.width, spec.height, spec.background_cell, spec.background_range[0], spec.background_range[1]);
        let target = ValueNoise::new(&mut rng, spec.target_w, spec.target_h, spec.target_cell, spec.target_range[0], spec.target_range[1]);
        Self { background, target }
    }

    /// Noise-free intensity at `(col, row)` of frame `t`.
    fn clean(&self, spec: &SynthSpec, t: usize, col: usize, row: usize, with_target: bool) -> f64 {
        let (tx, ty) = spec.position(t);
        let (lc, lr) = (col as i64 - tx, row as i64 - ty);
        let on_target = with_target && (0..spec.target_w as i64).contains(&lc) && (0..spec.target_h as i64).contains(&lr);
        if on_target {
            let hidden = (spec.cover_at(t) * spec.target_w as f64).round() as i64;
            if lc >= hidden {
                return self.target.at(lc as usize, lr as usize);
            }
        }
        self.background.at(col, row)
    }
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Renders the sequence described by `spec`.
pub fn generate_synth(spec: &SynthSpec) -> Result<Sequence> {
    spec.validate()?;
    let scene = Scene::new(spec);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut frames = Vec::with_capacity(spec.frames);
    for t in 1..=spec.frames {
        let gain = spec.gain_at(t);
        let mut pixels = Vec::with_capacity(spec.width * spec.height);
        for row in 0..spec.height {
            for col in 0..spec.width {
                let mut v = scene.clean(spec, t, col, row, true) * gain;
                if spec.noise_sigma > 0.0 {
                    v += normal.sample(&mut noise_rng);
                }
                pixels.push(quantize(v));
            }
        }
        frames.push(Frame::new(t, spec.width, spec.height, pixels)?);
    }
    let gt = (1..=spec.frames).map(|t| spec.ground_truth(t)).collect();
    Sequence::new(spec.name.clone(), frames, Some(gt), spec.attributes.clone())
}

/// Noise-free, gain-free rendering of frame `t`, optionally without the
/// target. Useful as a reference when checking occlusions.
pub fn render_clean(spec: &SynthSpec, t: usize, with_target: bool) -> Result<Frame> {
    spec.validate()?;
    let scene = Scene::new(spec);
    Frame::from_fn(t, spec.width, spec.height, |c, r| quantize(scene.clean(spec, t, c, r, with_target)))
}

/// First hidden frame of every occlusion-suite sequence.
pub const SUITE_ONSET: usize = 22;
/// Number of hidden frames in every occlusion-suite sequence.
pub const SUITE_HIDDEN: usize = 20;
/// Length of every occlusion-suite sequence.
pub const SUITE_FRAMES: usize = 120;

/// Sequence `index` of the occlusion suite: a 32x32 target on a busy
/// background, moving at 1.5 px/frame in a random direction, then fully
/// hidden for [`SUITE_HIDDEN`] frames from [`SUITE_ONSET`] while it stands
/// still, then moving on at 0.45 px/frame within one radian of its earlier
/// heading. The path is centred in a 256x224 image.
pub fn occlusion_suite_spec(index: usize) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(77 + index as u64);
    let (width, height) = (256usize, 224usize);
    let side = 32usize;
    let (onset, frames) = (SUITE_ONSET, SUITE_FRAMES);
    let occ_end = onset + SUITE_HIDDEN - 1;
    let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let turn: f64 = heading + rng.random_range(-1.0..1.0);
    let (v1, v2) = (1.5, 0.45);
    let p1 = (v1 * heading.cos() * (onset - 1) as f64, v1 * heading.sin() * (onset - 1) as f64);
    let after = (frames - occ_end) as f64;
    let p2 = (p1.0 + v2 * turn.cos() * after, p1.1 + v2 * turn.sin() * after);
    let mid = |a: f64, b: f64| (0f64.min(a).min(b) + 0f64.max(a).max(b)) / 2.0;
    let ox = (width - side) as f64 / 2.0 - mid(p1.0, p2.0);
    let oy = (height - side) as f64 / 2.0 - mid(p1.1, p2.1);
    SynthSpec {
        name: format!("occlusion-{index:02}"),
        frames,
        width,
        height,
        target_w: side,
        target_h: side,
        texture_seed: 500 + index as u64,
        seed: 900 + index as u64,
        noise_sigma: 0.01,
        background_cell: 3,
        target_cell: 4,
        background_range: [0.0, 1.0],
        target_range: [0.4, 0.6],
        waypoints: vec![
            Waypoint { frame: 1, x: ox, y: oy },
            Waypoint { frame: onset, x: ox + p1.0, y: oy + p1.1 },
            Waypoint { frame: occ_end, x: ox + p1.0, y: oy + p1.1 },
            Waypoint { frame: frames, x: ox + p2.0, y: oy + p2.1 },
        ],
        occlusions: vec![Occlusion { start: onset, end: occ_end, cover: 1.0 }],
        gain: Vec::new(),
        attributes: vec![Attribute::Occ],
    }
}
