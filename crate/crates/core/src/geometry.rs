//! Boxes, frames and patches shared by every tracker and scoring routine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in image pixel coordinates (left, top, width, height).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let ok = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0;
        if !ok {
            return Err(Error::InvalidBox { x, y, w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Same size, moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Box of size `(w, h)` sharing this box's center.
    pub fn with_size_about_center(&self, w: f64, h: f64) -> Self {
        let (cx, cy) = self.center();
        Self {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    /// Euclidean distance between the two centers.
    pub fn center_distance(&self, other: &BoundingBox) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        (ax - bx).hypot(ay - by)
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Canonical resampling grid, rows × columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSize {
    pub height: usize,
    pub width: usize,
}

impl PatchSize {
    pub const fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for PatchSize {
    fn default() -> Self {
        Self::new(32, 32)
    }
}

/// Grayscale image with intensities in `[0, 1]`, row-major, plus its
/// 1-based position in the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    index: usize,
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(index: usize, width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame {
                index,
                reason: format!("empty dimensions {width}x{height}"),
            });
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidFrame {
                index,
                reason: format!("expected {} pixels, got {}", width * height, pixels.len()),
            });
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidFrame {
                index,
                reason: format!("intensity {bad} outside [0, 1]"),
            });
        }
        Ok(Self {
            index,
            width,
            height,
            pixels,
        })
    }

    /// Builds a frame by evaluating `f(col, row)`; values are clamped to `[0, 1]`.
    pub fn from_fn(index: usize, width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                pixels.push(f(col, row).clamp(0.0, 1.0));
            }
        }
        Self::new(index, width, height, pixels)
    }

    /// Converts interleaved 8-bit RGB to luma.
    pub fn from_rgb8(index: usize, width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::InvalidFrame {
                index,
                reason: format!("expected {} RGB bytes, got {}", width * height * 3, rgb.len()),
            });
        }
        let pixels = rgb.chunks_exact(3).map(|p| to_grayscale(p[0], p[1], p[2])).collect();
        Self::new(index, width, height, pixels)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Same pixels under a different sequence index.
    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    /// Bilinear sample at a real-valued position, replicating edge pixels
    /// outside the image.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let tx = Tap::at(x, self.width);
        let ty = Tap::at(y, self.height);
        let top = tx.lerp(self.row(ty.lo));
        let bottom = tx.lerp(self.row(ty.hi));
        top * (1.0 - ty.frac) + bottom * ty.frac
    }

    pub(crate) fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }
}

/// Bilinear tap along one axis: neighbouring indices and the weight of the
/// upper one, with coordinates clamped to the image.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tap {
    pub lo: usize,
    pub hi: usize,
    pub frac: f64,
}

impl Tap {
    pub(crate) fn at(coord: f64, len: usize) -> Self {
        let v = coord.clamp(0.0, (len - 1) as f64);
        let floor = v.floor();
        let lo = floor as usize;
        Self {
            lo,
            hi: (lo + 1).min(len - 1),
            frac: v - floor,
        }
    }

    pub(crate) fn lerp(&self, line: &[f64]) -> f64 {
        line[self.lo] * (1.0 - self.frac) + line[self.hi] * self.frac
    }
}

/// Image coordinate sampled for patch cell `i` of a box starting at `origin`.
pub(crate) fn cell_coord(origin: f64, scale: f64, i: usize) -> f64 {
    origin + ((i as f64 + 0.5) * scale - 0.5)
}

/// Fixed-size resampling of the image region under a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub size: PatchSize,
    pub pixels: Vec<f64>,
    pub source_box: BoundingBox,
}

impl Patch {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.size.width + col]
    }
}

/// Resamples the region under `bbox` onto a `size` grid. Output pixel
/// centers are spread uniformly over the box; positions outside the image
/// take the nearest edge value.
pub fn extract_patch(frame: &Frame, bbox: &BoundingBox, size: PatchSize) -> Patch {
    let mut pixels = vec![0.0; size.len()];
    extract_into(frame, bbox, size, &mut pixels);
    Patch {
        size,
        pixels,
        source_box: *bbox,
    }
}

/// Allocation-free variant of [`extract_patch`] for hot loops.
pub(crate) fn extract_into(frame: &Frame, bbox: &BoundingBox, size: PatchSize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), size.len());
    let sx = bbox.w / size.width as f64;
    let sy = bbox.h / size.height as f64;
    for row in 0..size.height {
        let y = cell_coord(bbox.y, sy, row);
        let dst = &mut out[row * size.width..(row + 1) * size.width];
        for (col, v) in dst.iter_mut().enumerate() {
            let x = cell_coord(bbox.x, sx, col);
            *v = frame.sample(x, y);
        }
    }
}

/// ITU-R BT.601 luma of an 8-bit RGB triple, scaled to `[0, 1]`.
pub fn to_grayscale(r: u8, g: u8, b: u8) -> f64 {
    ((0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0).clamp(0.0, 1.0)
}
