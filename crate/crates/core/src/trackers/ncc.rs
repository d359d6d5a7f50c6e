//! Template tracker scored by zero-normalized cross-correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cell_coord, extract_patch, BoundingBox, Frame, Patch, PatchSize, Tap};
use crate::tracker::{BlobReader, BlobWriter};

/// Patches whose summed squared deviation falls below this are treated as flat.
const FLAT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NccParams {
    /// Template learning rate.
    pub eta: f64,
    /// Maximum integer displacement searched per axis. `None` derives it
    /// from the target as `round(0.5 * max(w, h))`.
    pub search_radius: Option<u32>,
    pub patch_size: PatchSize,
}

impl Default for NccParams {
    fn default() -> Self {
        Self {
            eta: 0.1,
            search_radius: None,
            patch_size: PatchSize::default(),
        }
    }
}

impl NccParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::param("ncc", format!("eta {} outside [0, 1]", self.eta)));
        }
        if self.patch_size.is_empty() {
            return Err(Error::param("ncc", "empty patch size"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NccModel {
    template: Patch,
    eta: f64,
    search_radius: u32,
}

impl NccModel {
    pub fn new(frame: &Frame, bbox: &BoundingBox, params: &NccParams) -> Self {
        let search_radius = params
            .search_radius
            .unwrap_or_else(|| (0.5 * bbox.w.max(bbox.h)).round() as u32);
        Self {
            template: extract_patch(frame, bbox, params.patch_size),
            eta: params.eta,
            search_radius,
        }
    }

    pub fn template(&self) -> &Patch {
        &self.template
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn search_radius(&self) -> u32 {
        self.search_radius
    }

    pub fn predict(&self, frame: &Frame, anchor: &BoundingBox) -> BoundingBox {
        let (dx, dy) = self.displacement(frame, anchor);
        anchor.translated(dx as f64, dy as f64)
    }

    /// Integer displacement of the best-matching candidate around `anchor`.
    ///
    /// Highest score wins; ties go to the smaller `|dx| + |dy|`, then to the
    /// first candidate in row-major order. Flat candidates are excluded, and
    /// if every candidate is flat the result is `(0, 0)`.
    pub fn displacement(&self, frame: &Frame, anchor: &BoundingBox) -> (i64, i64) {
        let size = self.template.size;
        let n = size.len() as f64;
        let t_mean = self.template.pixels.iter().sum::<f64>() / n;
        let centered: Vec<f64> = self.template.pixels.iter().map(|v| v - t_mean).collect();
        let t_energy: f64 = centered.iter().map(|v| v * v).sum();
        if t_energy < FLAT_EPS {
            return (0, 0);
        }
        let t_norm = t_energy.sqrt();

        let r = self.search_radius as i64;
        let span = (2 * r + 1) as usize;
        let (pw, ph) = (size.width, size.height);
        let sx = anchor.w / pw as f64;
        let sy = anchor.h / ph as f64;
        // Every candidate is an integer shift of the anchor, so horizontal
        // taps depend only on (dx, col) and can be blended once per frame row.
        let col_taps: Vec<Tap> = (-r..=r)
            .flat_map(|dx| {
                let x0 = anchor.x + dx as f64;
                (0..pw).map(move |c| Tap::at(cell_coord(x0, sx, c), frame.width()))
            })
            .collect();
        let row_taps: Vec<Tap> = (-r..=r)
            .flat_map(|dy| {
                let y0 = anchor.y + dy as f64;
                (0..ph).map(move |row| Tap::at(cell_coord(y0, sy, row), frame.height()))
            })
            .collect();
        let first_row = row_taps.iter().map(|t| t.lo).min().unwrap_or(0);
        let last_row = row_taps.iter().map(|t| t.hi).max().unwrap_or(0);
        let stride = span * pw;
        let mut blended = Vec::with_capacity((last_row + 1 - first_row) * stride);
        for fr in first_row..=last_row {
            let line = frame.row(fr);
            blended.extend(col_taps.iter().map(|t| t.lerp(line)));
        }

        let mut best: Option<(f64, i64, (i64, i64))> = None;
        for (dyi, dy) in (-r..=r).enumerate() {
            let rows = &row_taps[dyi * ph..(dyi + 1) * ph];
            for (dxi, dx) in (-r..=r).enumerate() {
                let (mut s, mut ss, mut st) = (0.0, 0.0, 0.0);
                for (tap, t_row) in rows.iter().zip(centered.chunks_exact(pw)) {
                    let top = &blended[(tap.lo - first_row) * stride + dxi * pw..][..pw];
                    let bottom = &blended[(tap.hi - first_row) * stride + dxi * pw..][..pw];
                    for ((a, b), t) in top.iter().zip(bottom).zip(t_row) {
                        let p = a * (1.0 - tap.frac) + b * tap.frac;
                        s += p;
                        ss += p * p;
                        st += p * t;
                    }
                }
                let p_energy = ss - s * s / n;
                if p_energy < FLAT_EPS {
                    continue;
                }
                let score = (st / (t_norm * p_energy.sqrt())).clamp(-1.0, 1.0);
                let l1 = dx.abs() + dy.abs();
                let better = match best {
                    None => true,
                    Some((bs, bl1, _)) => score > bs || (score == bs && l1 < bl1),
                };
                if better {
                    best = Some((score, l1, (dx, dy)));
                }
            }
        }
        best.map_or((0, 0), |(_, _, d)| d)
    }

    /// `template <- (1 - eta) * template + eta * patch`, element-wise.
    pub fn update(&mut self, frame: &Frame, bbox: &BoundingBox) {
        if self.eta == 0.0 {
            return;
        }
        let patch = extract_patch(frame, bbox, self.template.size);
        let keep = 1.0 - self.eta;
        for (t, p) in self.template.pixels.iter_mut().zip(&patch.pixels) {
            *t = keep * *t + self.eta * p;
        }
        self.template.source_box = *bbox;
    }

    pub(crate) fn encode(&self, w: &mut BlobWriter) {
        w.f64(self.eta);
        w.u32(self.search_radius);
        w.u32(self.template.size.height as u32);
        w.u32(self.template.size.width as u32);
        let b = self.template.source_box;
        for v in [b.x, b.y, b.w, b.h] {
            w.f64(v);
        }
        w.f64s(&self.template.pixels);
    }

    pub(crate) fn decode(r: &mut BlobReader<'_>) -> Result<Self> {
        let eta = r.f64()?;
        let search_radius = r.u32()?;
        let size = PatchSize::new(r.u32()? as usize, r.u32()? as usize);
        let source_box = BoundingBox::new(r.f64()?, r.f64()?, r.f64()?, r.f64()?)
            .map_err(|e| Error::StateBlob(e.to_string()))?;
        let pixels = r.f64s()?;
        if pixels.len() != size.len() {
            return Err(Error::StateBlob("template size mismatch".into()));
        }
        Ok(Self {
            template: Patch {
                size,
                pixels,
                source_box,
            },
            eta,
            search_radius,
        })
    }
}

/// Zero-normalized cross-correlation of two equal-length samples, or `None`
/// when either side is flat.
pub fn zncc(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut num, mut ea, mut eb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        ea += (x - ma) * (x - ma);
        eb += (y - mb) * (y - mb);
    }
    if ea < FLAT_EPS || eb < FLAT_EPS {
        return None;
    }
    Some((num / (ea.sqrt() * eb.sqrt())).clamp(-1.0, 1.0))
}
