//! Single-channel linear correlation filter (MOSSE-style).
//!
//! The filter is kept as a numerator `A` and denominator `B` in the Fourier
//! domain over a fixed grid covering a padded region around the target.
//! Detection correlates the learned filter with the new region and reads the
//! displacement off the response peak, with circular wrap-around.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2d;
use crate::geometry::{extract_patch, BoundingBox, Frame, PatchSize};
use crate::tracker::{BlobReader, BlobWriter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcfParams {
    /// Regularizer added to the denominator.
    pub lambda: f64,
    /// Learning rate of the running numerator/denominator.
    pub eta: f64,
    /// Search region size relative to the target box.
    pub padding: f64,
    /// Label bandwidth as a fraction of `sqrt(w * h)`.
    pub sigma_factor: f64,
    /// Side of the square grid the region is resampled to.
    pub grid: usize,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            eta: 0.02,
            padding: 2.0,
            sigma_factor: 1.0 / 16.0,
            grid: 64,
        }
    }
}

impl DcfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::param("dcf", format!("lambda {} must be positive", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::param("dcf", format!("eta {} outside [0, 1]", self.eta)));
        }
        if !(self.padding >= 1.0) {
            return Err(Error::param("dcf", format!("padding {} must be >= 1", self.padding)));
        }
        if !(self.sigma_factor > 0.0) {
            return Err(Error::param("dcf", "sigma_factor must be positive"));
        }
        if self.grid < 4 {
            return Err(Error::param("dcf", format!("grid {} too small", self.grid)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DcfModel {
    numerator: Vec<Complex64>,
    denominator: Vec<f64>,
    window: Vec<f64>,
    label_spectrum: Vec<Complex64>,
    lambda: f64,
    eta: f64,
    padding: f64,
    grid: usize,
    fft: Fft2d,
}

impl DcfModel {
    /// Trains a fresh filter on the region around `bbox`.
    pub fn new(frame: &Frame, bbox: &BoundingBox, params: &DcfParams) -> Self {
        let grid = params.grid;
        let fft = Fft2d::new(grid, grid);
        let window = hann_window(grid);

        // label bandwidth in grid cells: the image-space sigma scaled by the resampling factor
        let region_w = params.padding * bbox.w;
        let region_h = params.padding * bbox.h;
        let scale = ((grid as f64 / region_w) * (grid as f64 / region_h)).sqrt();
        let sigma = params.sigma_factor * (bbox.w * bbox.h).sqrt() * scale;
        let label = gaussian_label(grid, sigma);
        let label_spectrum = fft.forward_real(&label);

        let mut model = Self {
            numerator: vec![Complex64::new(0.0, 0.0); grid * grid],
            denominator: vec![0.0; grid * grid],
            window,
            label_spectrum,
            lambda: params.lambda,
            eta: params.eta,
            padding: params.padding,
            grid,
            fft,
        };
        let spectrum = model.region_spectrum(frame, bbox);
        for (k, f) in spectrum.iter().enumerate() {
            model.numerator[k] = model.label_spectrum[k] * f.conj();
            model.denominator[k] = f.norm_sqr();
        }
        model
    }

    pub fn numerator(&self) -> &[Complex64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn label_spectrum(&self) -> &[Complex64] {
        &self.label_spectrum
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Real part of the correlation response over the grid, row-major.
    pub fn response(&self, frame: &Frame, anchor: &BoundingBox) -> Vec<f64> {
        let mut spectrum = self.region_spectrum(frame, anchor);
        for (k, z) in spectrum.iter_mut().enumerate() {
            let filter = self.numerator[k] / (self.denominator[k] + self.lambda);
            *z *= filter;
        }
        self.fft.inverse(&mut spectrum);
        spectrum.iter().map(|c| c.re).collect()
    }

    /// Response peak as signed grid offsets `(dx, dy)`.
    pub fn peak_offset(&self, frame: &Frame, anchor: &BoundingBox) -> (i64, i64) {
        let response = self.response(frame, anchor);
        let mut best = 0;
        for (k, &v) in response.iter().enumerate() {
            if v > response[best] {
                best = k;
            }
        }
        let (row, col) = (best / self.grid, best % self.grid);
        (wrap_offset(col, self.grid), wrap_offset(row, self.grid))
    }

    pub fn predict(&self, frame: &Frame, anchor: &BoundingBox) -> BoundingBox {
        let (dx, dy) = self.peak_offset(frame, anchor);
        let cell_w = self.padding * anchor.w / self.grid as f64;
        let cell_h = self.padding * anchor.h / self.grid as f64;
        anchor.translated(dx as f64 * cell_w, dy as f64 * cell_h)
    }

    /// Running-average update of numerator and denominator.
    pub fn update(&mut self, frame: &Frame, bbox: &BoundingBox) {
        if self.eta == 0.0 {
            return;
        }
        let spectrum = self.region_spectrum(frame, bbox);
        let keep = 1.0 - self.eta;
        for (k, f) in spectrum.iter().enumerate() {
            self.numerator[k] = self.numerator[k] * keep + self.label_spectrum[k] * f.conj() * self.eta;
            self.denominator[k] = self.denominator[k] * keep + f.norm_sqr() * self.eta;
        }
    }

    /// FFT of the windowed, mean-subtracted padded region around `bbox`.
    fn region_spectrum(&self, frame: &Frame, bbox: &BoundingBox) -> Vec<Complex64> {
        let region = bbox.with_size_about_center(self.padding * bbox.w, self.padding * bbox.h);
        let patch = extract_patch(frame, &region, PatchSize::new(self.grid, self.grid));
        let mean = patch.pixels.iter().sum::<f64>() / patch.pixels.len() as f64;
        let samples: Vec<f64> = patch
            .pixels
            .iter()
            .zip(&self.window)
            .map(|(v, w)| (v - mean) * w)
            .collect();
        self.fft.forward_real(&samples)
    }

    pub(crate) fn encode(&self, w: &mut BlobWriter) {
        w.f64(self.lambda);
        w.f64(self.eta);
        w.f64(self.padding);
        w.u32(self.grid as u32);
        let flat = |cs: &[Complex64]| cs.iter().flat_map(|c| [c.re, c.im]).collect::<Vec<_>>();
        w.f64s(&flat(&self.numerator));
        w.f64s(&self.denominator);
        w.f64s(&self.window);
        w.f64s(&flat(&self.label_spectrum));
    }

    pub(crate) fn decode(r: &mut BlobReader<'_>) -> Result<Self> {
        let lambda = r.f64()?;
        let eta = r.f64()?;
        let padding = r.f64()?;
        let grid = r.u32()? as usize;
        let cells = grid * grid;
        let complex = |v: Vec<f64>| -> Result<Vec<Complex64>> {
            if v.len() != 2 * cells {
                return Err(Error::StateBlob("spectrum size mismatch".into()));
            }
            Ok(v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
        };
        let numerator = complex(r.f64s()?)?;
        let denominator = r.f64s()?;
        let window = r.f64s()?;
        let label_spectrum = complex(r.f64s()?)?;
        if denominator.len() != cells || window.len() != cells {
            return Err(Error::StateBlob("grid size mismatch".into()));
        }
        Ok(Self {
            numerator,
            denominator,
            window,
            label_spectrum,
            lambda,
            eta,
            padding,
            grid,
            fft: Fft2d::new(grid, grid),
        })
    }
}

/// Maps a circular index to a signed offset: indices past the half-size are
/// negative.
pub fn wrap_offset(index: usize, size: usize) -> i64 {
    if index > size / 2 {
        index as i64 - size as i64
    } else {
        index as i64
    }
}

fn hann_window(n: usize) -> Vec<f64> {
    let taper: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect();
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            out.push(taper[r] * taper[c]);
        }
    }
    out
}

/// Gaussian peaked at grid cell (0, 0) with circular distances, so a zero
/// displacement maps to response index 0.
fn gaussian_label(n: usize, sigma: f64) -> Vec<f64> {
    let dist = |i: usize| wrap_offset(i, n) as f64;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let d2 = dist(r).powi(2) + dist(c).powi(2);
            out.push((-d2 / (2.0 * sigma * sigma)).exp());
        }
    }
    out
}
