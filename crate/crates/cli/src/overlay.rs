//! Frames with the predicted box drawn in red.

use std::path::Path;

use anyhow::{Context, Result};
use image::{Rgb, RgbImage};
use mts_core::{BoundingBox, Frame};

pub fn render(frame: &Frame, b: &BoundingBox) -> RgbImage {
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let mut img = RgbImage::from_fn(w, h, |c, r| {
        let v = (frame.get(c as usize, r as usize) * 255.0).round() as u8;
        Rgb([v, v, v])
    });
    let red = Rgb([255, 0, 0]);
    let clamp = |v: f64, max: u32| v.round().clamp(0.0, (max - 1) as f64) as u32;
    let (x0, x1) = (clamp(b.x, w), clamp(b.x + b.w - 1.0, w));
    let (y0, y1) = (clamp(b.y, h), clamp(b.y + b.h - 1.0, h));
    for x in x0..=x1 {
        img.put_pixel(x, y0, red);
        img.put_pixel(x, y1, red);
    }
    for y in y0..=y1 {
        img.put_pixel(x0, y, red);
        img.put_pixel(x1, y, red);
    }
    img
}

pub fn write_all(dir: &Path, frames: &[Frame], boxes: &[BoundingBox]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("overlay: cannot create {}", dir.display()))?;
    for (frame, b) in frames.iter().zip(boxes) {
        let path = dir.join(format!("{:04}.png", frame.index()));
        render(frame, b).save(&path).with_context(|| format!("overlay: cannot write {}", path.display()))?;
    }
    Ok(())
}
