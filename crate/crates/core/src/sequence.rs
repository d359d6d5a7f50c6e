//! OTB-layout sequences and the results CSV format.
//!
//! A sequence directory holds `img/` with zero-padded numbered images and
//! `groundtruth_rect.txt` with one `x,y,w,h` line per frame (commas, tabs or
//! spaces). Coordinates are kept as written, without shifting to 0-based.
//! An optional `attributes.txt` lists challenge tags such as `OCC, FM`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Frame};
use crate::pipeline::TrackingResult;

const IMG_DIR: &str = "img";
const GROUNDTRUTH: &str = "groundtruth_rect.txt";
const ATTRIBUTES: &str = "attributes.txt";

/// Challenge factors used to break results down by scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Attribute {
    /// Illumination variation.
    Iv,
    /// Scale variation.
    Sv,
    /// Occlusion.
    Occ,
    /// Deformation.
    Def,
    /// Motion blur.
    Mb,
    /// Fast motion.
    Fm,
    /// In-plane rotation.
    Ipr,
    /// Out-of-plane rotation.
    Opr,
    /// Out of view.
    Ov,
    /// Background clutter.
    Bc,
    /// Low resolution.
    Lr,
}

impl Attribute {
    pub const ALL: [Attribute; 11] = [
        Attribute::Iv,
        Attribute::Sv,
        Attribute::Occ,
        Attribute::Def,
        Attribute::Mb,
        Attribute::Fm,
        Attribute::Ipr,
        Attribute::Opr,
        Attribute::Ov,
        Attribute::Bc,
        Attribute::Lr,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Attribute::Iv => "IV",
            Attribute::Sv => "SV",
            Attribute::Occ => "OCC",
            Attribute::Def => "DEF",
            Attribute::Mb => "MB",
            Attribute::Fm => "FM",
            Attribute::Ipr => "IPR",
            Attribute::Opr => "OPR",
            Attribute::Ov => "OV",
            Attribute::Bc => "BC",
            Attribute::Lr => "LR",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        Attribute::ALL
            .into_iter()
            .find(|a| a.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown attribute '{s}'"))
    }
}

/// Frames with optional per-frame ground truth; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    frames: Vec<Frame>,
    ground_truth: Option<Vec<BoundingBox>>,
    pub attributes: Vec<Attribute>,
}

impl Sequence {
    pub fn new(name: impl Into<String>, frames: Vec<Frame>, ground_truth: Option<Vec<BoundingBox>>, attributes: Vec<Attribute>) -> Result<Self> {
        let name = name.into();
        let bad = |reason: String| Error::Sequence {
            path: PathBuf::from(&name),
            reason,
        };
        if frames.is_empty() {
            return Err(bad("no frames".into()));
        }
        if let Some((i, f)) = frames.iter().enumerate().find(|(i, f)| f.index() != i + 1) {
            return Err(bad(format!("frame at position {} has index {}", i + 1, f.index())));
        }
        if let Some(gt) = &ground_truth {
            if gt.len() != frames.len() {
                return Err(bad(format!("{} frames but {} ground-truth boxes", frames.len(), gt.len())));
            }
        }
        Ok(Self {
            name,
            frames,
            ground_truth,
            attributes,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn ground_truth(&self) -> Option<&[BoundingBox]> {
        self.ground_truth.as_deref()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "jpg" | "jpeg" | "png"))
}

fn decode_frame(path: &Path, index: usize) -> Result<Frame> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        image::DynamicImage::ImageLuma8(gray) => {
            let pixels = gray.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
            Frame::new(index, w, h, pixels)
        }
        other => Frame::from_rgb8(index, w, h, other.to_rgb8().as_raw()),
    }
}

/// Parses one ground-truth line; fields may be separated by commas, tabs
/// or spaces.
pub fn parse_box_line(line: &str) -> std::result::Result<BoundingBox, String> {
    let fields: Vec<&str> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let mut v = [0.0; 4];
    for (slot, field) in v.iter_mut().zip(&fields) {
        *slot = field.parse::<f64>().map_err(|_| format!("'{field}' is not a number"))?;
    }
    BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<BoundingBox>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_box_line(l).map_err(|reason| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            })
        })
        .collect()
}

/// Loads `<dir>/img/*` in file-name order plus `<dir>/groundtruth_rect.txt`
/// when present. A sequence without annotations can still be tracked from
/// an explicit initial box.
pub fn load_otb(dir: &Path) -> Result<Sequence> {
    let img_dir = dir.join(IMG_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&img_dir)
        .map_err(|e| Error::io(&img_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| is_image(p))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Sequence {
            path: img_dir,
            reason: "no JPEG/PNG frames".into(),
        });
    }
    let gt_path = dir.join(GROUNDTRUTH);
    let ground_truth = if gt_path.exists() { Some(read_ground_truth(&gt_path)?) } else { None };
    if let Some(gt) = &ground_truth {
        if gt.len() != paths.len() {
            return Err(Error::Sequence {
                path: dir.to_path_buf(),
                reason: format!("{} frames but {} ground-truth lines", paths.len(), gt.len()),
            });
        }
    }
    let frames = paths
        .iter()
        .enumerate()
        .map(|(i, p)| decode_frame(p, i + 1))
        .collect::<Result<Vec<_>>>()?;

    let attr_path = dir.join(ATTRIBUTES);
    let attributes = if attr_path.exists() {
        let text = fs::read_to_string(&attr_path).map_err(|e| Error::io(&attr_path, e))?;
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|reason| Error::Parse {
                    path: attr_path.clone(),
                    line: 1,
                    reason,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Sequence::new(name, frames, ground_truth, attributes)
}

/// Writes a sequence in OTB layout with 8-bit grayscale PNG frames.
pub fn save_otb(seq: &Sequence, dir: &Path) -> Result<()> {
    let img_dir = dir.join(IMG_DIR);
    fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    for frame in seq.frames() {
        let path = img_dir.join(format!("{:04}.png", frame.index()));
        let bytes: Vec<u8> = frame.pixels().iter().map(|&v| (v * 255.0).round() as u8).collect();
        let img = image::GrayImage::from_raw(frame.width() as u32, frame.height() as u32, bytes)
            .expect("pixel buffer matches frame dimensions");
        img.save(&path).map_err(|source| Error::Image { path, source })?;
    }
    if let Some(gt) = seq.ground_truth() {
        let path = dir.join(GROUNDTRUTH);
        let text: String = gt.iter().map(|b| format!("{},{},{},{}\n", b.x, b.y, b.w, b.h)).collect();
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    if !seq.attributes.is_empty() {
        let path = dir.join(ATTRIBUTES);
        let text = seq.attributes.iter().map(|a| a.code()).collect::<Vec<_>>().join(",");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Formats with six significant digits, trailing zeros trimmed (like `%g`
/// for the magnitudes that occur in image coordinates).
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        return format!("{:.5e}", v);
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, v);
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" { "0".into() } else { s }
}

const RESULT_HEADER: &str = "frame,x,y,w,h";

pub fn write_result<W: Write>(mut out: W, result: &TrackingResult) -> std::io::Result<()> {
    writeln!(out, "{RESULT_HEADER}")?;
    for (i, b) in result.boxes.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            format_sig6(b.x),
            format_sig6(b.y),
            format_sig6(b.w),
            format_sig6(b.h)
        )?;
    }
    Ok(())
}

pub fn save_result(path: &Path, result: &TrackingResult) -> Result<()> {
    let mut buf = Vec::new();
    write_result(&mut buf, result).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a results CSV back. Diagnostics are not part of the format.
pub fn load_result(path: &Path) -> Result<TrackingResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut boxes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == RESULT_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(parse_err(line_no, format!("expected 5 columns, found {}", fields.len())));
        }
        let frame: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad frame index '{}'", fields[0])))?;
        if frame != boxes.len() + 1 {
            return Err(parse_err(line_no, format!("expected frame {}, found {frame}", boxes.len() + 1)));
        }
        let b = parse_box_line(&fields[1..].join(",")).map_err(|r| parse_err(line_no, r))?;
        boxes.push(b);
    }
    Ok(TrackingResult {
        boxes,
        windows: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comma_and_tab_lines() {
        let b = parse_box_line("12,34,56,78").unwrap();
        assert_eq!((b.x, b.y, b.w, b.h), (12.0, 34.0, 56.0, 78.0));
        assert_eq!(parse_box_line("12\t34\t56\t78").unwrap(), b);
        assert_eq!(parse_box_line(" 12, 34 ,56,78 ").unwrap(), b);
        assert!(parse_box_line("12,34,56").is_err());
        assert!(parse_box_line("12,34,x,78").is_err());
        assert!(parse_box_line("12,34,0,78").is_err());
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(12.3456789), "12.3457");
        assert_eq!(format_sig6(12.0), "12");
        assert_eq!(format_sig6(-3.5), "-3.5");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
    }

    #[test]
    fn attribute_codes_round_trip() {
        for a in Attribute::ALL {
            assert_eq!(a.code().parse::<Attribute>().unwrap(), a);
        }
        assert!("XYZ".parse::<Attribute>().is_err());
    }

    #[test]
    fn sequence_checks_lengths() {
        let frames: Vec<Frame> = (1..=3).map(|i| Frame::from_fn(i, 4, 4, |_, _| 0.5).unwrap()).collect();
        let gt = vec![BoundingBox::new(0.0, 0.0, 2.0, 2.0).unwrap(); 2];
        assert!(Sequence::new("s", frames.clone(), Some(gt), vec![]).is_err());
        let shuffled = vec![frames[1].clone(), frames[0].clone()];
        assert!(Sequence::new("s", shuffled, None, vec![]).is_err());
        assert!(Sequence::new("s", frames, None, vec![]).is_ok());
    }
}
