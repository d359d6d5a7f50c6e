//! The base-tracker contract wrapped by the ensemble.
//!
//! A tracker is split into a pure localization step ([`Tracker::predict`])
//! and a learning step ([`Tracker::update`]). [`Tracker::snapshot`] produces
//! an independent deep copy, which is all the ensemble needs to fan one
//! tracker out into several paced members.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Frame};
use crate::trackers::{DcfModel, DcfParams, NccModel, NccParams};

/// Interface every base tracker exposes to the ensemble.
pub trait Tracker: Send + Sync + Sized {
    /// Last accepted target location.
    fn current_box(&self) -> BoundingBox;

    /// Localizes the target in `frame` around [`Tracker::current_box`].
    /// Never mutates the model.
    fn predict(&self, frame: &Frame) -> BoundingBox;

    /// Blends the appearance at `(frame, bbox)` into the model and moves
    /// the current box to `bbox`.
    fn update(&mut self, frame: &Frame, bbox: BoundingBox);

    /// Moves the current box without learning. Used by members whose
    /// updates have been paused but which must keep following the target.
    fn relocate(&mut self, bbox: BoundingBox);

    /// Fully independent deep copy.
    fn snapshot(&self) -> Self;

    /// Versioned binary encoding of the complete state.
    fn to_bytes(&self) -> Vec<u8>;

    /// SHA-256 of [`Tracker::to_bytes`], hex encoded.
    fn state_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    Ncc,
    Dcf,
}

impl TrackerKind {
    /// Interval length used with this tracker family when none is configured.
    pub fn default_tau(self) -> usize {
        match self {
            TrackerKind::Ncc => 10,
            TrackerKind::Dcf => 20,
        }
    }

    fn tag(self) -> u8 {
        match self {
            TrackerKind::Ncc => 0,
            TrackerKind::Dcf => 1,
        }
    }
}

impl std::fmt::Display for TrackerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrackerKind::Ncc => "ncc",
            TrackerKind::Dcf => "dcf",
        })
    }
}

impl std::str::FromStr for TrackerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ncc" => Ok(TrackerKind::Ncc),
            "dcf" => Ok(TrackerKind::Dcf),
            other => Err(Error::param("tracker", format!("unknown tracker kind '{other}'"))),
        }
    }
}

/// Base tracker choice plus the parameters of both families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    pub kind: TrackerKind,
    #[serde(default)]
    pub ncc: NccParams,
    #[serde(default)]
    pub dcf: DcfParams,
}

impl TrackerConfig {
    pub fn new(kind: TrackerKind) -> Self {
        Self {
            kind,
            ncc: NccParams::default(),
            dcf: DcfParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ncc.validate()?;
        self.dcf.validate()
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Ncc(NccModel),
    Dcf(DcfModel),
}

/// One concrete base-tracker instance.
#[derive(Debug, Clone)]
pub struct TrackerState {
    model: Model,
    current_box: BoundingBox,
}

impl TrackerState {
    /// Learns a model from `(frame, bbox)` alone.
    pub fn init(frame: &Frame, bbox: BoundingBox, config: &TrackerConfig) -> Result<Self> {
        if bbox.w * bbox.h < 4.0 {
            return Err(Error::DegenerateTarget { w: bbox.w, h: bbox.h });
        }
        config.validate()?;
        let model = match config.kind {
            TrackerKind::Ncc => Model::Ncc(NccModel::new(frame, &bbox, &config.ncc)),
            TrackerKind::Dcf => Model::Dcf(DcfModel::new(frame, &bbox, &config.dcf)),
        };
        Ok(Self {
            model,
            current_box: bbox,
        })
    }

    pub fn kind(&self) -> TrackerKind {
        match self.model {
            Model::Ncc(_) => TrackerKind::Ncc,
            Model::Dcf(_) => TrackerKind::Dcf,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = BlobReader::new(bytes);
        if r.take(4)? != BLOB_MAGIC {
            return Err(Error::StateBlob("bad magic".into()));
        }
        let version = r.u16()?;
        if version != BLOB_VERSION {
            return Err(Error::StateBlob(format!("unsupported version {version}")));
        }
        let tag = r.u8()?;
        let current_box = BoundingBox::new(r.f64()?, r.f64()?, r.f64()?, r.f64()?)
            .map_err(|e| Error::StateBlob(e.to_string()))?;
        let model = match tag {
            0 => Model::Ncc(NccModel::decode(&mut r)?),
            1 => Model::Dcf(DcfModel::decode(&mut r)?),
            t => return Err(Error::StateBlob(format!("unknown kind tag {t}"))),
        };
        if !r.is_empty() {
            return Err(Error::StateBlob("trailing bytes".into()));
        }
        Ok(Self { model, current_box })
    }
}

impl PartialEq for TrackerState {
    /// Bit-level equality of the full state.
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

impl Tracker for TrackerState {
    fn current_box(&self) -> BoundingBox {
        self.current_box
    }

    fn predict(&self, frame: &Frame) -> BoundingBox {
        match &self.model {
            Model::Ncc(m) => m.predict(frame, &self.current_box),
            Model::Dcf(m) => m.predict(frame, &self.current_box),
        }
    }

    fn update(&mut self, frame: &Frame, bbox: BoundingBox) {
        match &mut self.model {
            Model::Ncc(m) => m.update(frame, &bbox),
            Model::Dcf(m) => m.update(frame, &bbox),
        }
        self.current_box = bbox;
    }

    fn relocate(&mut self, bbox: BoundingBox) {
        self.current_box = bbox;
    }

    fn snapshot(&self) -> Self {
        self.clone()
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::default();
        w.bytes(BLOB_MAGIC);
        w.u16(BLOB_VERSION);
        w.u8(self.kind().tag());
        let b = self.current_box;
        for v in [b.x, b.y, b.w, b.h] {
            w.f64(v);
        }
        match &self.model {
            Model::Ncc(m) => m.encode(&mut w),
            Model::Dcf(m) => m.encode(&mut w),
        }
        w.finish()
    }
}

const BLOB_MAGIC: &[u8; 4] = b"MTSS";
const BLOB_VERSION: u16 = 1;

/// Little-endian writer for state blobs.
#[derive(Default)]
pub(crate) struct BlobWriter {
    buf: Vec<u8>,
}

impl BlobWriter {
    pub(crate) fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    pub(crate) fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub(crate) fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn f64s(&mut self, vs: &[f64]) {
        self.u32(vs.len() as u32);
        vs.iter().for_each(|&v| self.f64(v));
    }
    pub(crate) fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct BlobReader<'a> {
    buf: &'a [u8],
}

impl<'a> BlobReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::StateBlob("unexpected end of blob".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub(crate) fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.f64()).collect()
    }
    pub(crate) fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}
