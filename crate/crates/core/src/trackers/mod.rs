//! Concrete base trackers behind the [`crate::tracker::Tracker`] contract.

mod dcf;
mod ncc;

pub use dcf::{wrap_offset, DcfModel, DcfParams};
pub use ncc::{zncc, NccModel, NccParams};
