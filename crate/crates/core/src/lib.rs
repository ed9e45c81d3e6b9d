//! PPG extraction, heart-rate estimation and pulse-wave user verification
//! for low-frame-rate monochrome fingertip captures.

pub mod bench;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod export;
pub mod frames;
pub mod human_id;
pub mod signal;
pub mod synth;
pub mod vitals;

pub use error::{Error, ErrorKind, Result};
pub use signal::{PeakList, PpgSignal};
