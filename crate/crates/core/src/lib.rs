//! Segment-wise implicit neural representation for monotonic
//! sequence-to-sequence alignment.
//!
//! Each input token is encoded into an embedding `e_u`; a sine-activated
//! coordinate network conditioned on `e_u` emits one output frame per time
//! index until it predicts the end-of-segment class. The full output is the
//! concatenation of all segments.

pub mod data;
pub mod decode;
pub mod error;
pub mod eval;
pub mod net;
pub mod numerics;
pub mod segment;
pub mod train;

pub use error::{Error, Result};
pub use net::{ModelConfig, ModelParams};
pub use segment::{Segment, SegmentedTarget, TokenSequence, VocabSpec};
