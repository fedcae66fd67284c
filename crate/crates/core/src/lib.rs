//! Streaming-video QoE prediction.
//!
//! Sessions are described by a reference video, a distorted rendition and a
//! playout pattern (bitrate segments and stalls). From these the crate
//! derives per-frame quality, pools it, adds rebuffering and memory
//! features, and learns a mapping to mean opinion scores.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod pooling;
pub mod regress;
pub mod rng;
pub mod synth;
pub mod video_io;

pub use error::{Error, Result};
