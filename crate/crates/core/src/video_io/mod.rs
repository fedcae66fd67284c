//! Raw luma video input, playout patterns and the stall-aware frame alignment.

mod alignment;
mod frames;
mod pattern;

pub use alignment::{build_alignment, AlignedFrame, FrameAlignment};
pub use frames::{read_yuv, write_yuv, FrameSequence, LumaPlane, MIN_SIDE};
pub use pattern::{displayed_duration, PlayoutEvent, PlayoutPattern, Span, SpanKind};
