use serde::{Deserialize, Serialize};

use super::pattern::{PlayoutEvent, PlayoutPattern};
use crate::error::Result;

/// One displayed frame and the source frame it shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedFrame {
    pub displayed_index: usize,
    pub source_index: usize,
    pub stalled: bool,
}

/// Displayed-frame to source-frame map for a session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAlignment {
    entries: Vec<AlignedFrame>,
}

impl FrameAlignment {
    pub fn entries(&self) -> &[AlignedFrame] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stalled_mask(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.stalled).collect()
    }

    pub fn stalled_count(&self) -> usize {
        self.entries.iter().filter(|e| e.stalled).count()
    }

    /// Number of played (non-stalled) displayed frames.
    pub fn played_count(&self) -> usize {
        self.len() - self.stalled_count()
    }

    /// Frozen frames shown before displayed frame `d`; the `j` in the (i, i+j) pairing.
    pub fn offset(&self, d: usize) -> usize {
        self.entries[..d].iter().filter(|e| e.stalled).count()
    }
}

/// Expands a pattern into its displayed timeline, inserting `round(d * fps)`
/// frozen frames per stall.
pub fn build_alignment(pattern: &PlayoutPattern) -> Result<FrameAlignment> {
    pattern.validate()?;
    let stall_frames: usize = pattern
        .stalls()
        .map(|(_, d)| (d * pattern.fps).round() as usize)
        .sum();
    let mut entries = Vec::with_capacity(pattern.source_frame_count + stall_frames);
    let mut last_shown: Option<usize> = None;
    for ev in &pattern.events {
        match *ev {
            PlayoutEvent::Play {
                first_src_frame,
                last_src_frame,
                ..
            } => {
                for src in first_src_frame..=last_src_frame {
                    entries.push(AlignedFrame {
                        displayed_index: entries.len(),
                        source_index: src,
                        stalled: false,
                    });
                }
                last_shown = Some(last_src_frame);
            }
            PlayoutEvent::Stall {
                at_src_frame,
                duration_s,
            } => {
                let frozen = last_shown.unwrap_or(at_src_frame);
                let count = (duration_s * pattern.fps).round() as usize;
                for _ in 0..count {
                    entries.push(AlignedFrame {
                        displayed_index: entries.len(),
                        source_index: frozen,
                        stalled: true,
                    });
                }
            }
        }
    }
    Ok(FrameAlignment { entries })
}
