use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One entry of a playout timeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PlayoutEvent {
    /// Source frames `first..=last` played at `bitrate_kbps`.
    Play {
        #[serde(rename = "first")]
        first_src_frame: usize,
        #[serde(rename = "last")]
        last_src_frame: usize,
        bitrate_kbps: f64,
    },
    /// Playback freezes for `duration_s` before source frame `at` is shown.
    Stall {
        #[serde(rename = "at")]
        at_src_frame: usize,
        duration_s: f64,
    },
}

/// A distorted session: bitrate segments interleaved with stalls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayoutPattern {
    pub pattern_id: String,
    pub fps: f64,
    pub source_frame_count: usize,
    pub reference_bitrate_kbps: f64,
    pub events: Vec<PlayoutEvent>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpanKind {
    Play { bitrate_kbps: f64, first: usize, last: usize },
    Stall { at: usize },
}

/// A contiguous piece of the displayed timeline, in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Span {
    pub kind: SpanKind,
    pub start_s: f64,
    pub duration_s: f64,
}

impl Span {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }
}

impl PlayoutPattern {
    pub fn new(
        pattern_id: impl Into<String>,
        fps: f64,
        source_frame_count: usize,
        reference_bitrate_kbps: f64,
        events: Vec<PlayoutEvent>,
    ) -> Result<Self> {
        let p = PlayoutPattern {
            pattern_id: pattern_id.into(),
            fps,
            source_frame_count,
            reference_bitrate_kbps,
            events,
        };
        p.validate()?;
        Ok(p)
    }

    /// A pattern that plays every frame at the reference bitrate.
    pub fn clean(pattern_id: impl Into<String>, fps: f64, frames: usize, bitrate_kbps: f64) -> Result<Self> {
        Self::new(
            pattern_id,
            fps,
            frames,
            bitrate_kbps,
            vec![PlayoutEvent::Play {
                first_src_frame: 0,
                last_src_frame: frames.saturating_sub(1),
                bitrate_kbps,
            }],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPattern(format!("{}: {msg}", self.pattern_id)));
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if self.source_frame_count == 0 {
            return bad("source_frame_count must be at least 1".into());
        }
        if !(self.reference_bitrate_kbps.is_finite() && self.reference_bitrate_kbps > 0.0) {
            return bad("reference bitrate must be positive".into());
        }
        let n = self.source_frame_count;
        let mut cursor = 0usize;
        for (k, ev) in self.events.iter().enumerate() {
            match *ev {
                PlayoutEvent::Play {
                    first_src_frame,
                    last_src_frame,
                    bitrate_kbps,
                } => {
                    if first_src_frame != cursor {
                        return bad(format!(
                            "event {k}: play starts at frame {first_src_frame}, expected {cursor}"
                        ));
                    }
                    if last_src_frame < first_src_frame || last_src_frame >= n {
                        return bad(format!(
                            "event {k}: play range {first_src_frame}..={last_src_frame} outside 0..{n}"
                        ));
                    }
                    if !(bitrate_kbps.is_finite()
                        && bitrate_kbps > 0.0
                        && bitrate_kbps <= self.reference_bitrate_kbps)
                    {
                        return bad(format!(
                            "event {k}: bitrate {bitrate_kbps} outside (0, {}]",
                            self.reference_bitrate_kbps
                        ));
                    }
                    cursor = last_src_frame + 1;
                }
                PlayoutEvent::Stall {
                    at_src_frame,
                    duration_s,
                } => {
                    if !(duration_s.is_finite() && duration_s > 0.0) {
                        return bad(format!("event {k}: stall duration {duration_s} must be positive"));
                    }
                    if at_src_frame != cursor {
                        return bad(format!(
                            "event {k}: stall at frame {at_src_frame} but playback is at frame {cursor}"
                        ));
                    }
                    if at_src_frame >= n {
                        return bad(format!("event {k}: trailing stall after the last source frame"));
                    }
                }
            }
        }
        if cursor != n {
            return bad(format!("play segments cover 0..{cursor}, expected 0..{n}"));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: PlayoutPattern = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("pattern serializes")
    }

    pub fn content_duration_s(&self) -> f64 {
        self.source_frame_count as f64 / self.fps
    }

    pub fn stalls(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.events.iter().filter_map(|e| match *e {
            PlayoutEvent::Stall {
                at_src_frame,
                duration_s,
            } => Some((at_src_frame, duration_s)),
            _ => None,
        })
    }

    pub fn stall_count(&self) -> usize {
        self.stalls().count()
    }

    pub fn total_stall_s(&self) -> f64 {
        self.stalls().map(|(_, d)| d).fold(0.0, |a, d| a + d)
    }

    /// True when the pattern uses more than one bitrate.
    pub fn has_bitrate_variation(&self) -> bool {
        let mut rates = self.events.iter().filter_map(|e| match *e {
            PlayoutEvent::Play { bitrate_kbps, .. } => Some(bitrate_kbps),
            _ => None,
        });
        match rates.next() {
            Some(first) => rates.any(|r| r != first),
            None => false,
        }
    }

    /// Bitrate in effect for each source frame.
    pub fn frame_bitrates(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.source_frame_count];
        for e in &self.events {
            if let PlayoutEvent::Play {
                first_src_frame,
                last_src_frame,
                bitrate_kbps,
            } = *e
            {
                out[first_src_frame..=last_src_frame].fill(bitrate_kbps);
            }
        }
        out
    }

    /// The displayed timeline with exact (unrounded) stall durations.
    pub fn timeline(&self) -> Vec<Span> {
        let mut t = 0.0;
        let mut spans = Vec::with_capacity(self.events.len());
        for e in &self.events {
            let (kind, duration_s) = match *e {
                PlayoutEvent::Play {
                    first_src_frame,
                    last_src_frame,
                    bitrate_kbps,
                } => (
                    SpanKind::Play {
                        bitrate_kbps,
                        first: first_src_frame,
                        last: last_src_frame,
                    },
                    (last_src_frame - first_src_frame + 1) as f64 / self.fps,
                ),
                PlayoutEvent::Stall {
                    at_src_frame,
                    duration_s,
                } => (SpanKind::Stall { at: at_src_frame }, duration_s),
            };
            spans.push(Span {
                kind,
                start_s: t,
                duration_s,
            });
            t += duration_s;
        }
        spans
    }
}

/// Content time plus all stall time, in seconds.
pub fn displayed_duration(pattern: &PlayoutPattern) -> f64 {
    pattern.content_duration_s() + pattern.total_stall_s()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn play(first: usize, last: usize, rate: f64) -> PlayoutEvent {
        PlayoutEvent::Play {
            first_src_frame: first,
            last_src_frame: last,
            bitrate_kbps: rate,
        }
    }

    fn stall(at: usize, d: f64) -> PlayoutEvent {
        PlayoutEvent::Stall {
            at_src_frame: at,
            duration_s: d,
        }
    }

    #[test]
    fn durations() {
        let p = PlayoutPattern::clean("a", 5.0, 300, 1000.0).unwrap();
        assert_eq!(displayed_duration(&p), 60.0);

        let p = PlayoutPattern::new(
            "b",
            5.0,
            300,
            1000.0,
            vec![play(0, 149, 1000.0), stall(150, 6.0), play(150, 299, 1000.0)],
        )
        .unwrap();
        assert_eq!(displayed_duration(&p), 66.0);

        let p = PlayoutPattern::new(
            "c",
            5.0,
            150,
            1000.0,
            vec![
                play(0, 49, 1000.0),
                stall(50, 2.0),
                play(50, 99, 500.0),
                stall(100, 3.0),
                play(100, 149, 1000.0),
            ],
        )
        .unwrap();
        assert_eq!(displayed_duration(&p), 35.0);
    }

    #[test]
    fn rejects_gaps_overlaps_and_trailing_stalls() {
        let gap = PlayoutPattern::new("g", 5.0, 10, 100.0, vec![play(0, 3, 100.0), play(5, 9, 100.0)]);
        assert!(matches!(gap, Err(Error::InvalidPattern(_))));
        let overlap = PlayoutPattern::new("o", 5.0, 10, 100.0, vec![play(0, 5, 100.0), play(5, 9, 100.0)]);
        assert!(overlap.is_err());
        let short = PlayoutPattern::new("s", 5.0, 10, 100.0, vec![play(0, 8, 100.0)]);
        assert!(short.is_err());
        let trailing = PlayoutPattern::new("t", 5.0, 10, 100.0, vec![play(0, 9, 100.0), stall(10, 1.0)]);
        assert!(trailing.is_err());
        let misplaced = PlayoutPattern::new("m", 5.0, 10, 100.0, vec![play(0, 9, 100.0), stall(4, 1.0)]);
        assert!(misplaced.is_err());
        let zero = PlayoutPattern::new("z", 5.0, 10, 100.0, vec![stall(0, 0.0), play(0, 9, 100.0)]);
        assert!(zero.is_err());
        let too_fast = PlayoutPattern::new("r", 5.0, 10, 100.0, vec![play(0, 9, 200.0)]);
        assert!(too_fast.is_err());
    }

    #[test]
    fn json_schema() {
        let s = r#"{"pattern_id":"p1","fps":5,"source_frame_count":20,"reference_bitrate_kbps":3000,
            "events":[{"type":"play","first":0,"last":9,"bitrate_kbps":3000},
                      {"type":"stall","at":10,"duration_s":2.0},
                      {"type":"play","first":10,"last":19,"bitrate_kbps":750}]}"#;
        let p = PlayoutPattern::from_json_str(s).unwrap();
        assert_eq!(p.stall_count(), 1);
        assert!(p.has_bitrate_variation());
        let back = PlayoutPattern::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(back, p);
        let v: serde_json::Value = serde_json::from_str(&p.to_json_string()).unwrap();
        assert_eq!(v["events"][1]["type"], "stall");
        assert_eq!(v["events"][1]["at"], 10);
    }

    #[test]
    fn timeline_positions() {
        let p = PlayoutPattern::new(
            "t",
            2.0,
            10,
            100.0,
            vec![play(0, 3, 100.0), stall(4, 1.5), play(4, 9, 50.0)],
        )
        .unwrap();
        let tl = p.timeline();
        assert_eq!(tl.len(), 3);
        assert_eq!(tl[1].start_s, 2.0);
        assert_eq!(tl[2].start_s, 3.5);
        assert_eq!(tl[2].end_s(), 6.5);
    }
}
