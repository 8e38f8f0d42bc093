//! Hierarchical video-text corpora.
//!
//! A [`LectureVideo`] carries three annotation levels: clips with two
//! narration transcripts each, phase segments (contiguous clip spans) with a
//! concept text, and a single abstract for the whole video.

mod generator;
mod io;
mod sampler;

use serde::{Deserialize, Serialize};

use crate::encoders::{Frame, TextTokens};
use crate::error::{HecvlError, Result};

pub use generator::{generate_synthetic, synthetic_prompts, GeneratorConfig};
pub use io::{load_corpus, read_corpus, save_corpus, write_corpus, SCHEMA};
pub use sampler::{
    sample_clip_batch, sample_phase_batch, sample_video_batch, ClipBatch, ClipEntry, PhaseBatch,
    PhaseEntry, VideoBatch, VideoEntry,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoClip {
    pub frames: Vec<Frame>,
    pub narration_a: TextTokens,
    pub narration_b: TextTokens,
}

/// Half-open clip range `[start, end)` annotated with a concept text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSegment {
    pub start: usize,
    pub end: usize,
    pub concept: TextTokens,
    /// Ground-truth phase class; only used for evaluation.
    pub class: usize,
}

impl PhaseSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, clip: usize) -> bool {
        (self.start..self.end).contains(&clip)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LectureVideo {
    pub video_id: u32,
    pub clips: Vec<VideoClip>,
    pub phases: Vec<PhaseSegment>,
    #[serde(rename = "abstract")]
    pub abstract_text: TextTokens,
}

impl LectureVideo {
    pub fn validate(&self) -> Result<()> {
        let id = self.video_id;
        if self.clips.is_empty() {
            return Err(HecvlError::Contract(format!("video {id} has no clips")));
        }
        for (c, clip) in self.clips.iter().enumerate() {
            if clip.frames.is_empty() {
                return Err(HecvlError::Contract(format!("video {id} clip {c} has no frames")));
            }
        }
        let mut prev_end = 0;
        for (s, seg) in self.phases.iter().enumerate() {
            if seg.start >= seg.end || seg.end > self.clips.len() || seg.start < prev_end {
                return Err(HecvlError::Contract(format!(
                    "video {id} phase {s} has invalid range [{}, {}) (clips {}, previous end {prev_end})",
                    seg.start,
                    seg.end,
                    self.clips.len()
                )));
            }
            prev_end = seg.end;
        }
        Ok(())
    }

    /// Class of the phase covering `clip`, if any.
    pub fn class_of_clip(&self, clip: usize) -> Option<usize> {
        self.phases.iter().find(|p| p.contains(clip)).map(|p| p.class)
    }

    pub fn num_frames(&self) -> usize {
        self.clips.iter().map(|c| c.frames.len()).sum()
    }
}

/// Pair counts per hierarchy level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub clip: usize,
    pub phase: usize,
    pub video: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Generator settings, when the corpus is synthetic.
    pub config: Option<GeneratorConfig>,
    pub videos: Vec<LectureVideo>,
}

impl Corpus {
    pub fn new(config: Option<GeneratorConfig>, videos: Vec<LectureVideo>) -> Result<Self> {
        let c = Self { config, videos };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let mut d_in = None;
        for v in &self.videos {
            v.validate()?;
            for clip in &v.clips {
                for f in &clip.frames {
                    match d_in {
                        None => d_in = Some(f.len()),
                        Some(d) if d != f.len() => {
                            return Err(HecvlError::Contract(format!(
                                "video {} mixes frame widths {d} and {}",
                                v.video_id,
                                f.len()
                            )))
                        }
                        _ => {}
                    }
                    if f.iter().any(|x| !x.is_finite()) {
                        return Err(HecvlError::NonFinite {
                            context: format!("frame of video {}", v.video_id),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn pair_counts(&self) -> PairCounts {
        PairCounts {
            clip: self.videos.iter().map(|v| v.clips.len()).sum(),
            phase: self.videos.iter().map(|v| v.phases.len()).sum(),
            video: self.videos.len(),
        }
    }

    /// Frame width, taken from the first frame.
    pub fn frame_dim(&self) -> Option<usize> {
        self.videos
            .first()
            .and_then(|v| v.clips.first())
            .and_then(|c| c.frames.first())
            .map(Vec::len)
    }

    /// Largest token id plus one.
    pub fn max_token_bound(&self) -> usize {
        let mut max = 0;
        let mut see = |t: &TextTokens| {
            for &id in t.ids() {
                max = max.max(id as usize + 1);
            }
        };
        for v in &self.videos {
            see(&v.abstract_text);
            for c in &v.clips {
                see(&c.narration_a);
                see(&c.narration_b);
            }
            for p in &v.phases {
                see(&p.concept);
            }
        }
        max
    }

    /// Sorted distinct phase classes.
    pub fn classes(&self) -> Vec<usize> {
        let mut classes: Vec<usize> = self
            .videos
            .iter()
            .flat_map(|v| v.phases.iter().map(|p| p.class))
            .collect();
        classes.sort_unstable();
        classes.dedup();
        classes
    }

    /// Splits off the last `ceil(fraction · videos)` videos as a held-out set.
    pub fn split_holdout(&self, fraction: f64) -> Result<(Corpus, Corpus)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(HecvlError::Config(format!(
                "holdout fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let n = self.videos.len();
        let test = ((n as f64) * fraction).ceil() as usize;
        if test == 0 || test >= n {
            return Err(HecvlError::InsufficientData {
                level: crate::Level::Video,
                requested: test.max(1) + 1,
                available: n,
            });
        }
        let (a, b) = self.videos.split_at(n - test);
        Ok((
            Corpus {
                config: self.config.clone(),
                videos: a.to_vec(),
            },
            Corpus {
                config: self.config.clone(),
                videos: b.to_vec(),
            },
        ))
    }
}
