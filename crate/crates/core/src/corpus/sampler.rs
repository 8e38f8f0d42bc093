//! Level-specific mini-batch samplers.
//!
//! Sources are drawn uniformly without replacement within a batch: clips for
//! the clip level, phase segments for the phase level, whole videos for the
//! video level. Entries borrow from the corpus.

use rand::seq::index;
use rand::Rng;

use crate::encoders::{sample_indices, Frame, TextTokens};
use crate::error::{HecvlError, Level, Result};

use super::Corpus;

#[derive(Debug, Clone)]
pub struct ClipEntry<'a> {
    pub video: usize,
    pub clip: usize,
    pub frames: Vec<&'a Frame>,
    pub narration_a: &'a TextTokens,
    pub narration_b: &'a TextTokens,
}

#[derive(Debug, Clone)]
pub struct PhaseEntry<'a> {
    pub video: usize,
    pub segment: usize,
    /// Clip indices the frames and narrations were taken from.
    pub clips: Vec<usize>,
    pub frames: Vec<&'a Frame>,
    pub narrations: Vec<&'a TextTokens>,
    pub concept: &'a TextTokens,
}

#[derive(Debug, Clone)]
pub struct VideoEntry<'a> {
    pub video: usize,
    pub clips: Vec<usize>,
    pub frames: Vec<&'a Frame>,
    pub narrations: Vec<&'a TextTokens>,
    pub abstract_text: &'a TextTokens,
}

#[derive(Debug, Clone)]
pub struct ClipBatch<'a> {
    pub entries: Vec<ClipEntry<'a>>,
}

#[derive(Debug, Clone)]
pub struct PhaseBatch<'a> {
    pub entries: Vec<PhaseEntry<'a>>,
}

#[derive(Debug, Clone)]
pub struct VideoBatch<'a> {
    pub entries: Vec<VideoEntry<'a>>,
}

macro_rules! batch_len {
    ($($t:ident),*) => {$(
        impl $t<'_> {
            pub fn len(&self) -> usize {
                self.entries.len()
            }

            pub fn is_empty(&self) -> bool {
                self.entries.is_empty()
            }
        }
    )*};
}
batch_len!(ClipBatch, PhaseBatch, VideoBatch);

fn draw(level: Level, available: usize, b: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if b == 0 {
        return Err(HecvlError::Config(format!("{level} batch size must be >= 1")));
    }
    if b > available {
        return Err(HecvlError::InsufficientData {
            level,
            requested: b,
            available,
        });
    }
    Ok(index::sample(rng, available, b).into_vec())
}

/// Frames of clips `clips`, flattened in order, with the owning clip index.
fn span_frames(
    corpus: &Corpus,
    video: usize,
    clips: impl Iterator<Item = usize>,
) -> Vec<(usize, &Frame)> {
    let v = &corpus.videos[video];
    clips
        .flat_map(|c| v.clips[c].frames.iter().map(move |f| (c, f)))
        .collect()
}

pub fn sample_clip_batch<'a>(
    corpus: &'a Corpus,
    b: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<ClipBatch<'a>> {
    let sources: Vec<(usize, usize)> = corpus
        .videos
        .iter()
        .enumerate()
        .flat_map(|(vi, v)| (0..v.clips.len()).map(move |c| (vi, c)))
        .collect();
    let picks = draw(Level::Clip, sources.len(), b, rng)?;
    let entries = picks
        .into_iter()
        .map(|i| {
            let (video, clip) = sources[i];
            let c = &corpus.videos[video].clips[clip];
            Ok(ClipEntry {
                video,
                clip,
                frames: sample_indices(c.frames.len(), k)?
                    .into_iter()
                    .map(|f| &c.frames[f])
                    .collect(),
                narration_a: &c.narration_a,
                narration_b: &c.narration_b,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ClipBatch { entries })
}

pub fn sample_phase_batch<'a>(
    corpus: &'a Corpus,
    b: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<PhaseBatch<'a>> {
    let sources: Vec<(usize, usize)> = corpus
        .videos
        .iter()
        .enumerate()
        .flat_map(|(vi, v)| (0..v.phases.len()).map(move |s| (vi, s)))
        .collect();
    let picks = draw(Level::Phase, sources.len(), b, rng)?;
    let entries = picks
        .into_iter()
        .map(|i| {
            let (video, segment) = sources[i];
            let v = &corpus.videos[video];
            let seg = &v.phases[segment];
            let frames = span_frames(corpus, video, seg.start..seg.end);
            Ok(PhaseEntry {
                video,
                segment,
                clips: (seg.start..seg.end).collect(),
                frames: sample_indices(frames.len(), k)?
                    .into_iter()
                    .map(|f| frames[f].1)
                    .collect(),
                narrations: v.clips[seg.start..seg.end]
                    .iter()
                    .map(|c| &c.narration_a)
                    .collect(),
                concept: &seg.concept,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PhaseBatch { entries })
}

pub fn sample_video_batch<'a>(
    corpus: &'a Corpus,
    b: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<VideoBatch<'a>> {
    let picks = draw(Level::Video, corpus.videos.len(), b, rng)?;
    let entries = picks
        .into_iter()
        .map(|video| {
            let v = &corpus.videos[video];
            let frames = span_frames(corpus, video, 0..v.clips.len());
            let idx = sample_indices(frames.len(), k)?;
            let mut clips: Vec<usize> = idx.iter().map(|&f| frames[f].0).collect();
            clips.dedup();
            Ok(VideoEntry {
                video,
                frames: idx.iter().map(|&f| frames[f].1).collect(),
                narrations: clips.iter().map(|&c| &v.clips[c].narration_a).collect(),
                clips,
                abstract_text: &v.abstract_text,
            })
        })
        .collect::<Result<_>>()?;
    Ok(VideoBatch { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::hand_built;
    use crate::corpus::{generate_synthetic, GeneratorConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn corpus() -> Corpus {
        generate_synthetic(&GeneratorConfig {
            videos: 5,
            phase_classes: 3,
            clips_per_phase: 2,
            frames_per_clip: 3,
            d_in: 4,
            vocab: 30,
            seed: 1,
            ..GeneratorConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn exhaustive_phase_draw() {
        let c = corpus();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = sample_phase_batch(&c, 15, 8, &mut rng).unwrap();
        let seen: HashSet<_> = batch.entries.iter().map(|e| (e.video, e.segment)).collect();
        assert_eq!(seen.len(), 15);
    }

    #[test]
    fn batches_are_reproducible() {
        let c = corpus();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            (0..5)
                .map(|_| {
                    sample_clip_batch(&c, 4, 4, &mut rng)
                        .unwrap()
                        .entries
                        .iter()
                        .map(|e| (e.video, e.clip))
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn phase_entry_counts_on_hand_built() {
        let c = hand_built();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = sample_phase_batch(&c, 2, 8, &mut rng).unwrap();
        let entry = batch.entries.iter().find(|e| e.segment == 1).unwrap();
        assert_eq!(entry.narrations.len(), 3);
        assert_eq!(entry.clips, vec![2, 3, 4]);
        assert_eq!(entry.frames.len(), 8);
        // frames of clip c have first coordinate c
        for f in &entry.frames {
            assert!((2.0..5.0).contains(&f[0]));
        }
        for n in &entry.narrations {
            assert!((2..5).contains(&n.ids()[0]));
        }
    }

    #[test]
    fn phase_entries_stay_inside_their_segment() {
        let c = corpus();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            for e in sample_phase_batch(&c, 6, 8, &mut rng).unwrap().entries {
                let v = &c.videos[e.video];
                let seg = &v.phases[e.segment];
                for f in &e.frames {
                    let owner = v
                        .clips
                        .iter()
                        .position(|cl| cl.frames.iter().any(|x| std::ptr::eq(x, *f)))
                        .unwrap();
                    assert!(seg.contains(owner));
                }
                for n in &e.narrations {
                    let owner = v
                        .clips
                        .iter()
                        .position(|cl| std::ptr::eq(&cl.narration_a, *n))
                        .unwrap();
                    assert!(seg.contains(owner));
                }
            }
        }
    }

    #[test]
    fn video_entries_span_the_video() {
        let c = corpus();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = sample_video_batch(&c, 5, 32, &mut rng).unwrap();
        for e in &batch.entries {
            assert_eq!(e.frames.len(), 32);
            // 18 frames sampled 32 times: every clip is touched
            assert_eq!(e.clips, (0..6).collect::<Vec<_>>());
            assert_eq!(e.narrations.len(), 6);
        }
    }

    #[test]
    fn insufficient_data_names_level() {
        let c = corpus();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match sample_video_batch(&c, 6, 32, &mut rng) {
            Err(HecvlError::InsufficientData {
                level,
                requested,
                available,
            }) => {
                assert_eq!(level, Level::Video);
                assert_eq!((requested, available), (6, 5));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(sample_clip_batch(&c, 31, 4, &mut rng).is_err());
        assert!(sample_clip_batch(&c, 30, 4, &mut rng).is_ok());
    }
}
