use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::encoders::TextTokens;
use crate::error::{HecvlError, Result};
use crate::rng::substream;

use super::{Corpus, LectureVideo, PhaseSegment, VideoClip};

/// Concept texts use this fraction of the narration token-noise rate.
const CONCEPT_NOISE_FACTOR: f64 = 0.25;

/// Settings of the synthetic corpus generator.
///
/// Each phase class owns a frame prototype and a contiguous block of
/// `vocab / phase_classes` token ids. Every video contains one phase per
/// class, in a shuffled order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub videos: usize,
    pub phase_classes: usize,
    pub clips_per_phase: usize,
    pub frames_per_clip: usize,
    pub d_in: usize,
    pub vocab: usize,
    /// Standard deviation of the Gaussian noise added to frame prototypes.
    pub frame_noise: f64,
    /// Probability that a narration token is replaced by a uniform vocabulary draw.
    pub token_noise: f64,
    pub narration_len: usize,
    pub concept_len: usize,
    pub abstract_len: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            videos: 40,
            phase_classes: 6,
            clips_per_phase: 4,
            frames_per_clip: 6,
            d_in: 32,
            vocab: 256,
            frame_noise: 1.0,
            token_noise: 0.2,
            narration_len: 8,
            concept_len: 6,
            abstract_len: 16,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("videos", self.videos),
            ("phase_classes", self.phase_classes),
            ("clips_per_phase", self.clips_per_phase),
            ("frames_per_clip", self.frames_per_clip),
            ("d_in", self.d_in),
            ("vocab", self.vocab),
            ("narration_len", self.narration_len),
            ("concept_len", self.concept_len),
            ("abstract_len", self.abstract_len),
        ] {
            if v == 0 {
                return Err(HecvlError::Config(format!("generator.{name} must be >= 1")));
            }
        }
        if !(0.0..1.0).contains(&self.token_noise) {
            return Err(HecvlError::Config(format!(
                "generator.token_noise must lie in [0, 1), got {}",
                self.token_noise
            )));
        }
        if !(self.frame_noise >= 0.0 && self.frame_noise.is_finite()) {
            return Err(HecvlError::Config(format!(
                "generator.frame_noise must be finite and >= 0, got {}",
                self.frame_noise
            )));
        }
        if self.vocab > u32::MAX as usize {
            return Err(HecvlError::Config("generator.vocab exceeds u32 range".into()));
        }
        if self.phase_classes > self.vocab / 2 {
            return Err(HecvlError::Config(format!(
                "{} phase classes need at least {} vocabulary entries (two per class block), have {}",
                self.phase_classes,
                self.phase_classes * 2,
                self.vocab
            )));
        }
        Ok(())
    }

    pub fn block_size(&self) -> usize {
        self.vocab / self.phase_classes
    }

    /// Token ids owned by `class`.
    pub fn class_block(&self, class: usize) -> Range<u32> {
        let b = self.block_size();
        (class * b) as u32..((class + 1) * b) as u32
    }
}

fn draw_text(
    rng: &mut ChaCha8Rng,
    len: usize,
    mut pick: impl FnMut(&mut ChaCha8Rng) -> u32,
) -> TextTokens {
    TextTokens::new((0..len).map(|_| pick(rng)).collect()).expect("len >= 1")
}

/// Replaces each token with a uniform vocabulary draw with probability `rate`.
fn corrupt(rng: &mut ChaCha8Rng, base: &TextTokens, rate: f64, vocab: usize) -> TextTokens {
    let ids = base
        .ids()
        .iter()
        .map(|&id| {
            if rng.random::<f64>() < rate {
                rng.random_range(0..vocab as u32)
            } else {
                id
            }
        })
        .collect();
    TextTokens::new(ids).expect("same length as base")
}

/// Builds a synthetic corpus; fully determined by `cfg` (including its seed).
pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, "generate");

    let prototypes: Vec<Vec<f64>> = (0..cfg.phase_classes)
        .map(|_| (0..cfg.d_in).map(|_| rng.sample(StandardNormal)).collect())
        .collect();

    let mut videos = Vec::with_capacity(cfg.videos);
    for video_id in 0..cfg.videos {
        let mut order: Vec<usize> = (0..cfg.phase_classes).collect();
        order.shuffle(&mut rng);

        let mut clips = Vec::with_capacity(cfg.phase_classes * cfg.clips_per_phase);
        let mut phases = Vec::with_capacity(cfg.phase_classes);
        for &class in &order {
            let block = cfg.class_block(class);
            let start = clips.len();
            for _ in 0..cfg.clips_per_phase {
                let frames = (0..cfg.frames_per_clip)
                    .map(|_| {
                        prototypes[class]
                            .iter()
                            .map(|&p| {
                                let z: f64 = rng.sample(StandardNormal);
                                p + cfg.frame_noise * z
                            })
                            .collect()
                    })
                    .collect();
                let spoken = draw_text(&mut rng, cfg.narration_len, |r| r.random_range(block.clone()));
                let narration_a = corrupt(&mut rng, &spoken, cfg.token_noise, cfg.vocab);
                let narration_b = corrupt(&mut rng, &spoken, cfg.token_noise, cfg.vocab);
                clips.push(VideoClip {
                    frames,
                    narration_a,
                    narration_b,
                });
            }
            let concept = draw_text(&mut rng, cfg.concept_len, |r| r.random_range(block.clone()));
            let concept = corrupt(
                &mut rng,
                &concept,
                cfg.token_noise * CONCEPT_NOISE_FACTOR,
                cfg.vocab,
            );
            phases.push(PhaseSegment {
                start,
                end: clips.len(),
                concept,
                class,
            });
        }

        let abstract_text = draw_text(&mut rng, cfg.abstract_len, |r| {
            let class = order[r.random_range(0..order.len())];
            r.random_range(cfg.class_block(class))
        });
        let abstract_text = corrupt(&mut rng, &abstract_text, cfg.token_noise, cfg.vocab);

        videos.push(LectureVideo {
            video_id: video_id as u32,
            clips,
            phases,
            abstract_text,
        });
    }
    Corpus::new(Some(cfg.clone()), videos)
}

/// Deterministic class prompts: `per_class` sequences of `len` tokens drawn
/// from each class block.
pub fn synthetic_prompts(
    cfg: &GeneratorConfig,
    per_class: usize,
    len: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, Vec<TextTokens>)>> {
    cfg.validate()?;
    if per_class == 0 || len == 0 {
        return Err(HecvlError::Config(
            "prompt count and prompt length must be >= 1".into(),
        ));
    }
    Ok((0..cfg.phase_classes)
        .map(|class| {
            let block = cfg.class_block(class);
            let prompts = (0..per_class)
                .map(|_| {
                    TextTokens::new((0..len).map(|_| rng.random_range(block.clone())).collect())
                        .expect("len >= 1")
                })
                .collect();
            (class, prompts)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeneratorConfig {
        GeneratorConfig {
            videos: 10,
            phase_classes: 4,
            clips_per_phase: 3,
            frames_per_clip: 2,
            d_in: 8,
            vocab: 64,
            seed: 42,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&GeneratorConfig { seed: 43, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_degenerates() {
        let cfg = GeneratorConfig {
            frame_noise: 0.0,
            token_noise: 0.0,
            ..small()
        };
        let corpus = generate_synthetic(&cfg).unwrap();
        let mut proto: Vec<Option<Vec<f64>>> = vec![None; cfg.phase_classes];
        for v in &corpus.videos {
            for (c, clip) in v.clips.iter().enumerate() {
                assert_eq!(clip.narration_a, clip.narration_b);
                let class = v.class_of_clip(c).unwrap();
                for f in &clip.frames {
                    match &proto[class] {
                        Some(p) => assert_eq!(p, f),
                        None => proto[class] = Some(f.clone()),
                    }
                }
            }
        }
    }

    #[test]
    fn pair_count_oracle() {
        let corpus = generate_synthetic(&small()).unwrap();
        // Independent count over the generated structure.
        let mut clip_pairs = 0;
        for v in &corpus.videos {
            for p in &v.phases {
                clip_pairs += p.end - p.start;
            }
        }
        assert_eq!(clip_pairs, 120);
        assert_eq!(corpus.pair_counts().clip, 10 * 4 * 3);
        assert_eq!(corpus.pair_counts().phase, 40);
        assert_eq!(corpus.pair_counts().video, 10);
    }

    #[test]
    fn default_counts() {
        let counts = generate_synthetic(&GeneratorConfig::default())
            .unwrap()
            .pair_counts();
        assert_eq!(counts.clip, 960);
        assert_eq!(counts.phase, 240);
        assert_eq!(counts.video, 40);
    }

    #[test]
    fn texts_stay_in_class_blocks_without_noise() {
        let cfg = GeneratorConfig {
            token_noise: 0.0,
            ..small()
        };
        let corpus = generate_synthetic(&cfg).unwrap();
        for v in &corpus.videos {
            for p in &v.phases {
                let block = cfg.class_block(p.class);
                assert!(p.concept.ids().iter().all(|id| block.contains(id)));
                for c in &v.clips[p.start..p.end] {
                    assert!(c.narration_a.ids().iter().all(|id| block.contains(id)));
                }
            }
            assert_eq!(v.phases.len(), cfg.phase_classes);
        }
    }

    #[test]
    fn too_many_classes_is_config_error() {
        let cfg = GeneratorConfig {
            phase_classes: 40,
            vocab: 64,
            ..small()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(HecvlError::Config(_))));
        let cfg = GeneratorConfig {
            token_noise: 1.0,
            ..small()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(HecvlError::Config(_))));
    }

    #[test]
    fn prompts_come_from_class_blocks() {
        let cfg = small();
        let mut rng = substream(1, "test");
        let prompts = synthetic_prompts(&cfg, 2, 5, &mut rng).unwrap();
        assert_eq!(prompts.len(), 4);
        for (class, ps) in &prompts {
            assert_eq!(ps.len(), 2);
            let block = cfg.class_block(*class);
            assert!(ps.iter().all(|p| p.ids().iter().all(|id| block.contains(id))));
        }
    }
}
