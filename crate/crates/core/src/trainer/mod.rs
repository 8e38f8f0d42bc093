//! Fine-to-coarse alternating training with AdamW and checkpointing.
//!
//! Each batch trains exactly one level. Under [`TrainMode::Hecvl`] the level
//! follows [`schedule_level`]: `m` clip batches, `n` phase batches, `l` video
//! batches, repeated for `cycles` periods. [`TrainMode::Sequential`] runs all
//! clip batches first, then all phase batches, then all video batches.
//! [`TrainMode::Single`] optimizes the single-space loss on every batch.

mod adamw;
mod checkpoint;
mod schedule;

use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{sample_clip_batch, sample_phase_batch, sample_video_batch, Corpus};
use crate::encoders::{ModelConfig, ModelParams};
use crate::error::{HecvlError, Level, Result};
use crate::objectives::{compute_loss, LossInput, LossValue, Temperature, DEFAULT_TEMPERATURE};
use crate::rng::{digest_hex, substream};

pub use adamw::{adamw_step, AdamW, OptimizerState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RngState, MAGIC, VERSION};
pub use schedule::schedule_level;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    #[default]
    Hecvl,
    Single,
    Sequential,
}

impl FromStr for TrainMode {
    type Err = HecvlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hecvl" => Ok(Self::Hecvl),
            "single" => Ok(Self::Single),
            "sequential" => Ok(Self::Sequential),
            other => Err(HecvlError::Config(format!(
                "unknown mode {other:?} (expected hecvl, single or sequential)"
            ))),
        }
    }
}

/// Which hierarchy levels take part in the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Levels {
    pub clip: bool,
    pub phase: bool,
    pub video: bool,
}

impl Default for Levels {
    fn default() -> Self {
        Self {
            clip: true,
            phase: true,
            video: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub tau: f64,
    /// Clip batches per schedule period.
    pub m: u64,
    /// Phase batches per schedule period.
    pub n: u64,
    /// Video batches per schedule period.
    pub l: u64,
    pub batch_clip: usize,
    pub batch_phase: usize,
    pub batch_video: usize,
    /// Training length in schedule periods.
    pub cycles: u64,
    pub seed: u64,
    pub k_clip: usize,
    pub k_phase: usize,
    pub k_video: usize,
    pub mode: TrainMode,
    pub levels: Levels,
    /// Emit a checkpoint every this many cycles (0 disables).
    pub checkpoint_every: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            tau: DEFAULT_TEMPERATURE,
            m: 25,
            n: 15,
            l: 115,
            batch_clip: 16,
            batch_phase: 8,
            batch_video: 4,
            cycles: 50,
            seed: 0,
            k_clip: 4,
            k_phase: 8,
            k_video: 32,
            mode: TrainMode::Hecvl,
            levels: Levels::default(),
            checkpoint_every: 10,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Batch sizes and learning rate at the full pretraining scale.
    pub fn full_scale() -> Self {
        Self {
            lr: 5e-5,
            batch_clip: 120,
            batch_phase: 60,
            batch_video: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HecvlError::Config(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("train.lr must be positive, got {}", self.lr));
        }
        Temperature::new(self.tau)?;
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("train.beta1 and train.beta2 must lie in [0, 1)".into());
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("train.eps must be positive and train.weight_decay non-negative".into());
        }
        for (name, v) in [
            ("m", self.m as usize),
            ("n", self.n as usize),
            ("l", self.l as usize),
            ("batch_clip", self.batch_clip),
            ("batch_phase", self.batch_phase),
            ("batch_video", self.batch_video),
            ("cycles", self.cycles as usize),
            ("k_clip", self.k_clip),
            ("k_phase", self.k_phase),
            ("k_video", self.k_video),
        ] {
            if v == 0 {
                return bad(format!("train.{name} must be >= 1"));
            }
        }
        if !(self.levels.clip || self.levels.phase || self.levels.video) {
            return bad("at least one level must be enabled".into());
        }
        self.model.validate()
    }

    pub fn temperature(&self) -> Result<Temperature> {
        Temperature::new(self.tau)
    }

    pub fn optimizer(&self) -> AdamW {
        AdamW {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    /// Per-period counts with disabled levels set to zero.
    pub fn effective_counts(&self) -> (u64, u64, u64) {
        (
            if self.levels.clip { self.m } else { 0 },
            if self.levels.phase { self.n } else { 0 },
            if self.levels.video { self.l } else { 0 },
        )
    }

    pub fn batches_per_cycle(&self) -> u64 {
        let (m, n, l) = self.effective_counts();
        m + n + l
    }

    pub fn total_batches(&self) -> u64 {
        self.cycles * self.batches_per_cycle()
    }

    /// Level trained at global batch `index` under this configuration.
    pub fn level_at(&self, index: u64) -> Level {
        let (m, n, l) = self.effective_counts();
        match self.mode {
            TrainMode::Single => Level::Single,
            TrainMode::Hecvl => schedule_level(index, m, n, l),
            TrainMode::Sequential => {
                schedule_level(index, m * self.cycles, n * self.cycles, l * self.cycles)
            }
        }
    }

    /// SHA-256 of the JSON encoding.
    pub fn digest(&self) -> String {
        digest_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// Checks that `corpus` can feed this configuration.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        if let Some(d) = corpus.frame_dim() {
            if d != self.model.d_in {
                return Err(HecvlError::Compatibility(format!(
                    "corpus frames have width {d}, model expects {}",
                    self.model.d_in
                )));
            }
        }
        let bound = corpus.max_token_bound();
        if bound > self.model.vocab {
            return Err(HecvlError::Compatibility(format!(
                "corpus uses token id {} but model vocabulary is {}",
                bound - 1,
                self.model.vocab
            )));
        }
        let counts = corpus.pair_counts();
        let need = |level, requested, available| {
            if requested > available {
                Err(HecvlError::InsufficientData {
                    level,
                    requested,
                    available,
                })
            } else {
                Ok(())
            }
        };
        let single = self.mode == TrainMode::Single;
        if single || self.levels.clip {
            need(Level::Clip, self.batch_clip, counts.clip)?;
        }
        if single || self.levels.phase {
            need(Level::Phase, self.batch_phase, counts.phase)?;
        }
        if single || self.levels.video {
            need(Level::Video, self.batch_video, counts.video)?;
        }
        Ok(())
    }
}

/// One training-log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub batch: u64,
    pub level: Level,
    pub loss: f64,
    pub pos_sim: f64,
    pub neg_sim: f64,
}

/// Serializes a log as JSON Lines.
pub fn log_to_jsonl(log: &[LogEntry]) -> String {
    let mut out = String::new();
    for e in log {
        out.push_str(&serde_json::to_string(e).expect("log entry serializes"));
        out.push('\n');
    }
    out
}

/// Stateful training loop over one corpus.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    params: ModelParams,
    optimizer: OptimizerState,
    rng: ChaCha8Rng,
    batch_index: u64,
}

impl Trainer {
    /// Fresh parameters from the `init` substream; batches from `train`.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(&config.model, &mut substream(config.seed, "init"))?;
        let optimizer = OptimizerState::new(params.blocks());
        let rng = substream(config.seed, "train");
        Ok(Self {
            config,
            params,
            optimizer,
            rng,
            batch_index: 0,
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.config.validate()?;
        Ok(Self {
            rng: ckpt.rng.restore(),
            config: ckpt.config,
            params: ckpt.params,
            optimizer: ckpt.optimizer,
            batch_index: ckpt.batch_index,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            batch_index: self.batch_index,
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
            rng: RngState::capture(&self.rng),
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn batch_index(&self) -> u64 {
        self.batch_index
    }

    pub fn is_done(&self) -> bool {
        self.batch_index >= self.config.total_batches()
    }

    /// Samples, differentiates and applies one batch at the scheduled level.
    pub fn step(&mut self, corpus: &Corpus) -> Result<LogEntry> {
        let cfg = &self.config;
        let level = cfg.level_at(self.batch_index);
        let tau = cfg.temperature()?;
        let rng = &mut self.rng;
        let value: LossValue = match level {
            Level::Clip => {
                let b = sample_clip_batch(corpus, cfg.batch_clip, cfg.k_clip, rng)?;
                compute_loss(LossInput::Clip(&b), &self.params, tau)?
            }
            Level::Phase => {
                let b = sample_phase_batch(corpus, cfg.batch_phase, cfg.k_phase, rng)?;
                compute_loss(LossInput::Phase(&b), &self.params, tau)?
            }
            Level::Video => {
                let b = sample_video_batch(corpus, cfg.batch_video, cfg.k_video, rng)?;
                compute_loss(LossInput::Video(&b), &self.params, tau)?
            }
            Level::Single => {
                let clip = sample_clip_batch(corpus, cfg.batch_clip, cfg.k_clip, rng)?;
                let phase = sample_phase_batch(corpus, cfg.batch_phase, cfg.k_phase, rng)?;
                let video = sample_video_batch(corpus, cfg.batch_video, cfg.k_video, rng)?;
                let input = LossInput::Single {
                    clip: &clip,
                    phase: &phase,
                    video: &video,
                };
                compute_loss(input, &self.params, tau)?
            }
        };

        let hp = cfg.optimizer();
        let grads = value.grads.blocks();
        let mut params = self.params.blocks_mut();
        adamw_step(&mut params, &grads, &mut self.optimizer, &hp).map_err(|e| match e {
            HecvlError::NonFinite { .. } => HecvlError::NonFiniteGradient {
                batch: self.batch_index,
                level,
                loss: value.loss,
            },
            other => other,
        })?;

        let entry = LogEntry {
            batch: self.batch_index,
            level,
            loss: value.loss,
            pos_sim: value.pos_sim,
            neg_sim: value.neg_sim,
        };
        self.batch_index += 1;
        Ok(entry)
    }

    /// Trains until `batch_index` reaches `until` (capped at the configured
    /// total), calling `on_entry` for every batch.
    pub fn run_until(
        &mut self,
        corpus: &Corpus,
        until: u64,
        mut on_entry: impl FnMut(&LogEntry),
    ) -> Result<Vec<LogEntry>> {
        let until = until.min(self.config.total_batches());
        let mut log = Vec::new();
        while self.batch_index < until {
            let entry = self.step(corpus)?;
            on_entry(&entry);
            log.push(entry);
        }
        Ok(log)
    }
}

/// Result of a full training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogEntry>,
    /// `(cycle, checkpoint)` pairs emitted every `checkpoint_every` cycles.
    pub periodic: Vec<(u64, Checkpoint)>,
}

/// Runs the configured number of cycles from fresh parameters.
pub fn train(config: &TrainConfig, corpus: &Corpus) -> Result<TrainOutcome> {
    config.check_corpus(corpus)?;
    let mut trainer = Trainer::new(config.clone())?;
    let per_cycle = config.batches_per_cycle();
    let mut log = Vec::with_capacity(config.total_batches() as usize);
    let mut periodic = Vec::new();
    for cycle in 1..=config.cycles {
        log.extend(trainer.run_until(corpus, cycle * per_cycle, |_| {})?);
        if config.checkpoint_every > 0 && cycle % config.checkpoint_every == 0 && cycle < config.cycles {
            periodic.push((cycle, trainer.checkpoint()));
        }
    }
    Ok(TrainOutcome {
        checkpoint: trainer.checkpoint(),
        log,
        periodic,
    })
}

/// Mean loss per level over the given cycle (0-based) of a log.
pub fn cycle_mean_losses(log: &[LogEntry], per_cycle: u64, cycle: u64) -> Vec<(Level, f64)> {
    let lo = cycle * per_cycle;
    let hi = lo + per_cycle;
    let mut acc: Vec<(Level, f64, usize)> = Vec::new();
    for e in log.iter().filter(|e| e.batch >= lo && e.batch < hi) {
        match acc.iter_mut().find(|(l, _, _)| *l == e.level) {
            Some(slot) => {
                slot.1 += e.loss;
                slot.2 += 1;
            }
            None => acc.push((e.level, e.loss, 1)),
        }
    }
    acc.into_iter().map(|(l, s, c)| (l, s / c as f64)).collect()
}
