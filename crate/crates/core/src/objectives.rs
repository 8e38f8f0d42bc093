//! Contrastive objectives for the three embedding spaces and the single-space
//! baseline.
//!
//! Phase and video losses follow the two-term InfoNCE form: for entry `i`,
//! the batch-softmax probability of the matched text is computed once with
//! the aggregated visual embedding and once with the aggregated narration
//! embedding as the query, and the two probabilities are summed inside a
//! single log:
//!
//! ```text
//! L = -(1/B) Σ_i log( softmax_j(q1_i · t_j / τ)[i] + softmax_j(q2_i · t_j / τ)[i] )
//! ```
//!
//! The clip loss reuses this form with the clip's visual embedding as the only
//! query and the two narration transcripts as the two target sets. Softmaxes
//! run over text targets only.

use serde::{Deserialize, Serialize};

use crate::corpus::{ClipBatch, PhaseBatch, VideoBatch};
use crate::encoders::{ModelParams, ParamVars};
use crate::error::{HecvlError, Level, Result};
use crate::numerics::{finite_diff_check_steps, matrix, GradCheckReport, Matrix, Tape, Var};

pub const DEFAULT_TEMPERATURE: f64 = 0.07;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(HecvlError::Config(format!(
                "temperature must be positive and finite, got {tau}"
            )));
        }
        Ok(Self(tau))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Self(DEFAULT_TEMPERATURE)
    }
}

impl TryFrom<f64> for Temperature {
    type Error = HecvlError;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// Loss, gradients for every parameter block, and similarity diagnostics.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub loss: f64,
    pub grads: ModelParams,
    /// Mean cosine similarity of matched pairs.
    pub pos_sim: f64,
    /// Mean cosine similarity of unmatched in-batch pairs (0 when B = 1).
    pub neg_sim: f64,
}

/// Input to one loss evaluation.
#[derive(Debug, Clone, Copy)]
pub enum LossInput<'b, 'a> {
    Clip(&'b ClipBatch<'a>),
    Phase(&'b PhaseBatch<'a>),
    Video(&'b VideoBatch<'a>),
    Single {
        clip: &'b ClipBatch<'a>,
        phase: &'b PhaseBatch<'a>,
        video: &'b VideoBatch<'a>,
    },
}

impl LossInput<'_, '_> {
    pub fn level(&self) -> Level {
        match self {
            LossInput::Clip(_) => Level::Clip,
            LossInput::Phase(_) => Level::Phase,
            LossInput::Video(_) => Level::Video,
            LossInput::Single { .. } => Level::Single,
        }
    }
}

struct Built {
    loss: Var,
    sims: Vec<Var>,
}

#[derive(Default)]
struct SimStats {
    pos: f64,
    pos_n: usize,
    neg: f64,
    neg_n: usize,
}

impl SimStats {
    fn add(&mut self, s: &Matrix) {
        for i in 0..s.rows() {
            for j in 0..s.cols() {
                if i == j {
                    self.pos += s.get(i, j);
                    self.pos_n += 1;
                } else {
                    self.neg += s.get(i, j);
                    self.neg_n += 1;
                }
            }
        }
    }

    fn means(&self) -> (f64, f64) {
        let m = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        (m(self.pos, self.pos_n), m(self.neg, self.neg_n))
    }
}

fn check_nonempty(level: Level, len: usize) -> Result<()> {
    if len == 0 {
        return Err(HecvlError::Contract(format!("{level} batch is empty")));
    }
    Ok(())
}

/// Diagonal of `softmax(queries · targetsᵀ / τ)` and the raw similarity node.
fn matched_probability(tape: &mut Tape, queries: Var, targets: Var, tau: f64) -> Result<(Var, Var)> {
    let sims = tape.matmul_nt(queries, targets)?;
    let probs = tape.softmax_rows(sims, tau)?;
    let n = tape.value(probs).rows();
    let diag = tape.pick_per_row(probs, (0..n).collect())?;
    Ok((diag, sims))
}

/// `-(1/B) Σ log(p1_i + p2_i)` over two (query, target) pairings.
fn two_term_infonce(tape: &mut Tape, first: (Var, Var), second: (Var, Var), tau: f64) -> Result<Built> {
    let (p1, s1) = matched_probability(tape, first.0, first.1, tau)?;
    let (p2, s2) = matched_probability(tape, second.0, second.1, tau)?;
    let b = tape.value(p1).rows();
    let total = tape.add(p1, p2)?;
    let logs = tape.log(total)?;
    let sum = tape.sum(logs);
    let loss = tape.scale(sum, -1.0 / b as f64);
    Ok(Built {
        loss,
        sims: vec![s1, s2],
    })
}

/// `-(1/M) Σ log p_i` over one pairing.
fn one_term_infonce(tape: &mut Tape, queries: Var, targets: Var, tau: f64) -> Result<Built> {
    let (p, s) = matched_probability(tape, queries, targets, tau)?;
    let m = tape.value(p).rows();
    let logs = tape.log(p)?;
    let sum = tape.sum(logs);
    let loss = tape.scale(sum, -1.0 / m as f64);
    Ok(Built {
        loss,
        sims: vec![s],
    })
}

/// Mean-pools unit text embeddings per group and re-normalizes.
fn aggregate_texts(
    tape: &mut Tape,
    vars: &ParamVars,
    groups: &[&[&crate::encoders::TextTokens]],
) -> Result<Var> {
    let flat: Vec<_> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let per_text = vars.encode_texts(tape, &flat)?;
    let pooled = tape.mean_pool_groups(per_text, sizes)?;
    tape.l2_normalize_rows(pooled)
}

struct LevelEmbeddings {
    visual: Var,
    narration: Var,
    target: Var,
}

fn clip_embeddings(tape: &mut Tape, vars: &ParamVars, batch: &ClipBatch) -> Result<(Var, Var, Var)> {
    check_nonempty(Level::Clip, batch.len())?;
    let groups: Vec<_> = batch.entries.iter().map(|e| e.frames.clone()).collect();
    let visual = vars.encode_segments(tape, &groups)?;
    let a: Vec<_> = batch.entries.iter().map(|e| e.narration_a).collect();
    let b: Vec<_> = batch.entries.iter().map(|e| e.narration_b).collect();
    let na = vars.encode_texts(tape, &a)?;
    let nb = vars.encode_texts(tape, &b)?;
    Ok((visual, na, nb))
}

fn phase_embeddings(tape: &mut Tape, vars: &ParamVars, batch: &PhaseBatch) -> Result<LevelEmbeddings> {
    check_nonempty(Level::Phase, batch.len())?;
    let groups: Vec<_> = batch.entries.iter().map(|e| e.frames.clone()).collect();
    let visual = vars.encode_segments(tape, &groups)?;
    let narr: Vec<_> = batch.entries.iter().map(|e| e.narrations.as_slice()).collect();
    let narration = aggregate_texts(tape, vars, &narr)?;
    let concepts: Vec<_> = batch.entries.iter().map(|e| e.concept).collect();
    let target = vars.encode_texts(tape, &concepts)?;
    Ok(LevelEmbeddings {
        visual,
        narration,
        target,
    })
}

fn video_embeddings(tape: &mut Tape, vars: &ParamVars, batch: &VideoBatch) -> Result<LevelEmbeddings> {
    check_nonempty(Level::Video, batch.len())?;
    let groups: Vec<_> = batch.entries.iter().map(|e| e.frames.clone()).collect();
    let visual = vars.encode_segments(tape, &groups)?;
    let narr: Vec<_> = batch.entries.iter().map(|e| e.narrations.as_slice()).collect();
    let narration = aggregate_texts(tape, vars, &narr)?;
    let abstracts: Vec<_> = batch.entries.iter().map(|e| e.abstract_text).collect();
    let target = vars.encode_texts(tape, &abstracts)?;
    Ok(LevelEmbeddings {
        visual,
        narration,
        target,
    })
}

fn build(tape: &mut Tape, vars: &ParamVars, input: LossInput, tau: f64) -> Result<Built> {
    match input {
        LossInput::Clip(batch) => {
            let (v, na, nb) = clip_embeddings(tape, vars, batch)?;
            two_term_infonce(tape, (v, na), (v, nb), tau)
        }
        LossInput::Phase(batch) => {
            let e = phase_embeddings(tape, vars, batch)?;
            two_term_infonce(tape, (e.visual, e.target), (e.narration, e.target), tau)
        }
        LossInput::Video(batch) => {
            let e = video_embeddings(tape, vars, batch)?;
            two_term_infonce(tape, (e.visual, e.target), (e.narration, e.target), tau)
        }
        LossInput::Single { clip, phase, video } => {
            let (cv, na, _) = clip_embeddings(tape, vars, clip)?;
            let p = phase_embeddings(tape, vars, phase)?;
            let v = video_embeddings(tape, vars, video)?;
            let queries = tape.concat_rows(vec![cv, p.visual, v.visual])?;
            let targets = tape.concat_rows(vec![na, p.target, v.target])?;
            one_term_infonce(tape, queries, targets, tau)
        }
    }
}

/// Loss value only, without a backward pass.
pub fn forward_loss(input: LossInput, params: &ModelParams, tau: Temperature) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let built = build(&mut tape, &vars, input, tau.get())?;
    let loss = tape.value(built.loss).get(0, 0);
    if !loss.is_finite() {
        return Err(HecvlError::NonFinite {
            context: format!("{} loss", input.level()),
        });
    }
    Ok(loss)
}

/// Loss, gradients and diagnostics for one batch.
pub fn compute_loss(input: LossInput, params: &ModelParams, tau: Temperature) -> Result<LossValue> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, true);
    let built = build(&mut tape, &vars, input, tau.get())?;
    let loss = tape.value(built.loss).get(0, 0);
    if !loss.is_finite() {
        return Err(HecvlError::NonFinite {
            context: format!("{} loss", input.level()),
        });
    }
    let mut stats = SimStats::default();
    for s in &built.sims {
        stats.add(tape.value(*s));
    }
    let (pos_sim, neg_sim) = stats.means();
    let mut grads = tape.backward(built.loss)?;
    let grads = vars.collect_grads(params, &mut grads)?;
    Ok(LossValue {
        loss,
        grads,
        pos_sim,
        neg_sim,
    })
}

pub fn loss_clip(batch: &ClipBatch, params: &ModelParams, tau: Temperature) -> Result<LossValue> {
    compute_loss(LossInput::Clip(batch), params, tau)
}

pub fn loss_phase(batch: &PhaseBatch, params: &ModelParams, tau: Temperature) -> Result<LossValue> {
    compute_loss(LossInput::Phase(batch), params, tau)
}

pub fn loss_video(batch: &VideoBatch, params: &ModelParams, tau: Temperature) -> Result<LossValue> {
    compute_loss(LossInput::Video(batch), params, tau)
}

pub fn loss_single(
    clip: &ClipBatch,
    phase: &PhaseBatch,
    video: &VideoBatch,
    params: &ModelParams,
    tau: Temperature,
) -> Result<LossValue> {
    compute_loss(LossInput::Single { clip, phase, video }, params, tau)
}

/// Two-term loss evaluated directly on cosine-similarity matrices
/// (`sims_first[i][j]` = query `i` against target `j`).
pub fn two_term_loss_from_similarities(
    sims_first: &Matrix,
    sims_second: &Matrix,
    tau: Temperature,
) -> Result<f64> {
    let b = sims_first.rows();
    if b == 0 || sims_first.shape() != (b, b) || sims_second.shape() != (b, b) {
        return Err(HecvlError::Shape {
            op: "two_term_loss_from_similarities",
            left_rows: sims_first.rows(),
            left_cols: sims_first.cols(),
            right_rows: sims_second.rows(),
            right_cols: sims_second.cols(),
        });
    }
    let p1 = matrix::softmax_rows(sims_first, tau.get())?;
    let p2 = matrix::softmax_rows(sims_second, tau.get())?;
    let total: f64 = (0..b).map(|i| (p1.get(i, i) + p2.get(i, i)).ln()).sum();
    Ok(-total / b as f64)
}

/// Central finite-difference check of the analytic gradients for one loss.
pub fn check_loss_gradients(
    input: LossInput,
    params: &ModelParams,
    tau: Temperature,
    steps: &[f64],
    seed: u64,
) -> Result<GradCheckReport> {
    let analytic = compute_loss(input, params, tau)?.grads.to_blocks();
    check_against(input, params, tau, &analytic, steps, seed)
}

/// Like [`check_loss_gradients`] but against caller-supplied gradients.
pub fn check_against(
    input: LossInput,
    params: &ModelParams,
    tau: Temperature,
    analytic: &[Matrix],
    steps: &[f64],
    seed: u64,
) -> Result<GradCheckReport> {
    let mut blocks = params.to_blocks();
    finite_diff_check_steps(
        |b| forward_loss(input, &params.with_blocks(b)?, tau),
        &mut blocks,
        analytic,
        steps,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{
        generate_synthetic, sample_clip_batch, sample_phase_batch, sample_video_batch, Corpus,
        GeneratorConfig,
    };
    use crate::encoders::{embed_segments, embed_texts, ModelConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn corpus(frame_noise: f64, token_noise: f64) -> Corpus {
        generate_synthetic(&GeneratorConfig {
            videos: 6,
            phase_classes: 3,
            clips_per_phase: 2,
            frames_per_clip: 3,
            d_in: 6,
            vocab: 30,
            frame_noise,
            token_noise,
            narration_len: 4,
            concept_len: 3,
            abstract_len: 5,
            seed: 21,
        })
        .unwrap()
    }

    fn params(seed: u64) -> ModelParams {
        let cfg = ModelConfig {
            d_in: 6,
            hidden: 10,
            d_emb: 8,
            d_tok: 5,
            vocab: 30,
        };
        ModelParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn tau() -> Temperature {
        Temperature::new(0.5).unwrap()
    }

    #[test]
    fn single_entry_gives_minus_log_two() {
        let c = corpus(1.0, 0.2);
        let p = params(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let phase = sample_phase_batch(&c, 1, 8, &mut rng).unwrap();
        let video = sample_video_batch(&c, 1, 32, &mut rng).unwrap();
        let clip = sample_clip_batch(&c, 1, 4, &mut rng).unwrap();
        assert!((loss_phase(&phase, &p, tau()).unwrap().loss + LN2).abs() < 1e-12);
        assert!((loss_video(&video, &p, tau()).unwrap().loss + LN2).abs() < 1e-12);
        assert!((loss_clip(&clip, &p, tau()).unwrap().loss + LN2).abs() < 1e-12);
        let single = loss_single(&clip, &phase, &video, &p, tau()).unwrap();
        // three pooled pairs: bounded by log 3 only when all similarities tie
        assert!(single.loss.is_finite() && single.loss > 0.0);
    }

    #[test]
    fn hand_evaluated_two_entry_case() {
        // matched cosine 1, unmatched 0, tau 1
        let s = Matrix::identity(2);
        let loss = two_term_loss_from_similarities(&s, &s, Temperature::new(1.0).unwrap()).unwrap();
        let e = std::f64::consts::E;
        let p = e / (e + 1.0);
        assert!((p - 0.73106).abs() < 1e-5);
        assert!((loss + (2.0 * p).ln()).abs() < 1e-15);
        assert!((loss + 0.37989).abs() < 1e-5);
    }

    #[test]
    fn identical_embeddings_give_log_two_over_b() {
        for b in [2usize, 4, 8] {
            let s = Matrix::filled(b, b, 0.3);
            let loss = two_term_loss_from_similarities(&s, &s, tau()).unwrap();
            assert!((loss + (2.0 / b as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_in_matched_similarity() {
        let base = Matrix::from_rows(&[[0.2, 0.1, -0.3], [0.0, 0.4, 0.1], [0.3, -0.2, 0.1]]).unwrap();
        let mut prev = f64::INFINITY;
        for step in 0..10 {
            let mut s = base.clone();
            for i in 0..3 {
                s.set(i, i, base.get(i, i) + 0.1 * step as f64);
            }
            let l = two_term_loss_from_similarities(&s, &base, tau()).unwrap();
            assert!(l <= prev);
            prev = l;
        }
    }

    /// Straight-line evaluation of the two-term loss from explicit embeddings.
    fn oracle_two_term(q1: &Matrix, q2: &Matrix, t: &Matrix, tau: f64) -> f64 {
        let b = t.rows();
        let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        let mut total = 0.0;
        for i in 0..b {
            let mut terms = 0.0;
            for q in [q1, q2] {
                let num = (dot(q.row(i), t.row(i)) / tau).exp();
                let den: f64 = (0..b).map(|j| (dot(q.row(i), t.row(j)) / tau).exp()).sum();
                terms += num / den;
            }
            total += terms.ln();
        }
        -total / b as f64
    }

    fn normalize_mean(rows: &Matrix) -> Vec<f64> {
        let d = rows.cols();
        let mut m = vec![0.0; d];
        for r in 0..rows.rows() {
            for c in 0..d {
                m[c] += rows.get(r, c) / rows.rows() as f64;
            }
        }
        let n = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        m.iter().map(|x| x / n).collect()
    }

    #[test]
    fn video_loss_matches_straight_line_oracle() {
        let c = corpus(1.0, 0.2);
        let p = params(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch = sample_video_batch(&c, 4, 32, &mut rng).unwrap();
        let groups: Vec<_> = batch.entries.iter().map(|e| e.frames.clone()).collect();
        let visual = embed_segments(&groups, &p).unwrap();
        let narr_rows: Vec<Vec<f64>> = batch
            .entries
            .iter()
            .map(|e| normalize_mean(&embed_texts(&e.narrations, &p).unwrap()))
            .collect();
        let narr = Matrix::from_rows(&narr_rows).unwrap();
        let abstracts: Vec<_> = batch.entries.iter().map(|e| e.abstract_text).collect();
        let targets = embed_texts(&abstracts, &p).unwrap();
        let expected = oracle_two_term(&visual, &narr, &targets, 0.5);
        let got = loss_video(&batch, &p, tau()).unwrap().loss;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn clip_loss_matches_straight_line_oracle() {
        let c = corpus(1.0, 0.2);
        let p = params(3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let batch = sample_clip_batch(&c, 5, 4, &mut rng).unwrap();
        let groups: Vec<_> = batch.entries.iter().map(|e| e.frames.clone()).collect();
        let visual = embed_segments(&groups, &p).unwrap();
        let na = embed_texts(&batch.entries.iter().map(|e| e.narration_a).collect::<Vec<_>>(), &p).unwrap();
        let nb = embed_texts(&batch.entries.iter().map(|e| e.narration_b).collect::<Vec<_>>(), &p).unwrap();
        // loss = -(1/B) Σ log(softmax(v·na)[i] + softmax(v·nb)[i]): targets differ, query shared
        let b = 5;
        let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        let mut total = 0.0;
        for i in 0..b {
            let mut terms = 0.0;
            for t in [&na, &nb] {
                let num = (dot(visual.row(i), t.row(i)) / 0.5).exp();
                let den: f64 = (0..b).map(|j| (dot(visual.row(i), t.row(j)) / 0.5).exp()).sum();
                terms += num / den;
            }
            total += terms.ln();
        }
        let expected = -total / b as f64;
        let got = loss_clip(&batch, &p, tau()).unwrap().loss;
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn duplicated_transcripts_collapse_to_one_term() {
        let c = corpus(1.0, 0.0);
        let p = params(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let batch = sample_clip_batch(&c, 4, 4, &mut rng).unwrap();
        assert!(batch.entries.iter().all(|e| e.narration_a == e.narration_b));
        let groups: Vec<_> = batch.entries.iter().map(|e| e.frames.clone()).collect();
        let visual = embed_segments(&groups, &p).unwrap();
        let na = embed_texts(&batch.entries.iter().map(|e| e.narration_a).collect::<Vec<_>>(), &p).unwrap();
        let sims = matrix::matmul_nt(&visual, &na).unwrap();
        let probs = matrix::softmax_rows(&sims, 0.5).unwrap();
        let expected = -(0..4).map(|i| (2.0 * probs.get(i, i)).ln()).sum::<f64>() / 4.0;
        let got = loss_clip(&batch, &p, tau()).unwrap().loss;
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn single_space_oracle_and_size_one_pool() {
        let c = corpus(1.0, 0.2);
        let p = params(5);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let clip = sample_clip_batch(&c, 2, 4, &mut rng).unwrap();
        let phase = sample_phase_batch(&c, 2, 8, &mut rng).unwrap();
        let video = sample_video_batch(&c, 1, 32, &mut rng).unwrap();

        let mut queries: Vec<Vec<f64>> = Vec::new();
        let mut targets: Vec<Vec<f64>> = Vec::new();
        for e in &clip.entries {
            queries.push(embed_segments(&[e.frames.clone()], &p).unwrap().row(0).to_vec());
            targets.push(embed_texts(&[e.narration_a], &p).unwrap().row(0).to_vec());
        }
        for e in &phase.entries {
            queries.push(embed_segments(&[e.frames.clone()], &p).unwrap().row(0).to_vec());
            targets.push(embed_texts(&[e.concept], &p).unwrap().row(0).to_vec());
        }
        for e in &video.entries {
            queries.push(embed_segments(&[e.frames.clone()], &p).unwrap().row(0).to_vec());
            targets.push(embed_texts(&[e.abstract_text], &p).unwrap().row(0).to_vec());
        }
        let m = queries.len();
        assert_eq!(m, 5);
        let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        let mut total = 0.0;
        for i in 0..m {
            let num = (dot(&queries[i], &targets[i]) / 0.5).exp();
            let den: f64 = (0..m).map(|j| (dot(&queries[i], &targets[j]) / 0.5).exp()).sum();
            total += (num / den).ln();
        }
        let expected = -total / m as f64;
        let got = loss_single(&clip, &phase, &video, &p, tau()).unwrap().loss;
        assert!((got - expected).abs() < 1e-12);

        let clip1 = sample_clip_batch(&c, 1, 4, &mut rng).unwrap();
        let mut tape = Tape::new();
        let vars = p.register(&mut tape, true);
        let (v, na, _) = clip_embeddings(&mut tape, &vars, &clip1).unwrap();
        let built = one_term_infonce(&mut tape, v, na, 0.5).unwrap();
        assert_eq!(tape.value(built.loss).get(0, 0), 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let c = corpus(1.0, 0.2);
        let p = params(6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let clip = sample_clip_batch(&c, 3, 4, &mut rng).unwrap();
        let phase = sample_phase_batch(&c, 3, 8, &mut rng).unwrap();
        let video = sample_video_batch(&c, 3, 32, &mut rng).unwrap();
        for input in [
            LossInput::Clip(&clip),
            LossInput::Phase(&phase),
            LossInput::Video(&video),
            LossInput::Single {
                clip: &clip,
                phase: &phase,
                video: &video,
            },
        ] {
            let report = check_loss_gradients(input, &p, tau(), &[1e-5], 1).unwrap();
            assert!(report.max_rel_error < 1e-4, "{:?}: {report:?}", input.level());
        }
    }

    #[test]
    fn every_level_updates_both_encoders() {
        let c = corpus(1.0, 0.2);
        let p = params(7);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let clip = sample_clip_batch(&c, 3, 4, &mut rng).unwrap();
        let phase = sample_phase_batch(&c, 3, 8, &mut rng).unwrap();
        let video = sample_video_batch(&c, 3, 32, &mut rng).unwrap();
        for lv in [
            loss_clip(&clip, &p, tau()).unwrap(),
            loss_phase(&phase, &p, tau()).unwrap(),
            loss_video(&video, &p, tau()).unwrap(),
        ] {
            assert!(lv.grads.visual.w1.data().iter().any(|g| *g != 0.0));
            assert!(lv.grads.text.embed.data().iter().any(|g| *g != 0.0));
            assert_eq!(lv.grads.config(), p.config());
            assert!(lv.pos_sim.abs() <= 1.0 && lv.neg_sim.abs() <= 1.0);
        }
    }

    #[test]
    fn bad_temperature_rejected() {
        assert!(Temperature::new(0.0).is_err());
        assert!(Temperature::new(f64::NAN).is_err());
        assert_eq!(Temperature::default().get(), 0.07);
    }
}
