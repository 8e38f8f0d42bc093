//! The shared visual and textual encoders.
//!
//! Both encoders are two-layer ReLU networks that end in an L2 normalization,
//! so every similarity computed downstream is a cosine similarity. The visual
//! encoder maps each frame independently and mean-pools the frame outputs of a
//! segment; the text encoder mean-pools token embeddings before its network.
//! One [`ModelParams`] value serves clip, phase and video levels alike.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HecvlError, Result};
use crate::numerics::{Matrix, Tape, Var};
use crate::rng::digest_hex;

/// A synthetic frame: a precomputed feature vector of length `d_in`.
pub type Frame = Vec<f64>;

/// A non-empty token-id sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct TextTokens(Vec<u32>);

impl TextTokens {
    pub fn new(ids: Vec<u32>) -> Result<Self> {
        if ids.is_empty() {
            return Err(HecvlError::Contract("text must contain at least one token".into()));
        }
        Ok(Self(ids))
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_vocab(&self, vocab: usize) -> Result<()> {
        match self.0.iter().find(|&&id| id as usize >= vocab) {
            Some(&id) => Err(HecvlError::Vocabulary {
                id: id as usize,
                vocab,
            }),
            None => Ok(()),
        }
    }
}

impl TryFrom<Vec<u32>> for TextTokens {
    type Error = HecvlError;

    fn try_from(ids: Vec<u32>) -> Result<Self> {
        Self::new(ids)
    }
}

impl From<TextTokens> for Vec<u32> {
    fn from(t: TextTokens) -> Self {
        t.0
    }
}

/// Encoder dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d_in: usize,
    pub hidden: usize,
    pub d_emb: usize,
    pub d_tok: usize,
    pub vocab: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_in: 32,
            hidden: 64,
            d_emb: 16,
            d_tok: 32,
            vocab: 256,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_in", self.d_in),
            ("hidden", self.hidden),
            ("d_emb", self.d_emb),
            ("d_tok", self.d_tok),
            ("vocab", self.vocab),
        ] {
            if v == 0 {
                return Err(HecvlError::Config(format!("model.{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualEncoderParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEncoderParams {
    pub embed: Matrix,
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

/// All trainable weights: one visual and one textual encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub visual: VisualEncoderParams,
    pub text: TextEncoderParams,
}

/// Names of the parameter blocks, in [`ModelParams::blocks`] order.
pub const BLOCK_NAMES: [&str; 9] = [
    "visual.w1",
    "visual.b1",
    "visual.w2",
    "visual.b2",
    "text.embed",
    "text.w1",
    "text.b1",
    "text.w2",
    "text.b2",
];

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-a..=a)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let visual = VisualEncoderParams {
            w1: glorot(cfg.d_in, cfg.hidden, rng),
            b1: Matrix::zeros(1, cfg.hidden),
            w2: glorot(cfg.hidden, cfg.d_emb, rng),
            b2: Matrix::zeros(1, cfg.d_emb),
        };
        let text = TextEncoderParams {
            embed: glorot(cfg.vocab, cfg.d_tok, rng),
            w1: glorot(cfg.d_tok, cfg.hidden, rng),
            b1: Matrix::zeros(1, cfg.hidden),
            w2: glorot(cfg.hidden, cfg.d_emb, rng),
            b2: Matrix::zeros(1, cfg.d_emb),
        };
        Ok(Self { visual, text })
    }

    /// All-zero parameters with the shapes implied by `cfg`.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let z = Matrix::zeros;
        Ok(Self {
            visual: VisualEncoderParams {
                w1: z(cfg.d_in, cfg.hidden),
                b1: z(1, cfg.hidden),
                w2: z(cfg.hidden, cfg.d_emb),
                b2: z(1, cfg.d_emb),
            },
            text: TextEncoderParams {
                embed: z(cfg.vocab, cfg.d_tok),
                w1: z(cfg.d_tok, cfg.hidden),
                b1: z(1, cfg.hidden),
                w2: z(cfg.hidden, cfg.d_emb),
                b2: z(1, cfg.d_emb),
            },
        })
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Self {
            visual: VisualEncoderParams {
                w1: z(&self.visual.w1),
                b1: z(&self.visual.b1),
                w2: z(&self.visual.w2),
                b2: z(&self.visual.b2),
            },
            text: TextEncoderParams {
                embed: z(&self.text.embed),
                w1: z(&self.text.w1),
                b1: z(&self.text.b1),
                w2: z(&self.text.w2),
                b2: z(&self.text.b2),
            },
        }
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            d_in: self.visual.w1.rows(),
            hidden: self.visual.w1.cols(),
            d_emb: self.visual.w2.cols(),
            d_tok: self.text.embed.cols(),
            vocab: self.text.embed.rows(),
        }
    }

    pub fn blocks(&self) -> [&Matrix; 9] {
        let (v, t) = (&self.visual, &self.text);
        [&v.w1, &v.b1, &v.w2, &v.b2, &t.embed, &t.w1, &t.b1, &t.w2, &t.b2]
    }

    pub fn blocks_mut(&mut self) -> [&mut Matrix; 9] {
        let (v, t) = (&mut self.visual, &mut self.text);
        [
            &mut v.w1, &mut v.b1, &mut v.w2, &mut v.b2, &mut t.embed, &mut t.w1, &mut t.b1,
            &mut t.w2, &mut t.b2,
        ]
    }

    pub fn to_blocks(&self) -> Vec<Matrix> {
        self.blocks().into_iter().cloned().collect()
    }

    /// Rebuilds parameters from blocks in [`BLOCK_NAMES`] order, checking
    /// shapes against `self`.
    pub fn with_blocks(&self, blocks: &[Matrix]) -> Result<Self> {
        if blocks.len() != BLOCK_NAMES.len() {
            return Err(HecvlError::Contract(format!(
                "expected {} parameter blocks, got {}",
                BLOCK_NAMES.len(),
                blocks.len()
            )));
        }
        let mut out = self.clone();
        for (dst, src) in out.blocks_mut().into_iter().zip(blocks) {
            if dst.shape() != src.shape() {
                return Err(HecvlError::Shape {
                    op: "with_blocks",
                    left_rows: dst.rows(),
                    left_cols: dst.cols(),
                    right_rows: src.rows(),
                    right_cols: src.cols(),
                });
            }
            *dst = src.clone();
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.is_finite())
    }

    pub fn num_values(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// SHA-256 over the little-endian bytes of every block.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::with_capacity(self.num_values() * 8);
        for b in self.blocks() {
            for v in b.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        digest_hex(&bytes)
    }

    /// Places every block on `tape`, as trainable leaves or as constants.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> ParamVars {
        let mut put = |m: &Matrix| {
            if trainable {
                tape.param(m.clone())
            } else {
                tape.constant(m.clone())
            }
        };
        let v = &self.visual;
        let t = &self.text;
        ParamVars {
            vars: [
                put(&v.w1),
                put(&v.b1),
                put(&v.w2),
                put(&v.b2),
                put(&t.embed),
                put(&t.w1),
                put(&t.b1),
                put(&t.w2),
                put(&t.b2),
            ],
            config: self.config(),
        }
    }
}

/// Tape handles for the blocks of one [`ModelParams`].
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub vars: [Var; 9],
    pub config: ModelConfig,
}

impl ParamVars {
    /// Pulls the gradient of every block out of `grads` as a
    /// [`ModelParams`]-shaped value.
    pub fn collect_grads(
        &self,
        like: &ModelParams,
        grads: &mut crate::numerics::Gradients,
    ) -> Result<ModelParams> {
        let mut out = like.zeros_like();
        for (dst, var) in out.blocks_mut().into_iter().zip(self.vars) {
            let g = grads.take(var).ok_or_else(|| {
                HecvlError::Contract("parameter block was not registered as trainable".into())
            })?;
            *dst = g;
        }
        Ok(out)
    }

    fn mlp(&self, tape: &mut Tape, x: Var, first: usize) -> Result<Var> {
        let v = &self.vars;
        let h = tape.matmul(x, v[first])?;
        let h = tape.add_row(h, v[first + 1])?;
        let h = tape.relu(h);
        let o = tape.matmul(h, v[first + 2])?;
        tape.add_row(o, v[first + 3])
    }

    /// Encodes groups of frames into one unit-norm row per group.
    pub fn encode_segments(&self, tape: &mut Tape, groups: &[Vec<&Frame>]) -> Result<Var> {
        let d_in = self.config.d_in;
        let mut sizes = Vec::with_capacity(groups.len());
        let mut data = Vec::new();
        for g in groups {
            if g.is_empty() {
                return Err(HecvlError::EmptySegment);
            }
            for f in g {
                if f.len() != d_in {
                    return Err(HecvlError::Shape {
                        op: "encode_segment",
                        left_rows: 1,
                        left_cols: f.len(),
                        right_rows: d_in,
                        right_cols: self.config.hidden,
                    });
                }
                data.extend_from_slice(f);
            }
            sizes.push(g.len());
        }
        let total = sizes.iter().sum();
        let x = tape.constant(Matrix::from_vec(total, d_in, data)?);
        let per_frame = self.mlp(tape, x, 0)?;
        let pooled = tape.mean_pool_groups(per_frame, sizes)?;
        tape.l2_normalize_rows(pooled)
    }

    /// Encodes texts into one unit-norm row per text.
    pub fn encode_texts(&self, tape: &mut Tape, texts: &[&TextTokens]) -> Result<Var> {
        if texts.is_empty() {
            return Err(HecvlError::EmptyAggregation);
        }
        let mut ids = Vec::new();
        let mut sizes = Vec::with_capacity(texts.len());
        for t in texts {
            t.check_vocab(self.config.vocab)?;
            ids.extend(t.ids().iter().map(|&i| i as usize));
            sizes.push(t.len());
        }
        let tokens = tape.gather_rows(self.vars[4], ids)?;
        let pooled = tape.mean_pool_groups(tokens, sizes)?;
        let out = self.mlp(tape, pooled, 5)?;
        tape.l2_normalize_rows(out)
    }
}

/// Indices `floor(j·len/k)` for `j = 0..k`.
pub fn sample_indices(len: usize, k: usize) -> Result<Vec<usize>> {
    if len == 0 {
        return Err(HecvlError::EmptySegment);
    }
    if k == 0 {
        return Err(HecvlError::Config("frame sample count must be >= 1".into()));
    }
    Ok((0..k).map(|j| j * len / k).collect())
}

/// Picks `k` evenly spaced frames (with repeats when the segment is shorter
/// than `k`).
pub fn sample_frames<T>(frames: &[T], k: usize) -> Result<Vec<&T>> {
    Ok(sample_indices(frames.len(), k)?
        .into_iter()
        .map(|i| &frames[i])
        .collect())
}

/// Unit-norm embedding of one segment.
pub fn encode_segment(frames: &[&Frame], params: &ModelParams) -> Result<Vec<f64>> {
    let m = embed_segments(&[frames.to_vec()], params)?;
    Ok(m.row(0).to_vec())
}

/// Unit-norm embedding of one text.
pub fn encode_text(tokens: &TextTokens, params: &ModelParams) -> Result<Vec<f64>> {
    let m = embed_texts(&[tokens], params)?;
    Ok(m.row(0).to_vec())
}

/// Inference-only batch form of [`encode_segment`].
pub fn embed_segments(groups: &[Vec<&Frame>], params: &ModelParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let out = vars.encode_segments(&mut tape, groups)?;
    Ok(tape.value(out).clone())
}

/// Inference-only batch form of [`encode_text`].
pub fn embed_texts(texts: &[&TextTokens], params: &ModelParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let out = vars.encode_texts(&mut tape, texts)?;
    Ok(tape.value(out).clone())
}
