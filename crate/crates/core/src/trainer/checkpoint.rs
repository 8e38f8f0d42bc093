//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "HECV" | version u32 | config digest [32] | config json (u64 len + bytes)
//! | batch index u64 | rng seed [32] | rng stream u64 | rng word pos u128
//! | optimizer step u64 | block count u32
//! | blocks: (rows u32, cols u32, len u64, f64 × len) for params, m, v
//! | sha256 of everything above [32]
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::encoders::{ModelParams, BLOCK_NAMES};
use crate::error::{HecvlError, Result};
use crate::numerics::Matrix;

use super::adamw::OptimizerState;
use super::TrainConfig;

pub const MAGIC: &[u8; 4] = b"HECV";
pub const VERSION: u32 = 1;

/// Serializable position of a ChaCha stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Number of batches already trained.
    pub batch_index: u64,
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let config_json = serde_json::to_vec(&self.config).map_err(std::io::Error::from)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&Sha256::digest(&config_json));
        out.extend_from_slice(&(config_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&config_json);
        out.extend_from_slice(&self.batch_index.to_le_bytes());
        out.extend_from_slice(&self.rng.seed);
        out.extend_from_slice(&self.rng.stream.to_le_bytes());
        out.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        out.extend_from_slice(&self.optimizer.step.to_le_bytes());

        let blocks: Vec<&Matrix> = self
            .params
            .blocks()
            .into_iter()
            .chain(&self.optimizer.m)
            .chain(&self.optimizer.v)
            .collect();
        out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
        for b in blocks {
            out.extend_from_slice(&(b.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(b.cols() as u32).to_le_bytes());
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            for v in b.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = Sha256::digest(&out);
        out.extend_from_slice(&sum);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 + 32 || &bytes[..4] != MAGIC {
            return Err(HecvlError::Integrity("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(HecvlError::Version {
                found: version.to_string(),
            });
        }
        let (body, sum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != sum {
            return Err(HecvlError::Integrity("checksum mismatch".into()));
        }

        let mut r = Reader { buf: body, pos: 8 };
        let digest = r.take(32)?.to_vec();
        let len = r.u64()? as usize;
        let config_json = r.take(len)?;
        if Sha256::digest(config_json).as_slice() != digest.as_slice() {
            return Err(HecvlError::Integrity("config digest mismatch".into()));
        }
        let config: TrainConfig = serde_json::from_slice(config_json)
            .map_err(|e| HecvlError::Integrity(format!("config payload: {e}")))?;
        let batch_index = r.u64()?;
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        let step = r.u64()?;

        let count = r.u32()? as usize;
        let n = BLOCK_NAMES.len();
        if count != 3 * n {
            return Err(HecvlError::Integrity(format!(
                "expected {} arrays, found {count}",
                3 * n
            )));
        }
        let mut blocks = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let len = r.u64()? as usize;
            if rows.checked_mul(cols) != Some(len) {
                return Err(HecvlError::Integrity("array length disagrees with shape".into()));
            }
            let raw = r.take(len.checked_mul(8).ok_or_else(|| {
                HecvlError::Integrity("array length overflow".into())
            })?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            blocks.push(Matrix::from_vec(rows, cols, data)?);
        }
        if r.pos != body.len() {
            return Err(HecvlError::Integrity("trailing bytes after payload".into()));
        }
        let v = blocks.split_off(2 * n);
        let m = blocks.split_off(n);

        let params = ModelParams::zeros(&config.model)
            .map_err(|e| HecvlError::Integrity(format!("model config: {e}")))?
            .with_blocks(&blocks)
            .map_err(|e| HecvlError::Integrity(format!("parameter blocks: {e}")))?;
        for (a, b) in m.iter().chain(&v).zip(params.blocks().iter().cycle()) {
            if a.shape() != b.shape() {
                return Err(HecvlError::Integrity("optimizer moment shape mismatch".into()));
            }
        }
        Ok(Self {
            config,
            batch_index,
            params,
            optimizer: OptimizerState { step, m, v },
            rng: RngState {
                seed,
                stream,
                word_pos,
            },
        })
    }

    /// Short identifier: first 16 hex digits of the file digest.
    pub fn id(&self) -> Result<String> {
        Ok(crate::rng::digest_hex(&self.to_bytes()?)[..16].to_string())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| HecvlError::Integrity("truncated checkpoint payload".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&ckpt.to_bytes()?)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    Checkpoint::from_bytes(&bytes)
}
