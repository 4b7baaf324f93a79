//! Checkpoint files.
//!
//! Layout: the magic `NMGEN1`, a little-endian `u32` byte length, a UTF-8
//! JSON metadata document of that length, then one record per tensor listed
//! in the metadata, in order: `u32` name length, name bytes, `u32` rank,
//! `u32` per dimension, and the values as little-endian `f32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Params, Tensor};
use crate::policy::{Policy, PolicyConfig};
use crate::trainer::TrainConfig;
use crate::vocab::Vocab;

pub const MAGIC: &[u8; 6] = b"NMGEN1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub model: PolicyConfig,
    pub vocab: Vec<String>,
    pub vocab_hash: String,
    /// Longest training sentence; sets the default decoding cap.
    pub max_train_len: usize,
    pub train: Option<TrainConfig>,
    pub tensors: Vec<TensorInfo>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub policy: Policy,
    pub vocab: Vocab,
    pub max_train_len: usize,
    pub train: Option<TrainConfig>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")) as usize)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in 32 bits")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

impl Checkpoint {
    pub fn new(policy: Policy, vocab: Vocab, max_train_len: usize, train: Option<TrainConfig>) -> Result<Self> {
        if policy.config().vocab_size != vocab.len() {
            return Err(Error::Checkpoint(format!(
                "model has {} actions but the vocabulary has {}",
                policy.config().vocab_size,
                vocab.len()
            )));
        }
        Ok(Checkpoint {
            policy,
            vocab,
            max_train_len,
            train,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let params = self.policy.params();
        let meta = Metadata {
            model: self.policy.config().clone(),
            vocab: self.vocab.tokens().to_vec(),
            vocab_hash: self.vocab.hash(),
            max_train_len: self.max_train_len,
            train: self.train.clone(),
            tensors: params
                .iter()
                .map(|(name, t)| TensorInfo {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&meta)?;
        let mut out = Vec::with_capacity(json.len() + 4 * params.numel() + 64);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, json.len())?;
        out.extend_from_slice(&json);
        for (name, t) in params.iter() {
            put_u32(&mut out, name.len())?;
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, t.shape().len())?;
            for &d in t.shape() {
                put_u32(&mut out, d)?;
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let n = r.u32()?;
        let meta: Metadata = serde_json::from_slice(r.take(n)?)?;
        let vocab = Vocab::from_tokens(meta.vocab.clone())?;
        let found = vocab.hash();
        if found != meta.vocab_hash {
            return Err(Error::VocabMismatch {
                expected: meta.vocab_hash,
                found,
            });
        }
        let mut params = Params::new();
        for info in &meta.tensors {
            let len = r.u32()?;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            if name != info.name {
                return Err(Error::Checkpoint(format!("expected tensor {}, found {name}", info.name)));
            }
            let rank = r.u32()?;
            let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            if shape != info.shape {
                return Err(Error::Checkpoint(format!("tensor {name} shape disagrees with metadata")));
            }
            let count: usize = shape.iter().product();
            let raw = r.take(count.checked_mul(4).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")))
                .collect();
            if params.insert(name.clone(), Tensor::new(shape, data)?).is_some() {
                return Err(Error::Checkpoint(format!("tensor {name} appears twice")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let policy = Policy::from_params(meta.model, params)?;
        Checkpoint::new(policy, vocab, meta.max_train_len, meta.train)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}
