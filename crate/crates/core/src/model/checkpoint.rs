//! Binary checkpoint format.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "LCTL" version
//! header_len header_json header_crc
//! blob_count
//! { name_len name ndim dims.. count f32.. crc }*
//! ```
//!
//! Each blob checksum covers the blob bytes from `name_len` to the last
//! value. A file that ends early fails its checksum.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::transformer::Model;
use super::vocab::Vocab;
use crate::error::{CheckpointError, Error, Result};
use crate::nnet::{ParamStore, Tensor, TrainHyper};
use crate::textproc::MergeTable;

pub const MAGIC: &[u8; 4] = b"LCTL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    hyper: TrainHyper,
    merges: String,
    vocab: Vec<String>,
    step: usize,
    dev_loss: Option<f64>,
    lineage: Option<String>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

/// A trained model with the settings and progress that produced it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub hyper: TrainHyper,
    /// Optimizer step of the saved parameters.
    pub step: usize,
    pub dev_loss: Option<f64>,
    /// Fingerprint of the checkpoint this one was fine-tuned from.
    pub lineage: Option<String>,
    /// Free-form provenance such as the producing config hash.
    pub meta: BTreeMap<String, String>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.at < n {
            return Err(CheckpointError::Checksum(format!("{what} (file truncated)")).into());
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("four bytes")) as usize)
    }
}

fn malformed(m: impl Into<String>) -> Error {
    CheckpointError::Malformed(m.into()).into()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.model.config().clone(),
            hyper: self.hyper.clone(),
            merges: self.model.merges().to_text(),
            vocab: self.model.vocab().tokens().to_vec(),
            step: self.step,
            dev_loss: self.dev_loss.filter(|l| l.is_finite()),
            lineage: self.lineage.clone(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| malformed(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION as usize);
        put_u32(&mut out, json.len());
        out.extend_from_slice(&json);
        put_u32(&mut out, crc32fast::hash(&json) as usize);
        let params = self.model.params();
        put_u32(&mut out, params.len());
        for (_, name, t) in params.iter() {
            let start = out.len();
            put_u32(&mut out, name.len());
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, t.shape().len());
            for &d in t.shape() {
                put_u32(&mut out, d);
            }
            put_u32(&mut out, t.len());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            let crc = crc32fast::hash(&out[start..]);
            put_u32(&mut out, crc as usize);
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < 4 || &buf[..4] != MAGIC {
            return Err(CheckpointError::BadMagic.into());
        }
        let mut r = Reader { buf, at: 4 };
        let version = r.u32("version")? as u32;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: FORMAT_VERSION,
            }
            .into());
        }
        let hlen = r.u32("header length")?;
        let json = r.take(hlen, "header")?;
        if r.u32("header checksum")? as u32 != crc32fast::hash(json) {
            return Err(CheckpointError::Checksum("header".into()).into());
        }
        let header: Header = serde_json::from_slice(json).map_err(|e| malformed(format!("header: {e}")))?;
        let count = r.u32("parameter count")?;
        let mut params = ParamStore::new();
        for i in 0..count {
            let start = r.at;
            let what = format!("parameter blob {i}");
            let nlen = r.u32(&what)?;
            let name = r.take(nlen, &what)?;
            let ndim = r.u32(&what)?;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u32(&what)?);
            }
            let n = r.u32(&what)?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| malformed("blob size"))?, &what)?;
            let end = r.at;
            if r.u32(&what)? as u32 != crc32fast::hash(&buf[start..end]) {
                return Err(CheckpointError::Checksum(what).into());
            }
            let name = std::str::from_utf8(name).map_err(|_| malformed("parameter name is not UTF-8"))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")))
                .collect();
            let t = Tensor::from_vec(&shape, data).map_err(|e| malformed(format!("`{name}`: {e}")))?;
            params.add(name, t)?;
        }
        if r.at != buf.len() {
            return Err(malformed(format!("{} trailing bytes", buf.len() - r.at)));
        }
        let vocab = Vocab::from_tokens(header.vocab)?;
        let merges = MergeTable::from_text(&header.merges)?;
        let model = Model::from_parts(header.config, vocab, merges, params)?;
        Ok(Self {
            model,
            hyper: header.hyper,
            step: header.step,
            dev_loss: header.dev_loss,
            lineage: header.lineage,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_bytes()?)))
    }
}
