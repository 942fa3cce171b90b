//! Layout: 8-byte magic, u64 LE header length, JSON header, then raw f64 LE
//! values for every parameter tensor, followed by Adam's first and second
//! moments when present.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::numcore::{AdamConfig, AdamState, ParamStore, Tensor};

const MAGIC: &[u8; 8] = b"CMCKPT\0\x01";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: EncoderConfig,
    pub params: ParamStore,
    pub optimizer: Option<AdamState>,
    /// Optimizer steps taken so far.
    pub step: u64,
    /// Free-form run metadata (e.g. the training config).
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerEntry {
    config: AdamConfig,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    encoder: EncoderConfig,
    step: u64,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
    optimizer: Option<OptimizerEntry>,
}

impl Checkpoint {
    pub fn from_encoder(encoder: &Encoder, optimizer: Option<&AdamState>, step: u64) -> Self {
        Checkpoint {
            encoder: encoder.config.clone(),
            params: encoder.params.clone(),
            optimizer: optimizer.cloned(),
            step,
            meta: serde_json::Value::Null,
        }
    }

    pub fn to_encoder(&self) -> Result<Encoder> {
        Encoder::from_params(self.encoder.clone(), self.params.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: FORMAT_VERSION,
            encoder: self.encoder.clone(),
            step: self.step,
            meta: self.meta.clone(),
            tensors: self
                .params
                .iter()
                .map(|(_, name, t)| TensorEntry { name: name.to_string(), shape: t.shape().to_vec() })
                .collect(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerEntry { config: o.config, step: o.step }),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len() + 8 * self.params.num_scalars() * 3);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |vals: &[f64]| vals.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        self.params.iter().for_each(|(_, _, t)| put(t.data()));
        if let Some(o) = &self.optimizer {
            o.first_moment.iter().for_each(|m| put(m));
            o.second_moment.iter().for_each(|m| put(m));
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |d: &str| Error::Checkpoint(d.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let mut data = bytes[16 + hlen..].chunks_exact(8);
        if !data.remainder().is_empty() {
            return Err(bad("trailing bytes"));
        }
        let mut take = |n: usize| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| {
                    data.next()
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .ok_or_else(|| bad("truncated tensor data"))
                })
                .collect()
        };
        let mut params = ParamStore::new();
        for e in &header.tensors {
            let n = e.shape.iter().product();
            params.add(e.name.clone(), Tensor::new(e.shape.clone(), take(n)?)?);
        }
        let optimizer = match header.optimizer {
            None => None,
            Some(o) => {
                let sizes: Vec<usize> = params.iter().map(|(_, _, t)| t.numel()).collect();
                let first = sizes.iter().map(|&n| take(n)).collect::<Result<Vec<_>>>()?;
                let second = sizes.iter().map(|&n| take(n)).collect::<Result<Vec<_>>>()?;
                Some(AdamState { config: o.config, step: o.step, first_moment: first, second_moment: second })
            }
        };
        if take(1).is_ok() {
            return Err(bad("unexpected data after tensors"));
        }
        Ok(Checkpoint { encoder: header.encoder, params, optimizer, step: header.step, meta: header.meta })
    }

    /// Writes to a temporary file next to `path`, then renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&self.to_bytes()?)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(d) => Error::Checkpoint(format!("{}: {d}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EncoderConfig {
        EncoderConfig {
            hidden_size: 8,
            heads: 2,
            ffn_size: 8,
            max_positions: 8,
            vocab_size: 12,
            projection_dim: 4,
            ..EncoderConfig::default()
        }
    }

    #[test]
    fn round_trip_with_optimizer() {
        let enc = Encoder::init(cfg(), 4).unwrap();
        let mut adam = AdamState::new(AdamConfig::default(), &enc.params);
        adam.step = 3;
        adam.first_moment[0][1] = 0.25;
        let mut ck = Checkpoint::from_encoder(&enc, Some(&adam), 3);
        ck.meta = serde_json::json!({"seed": 4});
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), std::fs::read(&path).unwrap());
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(Checkpoint::from_bytes(b"hello world, not a checkpoint").is_err());
        let enc = Encoder::init(cfg(), 0).unwrap();
        let bytes = Checkpoint::from_encoder(&enc, None, 0).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
    }
}
