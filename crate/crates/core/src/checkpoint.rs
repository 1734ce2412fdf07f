//! Binary checkpoint format, version 1. All integers little-endian.
//!
//! | bytes    | content                                                   |
//! |----------|-----------------------------------------------------------|
//! | 4        | magic `SGVF`                                              |
//! | 4        | format version, `u32`                                     |
//! | 4        | header length `L`, `u32`                                  |
//! | L        | header: UTF-8 TOML with `seed`, `config_hash` and `[model]` (canonical model config) |
//! | 8        | parameter count `N`, `u64`                                |
//! | 4·N      | parameters as `f32`, layer order (kernels, biases, weights, biases, ...) |
//! | 4        | CRC-32 (IEEE) of every preceding byte                     |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"SGVF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network<f32>,
    /// Seed of the run that produced the parameters.
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    seed: u64,
    config_hash: String,
    model: ModelConfig,
}

pub fn encode(net: &Network<f32>, seed: u64) -> Vec<u8> {
    let header = Header {
        seed,
        config_hash: net.config().hash(),
        model: net.config().clone(),
    };
    let text = toml::to_string(&header).expect("header always serializes");
    let params = net.params();
    let count: usize = params.iter().map(|p| p.len()).sum();

    let mut out = Vec::with_capacity(24 + text.len() + 4 * count);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for p in params {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::CheckpointTruncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(Error::CheckpointTruncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::CheckpointMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let header_len = r.u32()? as usize;
    let header = r.take(header_len)?;
    let count = usize::try_from(r.u64()?).map_err(|_| Error::CheckpointTruncated)?;
    let raw = r.take(count.checked_mul(4).ok_or(Error::CheckpointTruncated)?)?;
    let body_end = r.pos;
    let stored = r.u32()?;
    if r.pos != bytes.len() {
        return Err(Error::Config(format!(
            "checkpoint has {} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(Error::CheckpointChecksum { stored, computed });
    }

    let text = std::str::from_utf8(header).map_err(|_| Error::Config("checkpoint header is not UTF-8".into()))?;
    let header: Header = toml::from_str(text).map_err(|e| Error::Config(format!("checkpoint header: {e}")))?;
    header.model.propagate()?;
    if header.model.hash() != header.config_hash {
        return Err(Error::Config("checkpoint config hash does not match its model".into()));
    }

    let values: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    let template = Network::<f32>::build(&header.model, &mut crate::Rng::new(0))?;
    let expected: usize = template.param_count();
    if expected != values.len() {
        return Err(Error::Config(format!(
            "checkpoint stores {} parameters, model needs {expected}",
            values.len()
        )));
    }
    let mut offset = 0;
    let mut params = Vec::new();
    for p in template.params() {
        let len = p.len();
        params.push(Tensor::from_vec(p.shape(), values[offset..offset + len].to_vec())?);
        offset += len;
    }
    Ok(Checkpoint {
        network: Network::from_params(&header.model, params)?,
        seed: header.seed,
    })
}

pub fn save_checkpoint(net: &Network<f32>, seed: u64, path: &Path) -> Result<()> {
    std::fs::write(path, encode(net, seed)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
