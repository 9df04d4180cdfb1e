//! Binary checkpoint: magic, little-endian `u32` version, `u64` header
//! length, a JSON header, then every parameter as raw little-endian `f64`s in
//! [`ModelParams::tensors`] order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::tensor::DenseMatrix;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GRAPHLP\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    n: usize,
    config: ModelConfig,
    shapes: Vec<(usize, usize)>,
}

pub fn encode(params: &ModelParams) -> Result<Vec<u8>> {
    params.validate()?;
    let tensors = params.tensors();
    let header = serde_json::to_vec(&Header {
        n: params.n,
        config: params.config.clone(),
        shapes: tensors.iter().map(|t| t.shape()).collect(),
    })?;
    let payload: usize = tensors.iter().map(|t| t.len()).sum();
    let mut out = Vec::with_capacity(8 + 4 + 8 + header.len() + 8 * payload);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &mut &'a [u8], k: usize) -> Result<&'a [u8]> {
    if bytes.len() < k {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    let (head, rest) = bytes.split_at(k);
    *bytes = rest;
    Ok(head)
}

pub fn decode(mut bytes: &[u8]) -> Result<ModelParams> {
    let bytes = &mut bytes;
    if take(bytes, 8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(bytes, 4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(take(bytes, 8)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(take(bytes, header_len)?)?;
    let mut tensors = Vec::with_capacity(header.shapes.len());
    for &(r, c) in &header.shapes {
        let raw = take(bytes, r.checked_mul(c).and_then(|k| k.checked_mul(8)).ok_or_else(|| {
            Error::Checkpoint("tensor size overflow".into())
        })?)?;
        let data = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        tensors.push(DenseMatrix::new(r, c, data).map_err(|e| Error::Checkpoint(e.to_string()))?);
    }
    if !bytes.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len())));
    }
    if tensors.len() < 4 {
        return Err(Error::Checkpoint("too few tensors".into()));
    }
    let mlp = tensors.split_off(tensors.len() - 4);
    let [mlp_w1, mlp_b1, mlp_w2, mlp_b2]: [DenseMatrix; 4] = mlp.try_into().unwrap();
    let params = ModelParams {
        config: header.config,
        n: header.n,
        layer_weights: tensors,
        mlp_w1,
        mlp_b1,
        mlp_w2,
        mlp_b2,
    };
    params.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), &encode(params)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    decode(&std::fs::read(path.as_ref())?)
}
