//! Binary checkpoint: `CXSV`, version byte, u32 LE metadata length, JSON
//! metadata, the parameter tensors as f32 LE in declaration order, and a
//! trailing CRC-32 (LE) over every preceding byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use xraycnn_core::{Error, Head, NetworkSpec, ParamSet, Result};

pub const MAGIC: &[u8; 4] = b"CXSV";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub spec: NetworkSpec,
    pub head: Head,
    pub sobel: bool,
    pub input_side: usize,
    pub seed: u64,
    pub fold: usize,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: ParamSet<f32>,
}

impl Checkpoint {
    pub fn new(spec: &NetworkSpec, params: ParamSet<f32>, sobel: bool, seed: u64, fold: usize) -> Self {
        Self {
            meta: CheckpointMeta {
                spec: spec.clone(),
                head: spec.head,
                sobel,
                input_side: spec.input_side,
                seed,
                fold,
                param_count: params.num_params(),
            },
            params,
        }
    }
}

pub fn to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let meta = serde_json::to_vec(&ckpt.meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(13 + meta.len() + ckpt.meta.param_count * 4);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    for t in ckpt.params.tensors() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let corrupt = |reason: String| Error::Corrupt { path: path.to_path_buf(), reason };
    if bytes.len() < 13 {
        return Err(corrupt(format!("file is {} bytes, too short for a checkpoint", bytes.len())));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(corrupt("checksum mismatch".into()));
    }
    if &body[..4] != MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    if body[4] != VERSION {
        return Err(corrupt(format!("unsupported version {}", body[4])));
    }
    let meta_len = u32::from_le_bytes(body[5..9].try_into().unwrap()) as usize;
    let blob_start = 9usize
        .checked_add(meta_len)
        .filter(|&e| e <= body.len())
        .ok_or_else(|| corrupt("metadata length exceeds file".into()))?;
    let meta: CheckpointMeta =
        serde_json::from_slice(&body[9..blob_start]).map_err(|e| corrupt(format!("metadata: {e}")))?;
    if meta.head != meta.spec.head || meta.input_side != meta.spec.input_side {
        return Err(corrupt("metadata disagrees with its network spec".into()));
    }
    let blob = &body[blob_start..];
    if blob.len() != meta.param_count * 4 {
        return Err(corrupt(format!(
            "weight blob holds {} bytes, metadata declares {} parameters",
            blob.len(),
            meta.param_count
        )));
    }
    let values: Vec<f32> = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = ParamSet::from_flat(&meta.spec, &values).map_err(|e| corrupt(format!("parameters do not fit spec: {e}")))?;
    Ok(Checkpoint { meta, params })
}

pub fn save(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
