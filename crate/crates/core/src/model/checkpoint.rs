//! Binary checkpoint container:
//!
//! ```text
//! b"NFGT" | u32 version | u32 header length | JSON header | f32 values
//! ```
//!
//! Integers and values are little-endian. The header lists every tensor by
//! name and shape in storage order; values follow in that order, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, Task};
use crate::engine::{Real, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"NFGT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub tool_version: String,
    pub seed: u64,
    pub model: ModelConfig,
    pub task: Task,
    pub tensors: Vec<TensorEntry>,
}

pub fn write_checkpoint<F: Real>(w: &mut impl Write, model: &Model<F>, seed: u64) -> Result<()> {
    let header = CheckpointHeader {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        model: *model.config(),
        task: model.task(),
        tensors: model
            .specs()
            .iter()
            .map(|s| TensorEntry {
                name: s.name.clone(),
                shape: s.shape,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for t in model.params() {
        for &x in t.data() {
            w.write_all(&(x.f64() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<F: Real>(r: &mut impl Read) -> Result<(CheckpointHeader, Model<F>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let len = read_u32(r)? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&json).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut named = Vec::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let n = entry.shape[0] * entry.shape[1];
        let mut bytes = vec![0u8; 4 * n];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Checkpoint(format!("truncated data in `{}`", entry.name)))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| F::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        named.push((
            entry.name.clone(),
            Tensor::from_vec(entry.shape[0], entry.shape[1], data),
        ));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after tensor data".into()));
    }
    let model = Model::from_named(header.model, header.task, named)?;
    Ok((header, model))
}

impl<F: Real> Model<F> {
    pub fn save(&self, path: impl AsRef<Path>, seed: u64) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_checkpoint(&mut w, self, seed)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(CheckpointHeader, Self)> {
        read_checkpoint(&mut BufReader::new(File::open(path)?))
    }
}
