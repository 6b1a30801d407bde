//! Model checkpoints, magic `HSCK`: a JSON config echo followed by named
//! parameter blocks in little-endian f32.
//!
//! ```text
//! "HSCK" | version u32 | meta_len u32 | meta JSON bytes
//! | block_count u32
//! per block: name_len u32 | name | rank u32 | dims u32* | data f32*
//! ```
//!
//! Only trainable tensors are stored; frozen parts (meta tokens, encoder)
//! are rebuilt deterministically from the config echo.

use std::path::Path;

use hyperscore_core::model::{ModelConfig, ModelParams};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"HSCK";
const VERSION: u32 = 1;

/// Everything needed to rebuild the model around the stored tensors.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    /// Seed of the frozen parts (text encoder); trainable tensors come
    /// from the stored blocks.
    pub seed: u64,
    pub config_hash: String,
}

pub fn encode_checkpoint(model: &ModelParams<f32>, meta: &CheckpointMeta) -> Result<Vec<u8>> {
    let meta_json =
        serde_json::to_vec(meta).map_err(|e| CliError::Data(format!("meta encode: {e}")))?;
    let tensors = model.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, _, tensor) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelParams<f32>, CheckpointMeta)> {
    let mut cursor = Cursor { bytes, pos: 0 };
    if cursor.take(4)? != MAGIC {
        return Err(CliError::Data("checkpoint: missing HSCK magic".into()));
    }
    let version = cursor.u32()?;
    if version != VERSION {
        return Err(CliError::Data(format!(
            "checkpoint: unsupported version {version}"
        )));
    }
    let meta_len = cursor.u32()? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(cursor.take(meta_len)?)
        .map_err(|e| CliError::Data(format!("checkpoint meta: {e}")))?;
    let mut model = ModelParams::<f32>::init(&meta.model, meta.seed).map_err(CliError::from)?;

    let block_count = cursor.u32()? as usize;
    let expected: Vec<String> = model.tensors().into_iter().map(|(n, _, _)| n).collect();
    if block_count != expected.len() {
        return Err(CliError::Data(format!(
            "checkpoint: {block_count} blocks, model defines {}",
            expected.len()
        )));
    }
    for want in expected {
        let name_len = cursor.u32()? as usize;
        let name = std::str::from_utf8(cursor.take(name_len)?)
            .map_err(|_| CliError::Data("checkpoint: bad block name".into()))?
            .to_string();
        if name != want {
            return Err(CliError::Data(format!(
                "checkpoint: block {name}, expected {want}"
            )));
        }
        let rank = cursor.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cursor.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut tensors = model.tensors_mut();
        let slot = tensors
            .iter_mut()
            .find(|(n, _, _)| *n == name)
            .expect("name checked above");
        if slot.2.shape() != shape.as_slice() {
            return Err(CliError::Data(format!(
                "checkpoint: {name} has shape {shape:?}, model expects {:?}",
                slot.2.shape()
            )));
        }
        for i in 0..len {
            let raw = cursor.take(4)?;
            slot.2.data_mut()[i] = f32::from_le_bytes(raw.try_into().unwrap());
        }
    }
    if cursor.pos != bytes.len() {
        return Err(CliError::Data(format!(
            "checkpoint: {} trailing bytes",
            bytes.len() - cursor.pos
        )));
    }
    Ok((model, meta))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CliError::Data("checkpoint: truncated".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn save_checkpoint(path: &Path, model: &ModelParams<f32>, meta: &CheckpointMeta) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model, meta)?)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams<f32>, CheckpointMeta)> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
