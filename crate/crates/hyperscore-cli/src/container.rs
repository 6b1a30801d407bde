//! Binary feature container, magic `HSF1`.
//!
//! Layout (all integers little-endian u32, all floats little-endian f32):
//!
//! ```text
//! "HSF1" | M | N_v | N_t | D | eot_index
//! M x (elevation_deg f32, azimuth_deg f32)
//! views: M * N_v * D f32, row-major, view-major
//! text tokens: N_t * D f32, row-major
//! ```
//!
//! The payload length must match the header exactly; every value must be
//! finite. The sample id is not stored: it comes from the manifest (or the
//! file stem when loading standalone).

use std::path::Path;

use hyperscore_core::feature::FeatureBundle;
use hyperscore_core::Tensor;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"HSF1";

pub fn encode_bundle(bundle: &FeatureBundle) -> Result<Vec<u8>> {
    bundle.validate().map_err(CliError::from)?;
    let dims = bundle.dims();
    let mut out = Vec::with_capacity(
        4 + 20 + dims.views * 8 + (dims.views * dims.patches + dims.text_len) * dims.feat_dim * 4,
    );
    out.extend_from_slice(MAGIC);
    for v in [
        dims.views,
        dims.patches,
        dims.text_len,
        dims.feat_dim,
        bundle.eot_index,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &(elev, azim) in &bundle.viewpoints {
        out.extend_from_slice(&elev.to_le_bytes());
        out.extend_from_slice(&azim.to_le_bytes());
    }
    for view in &bundle.views {
        for &v in view.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for &v in bundle.text_tokens.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_bundle(bytes: &[u8], sample_id: &str) -> Result<FeatureBundle> {
    if bytes.len() < 24 || &bytes[..4] != MAGIC {
        return Err(CliError::Data(format!(
            "format error: {sample_id}: missing HSF1 magic"
        )));
    }
    let u32_at = |i: usize| -> usize {
        u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize
    };
    let (m, nv, nt, d, eot) = (u32_at(0), u32_at(1), u32_at(2), u32_at(3), u32_at(4));
    let floats = m
        .checked_mul(nv)
        .and_then(|x| x.checked_add(nt))
        .and_then(|x| x.checked_mul(d))
        .ok_or_else(|| CliError::Data(format!("dimension error: {sample_id}: header overflows")))?;
    let expected = 24 + m * 8 + floats * 4;
    if bytes.len() != expected {
        return Err(CliError::Data(format!(
            "dimension error: {sample_id}: payload is {} bytes, header declares {expected}",
            bytes.len()
        )));
    }
    let f32_at = |offset: usize| -> f32 {
        f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
    };
    let mut offset = 24;
    let mut viewpoints = Vec::with_capacity(m);
    for _ in 0..m {
        viewpoints.push((f32_at(offset), f32_at(offset + 4)));
        offset += 8;
    }
    let mut views = Vec::with_capacity(m);
    for _ in 0..m {
        let mut data = Vec::with_capacity(nv * d);
        for _ in 0..nv * d {
            data.push(f32_at(offset));
            offset += 4;
        }
        views.push(Tensor::from_vec(&[nv, d], data).map_err(CliError::from)?);
    }
    let mut text = Vec::with_capacity(nt * d);
    for _ in 0..nt * d {
        text.push(f32_at(offset));
        offset += 4;
    }
    let bundle = FeatureBundle {
        sample_id: sample_id.to_string(),
        prompt_id: String::new(),
        method_id: String::new(),
        views,
        text_tokens: Tensor::from_vec(&[nt, d], text).map_err(CliError::from)?,
        eot_index: eot,
        viewpoints,
    };
    bundle
        .validate()
        .map_err(|e| CliError::Data(format!("{sample_id}: {e}")))?;
    Ok(bundle)
}

pub fn write_bundle(path: &Path, bundle: &FeatureBundle) -> Result<()> {
    std::fs::write(path, encode_bundle(bundle)?)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Load a container; the sample id defaults to the file stem.
pub fn read_bundle(path: &Path, sample_id: Option<&str>) -> Result<FeatureBundle> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let id = match sample_id {
        Some(id) => id.to_string(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    decode_bundle(&bytes, &id)
}
