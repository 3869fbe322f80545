//! Binary persistence for models and feature tensors.
//!
//! Both formats share one layout: an 8-byte ASCII magic, a little-endian u32
//! header length, a UTF-8 JSON header, then little-endian IEEE-754 f32 blobs.
//! `VOXCNN01` stores a model's parameter tensors in declaration order;
//! `VOXTEN01` stores one named tensor (feature dumps, embedding matrices).

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::{Architecture, CnnModel, PARAM_NAMES};
use crate::nn::tensor::Tensor;

pub const MODEL_MAGIC: &[u8; 8] = b"VOXCNN01";
pub const TENSOR_MAGIC: &[u8; 8] = b"VOXTEN01";

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    arch: Architecture,
    params: Vec<ParamInfo>,
    blob_len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
    blob_len: u64,
}

pub(crate) fn write_container(
    path: &Path,
    magic: &[u8; 8],
    header_json: &[u8],
    blobs: &[&[f32]],
) -> Result<()> {
    let mut out = Vec::with_capacity(
        12 + header_json.len() + blobs.iter().map(|b| b.len() * 4).sum::<usize>(),
    );
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(header_json);
    for blob in blobs {
        for v in *blob {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_container(path: &Path, magic: &[u8; 8]) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut got_magic = [0u8; 8];
    file.read_exact(&mut got_magic)
        .map_err(|_| Error::Format(format!("{}: truncated before magic", path.display())))?;
    if &got_magic != magic {
        return Err(Error::Format(format!(
            "{}: magic {:?} is not {}",
            path.display(),
            String::from_utf8_lossy(&got_magic),
            String::from_utf8_lossy(magic)
        )));
    }
    let mut len_bytes = [0u8; 4];
    file.read_exact(&mut len_bytes)
        .map_err(|_| Error::Format(format!("{}: truncated header length", path.display())))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header = vec![0u8; header_len];
    file.read_exact(&mut header)
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
    let mut blob = Vec::new();
    file.read_to_end(&mut blob).map_err(|e| Error::io(path, e))?;
    Ok((header, blob))
}

pub(crate) fn decode_f32_blob(blob: &[u8], offset: usize, count: usize) -> Result<Vec<f32>> {
    let end = offset + count * 4;
    if end > blob.len() {
        return Err(Error::Format(format!(
            "blob too short: need {end} bytes, have {}",
            blob.len()
        )));
    }
    Ok(blob[offset..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Writes a model's architecture and parameters; the f32 round trip is
/// bit-exact.
pub fn save_model(model: &CnnModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let params = model.params();
    let header = ModelHeader {
        arch: model.arch.clone(),
        params: PARAM_NAMES
            .iter()
            .zip(&params)
            .map(|(name, t)| ParamInfo {
                name: (*name).to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        blob_len: params.iter().map(|t| t.len() as u64 * 4).sum(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Internal(e.to_string()))?;
    let blobs: Vec<&[f32]> = params.iter().map(|t| t.data()).collect();
    write_container(path, MODEL_MAGIC, &json, &blobs)
}

/// Loads a model saved by [`save_model`], validating architecture
/// consistency and blob length.
pub fn load_model(path: impl AsRef<Path>) -> Result<CnnModel<f32>> {
    let path = path.as_ref();
    let (header_bytes, blob) = read_container(path, MODEL_MAGIC)?;
    let header: ModelHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Format(format!("{}: bad header: {e}", path.display())))?;
    if header.blob_len as usize != blob.len() {
        return Err(Error::Format(format!(
            "{}: header promises {} blob bytes, file has {}",
            path.display(),
            header.blob_len,
            blob.len()
        )));
    }
    header
        .arch
        .validate()
        .map_err(|e| Error::Format(format!("{}: stored architecture invalid: {e}", path.display())))?;

    let mut template = CnnModel::<f32>::init(header.arch.clone(), 0)?;
    if header.params.len() != PARAM_NAMES.len() {
        return Err(Error::Format(format!(
            "{}: expected {} parameter tensors, header lists {}",
            path.display(),
            PARAM_NAMES.len(),
            header.params.len()
        )));
    }
    let mut offset = 0usize;
    for ((info, want_name), param) in header
        .params
        .iter()
        .zip(PARAM_NAMES)
        .zip(template.params_mut())
    {
        if info.name != want_name || info.shape != param.shape() {
            return Err(Error::Format(format!(
                "parameter {} has shape {:?}, expected {} {:?}",
                info.name,
                info.shape,
                want_name,
                param.shape()
            )));
        }
        let values = decode_f32_blob(&blob, offset, param.len())?;
        offset += param.len() * 4;
        param.data_mut().copy_from_slice(&values);
    }
    Ok(template)
}

/// Writes one named f32 tensor (feature dump, embedding matrix).
pub fn save_tensor(name: &str, tensor: &Tensor<f32>, path: impl AsRef<Path>) -> Result<()> {
    let header = TensorHeader {
        name: name.to_string(),
        shape: tensor.shape().to_vec(),
        blob_len: tensor.len() as u64 * 4,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Internal(e.to_string()))?;
    write_container(path.as_ref(), TENSOR_MAGIC, &json, &[tensor.data()])
}

/// Reads a tensor written by [`save_tensor`], returning (name, tensor).
pub fn load_tensor(path: impl AsRef<Path>) -> Result<(String, Tensor<f32>)> {
    let path = path.as_ref();
    let (header_bytes, blob) = read_container(path, TENSOR_MAGIC)?;
    let header: TensorHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Format(format!("{}: bad header: {e}", path.display())))?;
    if header.blob_len as usize != blob.len() {
        return Err(Error::Format(format!(
            "{}: header promises {} blob bytes, file has {}",
            path.display(),
            header.blob_len,
            blob.len()
        )));
    }
    let count: usize = header.shape.iter().product();
    let values = decode_f32_blob(&blob, 0, count)?;
    Ok((header.name, Tensor::from_vec(&header.shape, values)?))
}
