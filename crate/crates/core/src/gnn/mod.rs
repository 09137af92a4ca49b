//! Dense small-scale GCN with hand-derived gradients: single-kernel and
//! multiscale two-tower variants, Adam with decoupled weight decay, training
//! loop with early stopping, and finite-difference gradient checking.

mod model;
mod train;

pub use model::{
    accuracy, softmax_cross_entropy, Combinator, ForwardPass, Grads, Model, ModelArch, Params,
    TowerConfig,
};
pub use train::{gradient_check, train, AdamConfig, EpochRecord, TrainConfig, TrainRun};

use std::fs;
use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::{Error, Result};

/// Writes parameters as a flat named-tensor binary: a JSON shape manifest
/// (name, rows, cols per tensor) followed by row-major f64 data in manifest
/// order, little-endian.
pub fn save_checkpoint(params: &Params, path: &Path) -> Result<()> {
    let named = params.named_tensors();
    let manifest: Vec<serde_json::Value> = named
        .iter()
        .map(|(name, t)| {
            serde_json::json!({"name": name, "rows": t.nrows(), "cols": t.ncols()})
        })
        .collect();
    let manifest = serde_json::to_vec(&manifest).expect("manifest serialize");
    let mut buf: Vec<u8> = Vec::new();
    buf.write_u64::<LittleEndian>(manifest.len() as u64).unwrap();
    buf.extend_from_slice(&manifest);
    for (_, t) in &named {
        for &v in t.iter() {
            buf.write_f64::<LittleEndian>(v).unwrap();
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads back a checkpoint written by [`save_checkpoint`] as named tensors.
pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Array2<f64>)>> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |message: &str| Error::CorruptArtifact {
        what: "checkpoint",
        message: message.to_string(),
    };
    let mut cursor = &data[..];
    let mlen = cursor
        .read_u64::<LittleEndian>()
        .map_err(|_| corrupt("truncated manifest length"))? as usize;
    if cursor.len() < mlen {
        return Err(corrupt("truncated manifest"));
    }
    let manifest: Vec<serde_json::Value> =
        serde_json::from_slice(&cursor[..mlen]).map_err(|e| corrupt(&e.to_string()))?;
    cursor = &cursor[mlen..];
    let mut out = Vec::with_capacity(manifest.len());
    for entry in manifest {
        let name = entry["name"]
            .as_str()
            .ok_or_else(|| corrupt("tensor name missing"))?
            .to_string();
        let rows = entry["rows"].as_u64().ok_or_else(|| corrupt("rows missing"))? as usize;
        let cols = entry["cols"].as_u64().ok_or_else(|| corrupt("cols missing"))? as usize;
        let mut tensor = Array2::zeros((rows, cols));
        for v in tensor.iter_mut() {
            *v = cursor
                .read_f64::<LittleEndian>()
                .map_err(|_| corrupt("truncated tensor data"))?;
        }
        out.push((name, tensor));
    }
    let mut rest = [0u8; 1];
    if cursor.read(&mut rest).unwrap_or(0) != 0 {
        return Err(corrupt("trailing bytes"));
    }
    Ok(out)
}
