//! Flat binary parameter container.
//!
//! Layout: magic `AMSORT01`, then per named parameter: name length (u32 LE),
//! UTF-8 name, rank (u32 LE), dims (u32 LE each), values as f64 LE in
//! row-major order. Model architecture travels as a `meta.model` entry so a
//! checkpoint alone is enough to rebuild the predictor.

use crate::embedding::EmbeddingParams;
use crate::model::{EncoderConfig, ModelParams, ParamTensor};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"AMSORT01";
const META_NAME: &str = "meta.model";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic, not a checkpoint file")]
    BadMagic,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint missing parameter {0}")]
    Missing(String),
    #[error("parameter {name} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch { name: String, got: Vec<usize>, expected: Vec<usize> },
}

fn write_entry(w: &mut impl Write, p: &ParamTensor) -> std::io::Result<()> {
    w.write_all(&(p.name.len() as u32).to_le_bytes())?;
    w.write_all(p.name.as_bytes())?;
    w.write_all(&(p.shape.len() as u32).to_le_bytes())?;
    for d in &p.shape {
        w.write_all(&(*d as u32).to_le_bytes())?;
    }
    for v in &p.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or_none(r: &mut impl Read, buf: &mut [u8]) -> Result<bool, CheckpointError> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(CheckpointError::Corrupt("truncated entry".into()));
        }
        filled += n;
    }
    Ok(true)
}

fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    if !read_exact_or_none(r, &mut b)? {
        return Err(CheckpointError::Corrupt("unexpected end of file".into()));
    }
    Ok(u32::from_le_bytes(b))
}

/// Serialize every named parameter of the model.
pub fn save_model(path: &Path, params: &ModelParams) -> Result<(), CheckpointError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    let c = params.config;
    let meta = ParamTensor {
        name: META_NAME.to_string(),
        data: vec![
            c.d as f64,
            c.n_layers as f64,
            c.n_heads as f64,
            c.ffn_dim as f64,
            c.head_hidden as f64,
            c.t as f64,
            c.spatial_scale,
        ],
        shape: vec![7],
    };
    write_entry(&mut buf, &meta)?;
    let mut io_err = None;
    params.visit(|p| {
        if io_err.is_none() {
            if let Err(e) = write_entry(&mut buf, p) {
                io_err = Some(e);
            }
        }
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Raw named arrays from a checkpoint file.
pub fn load_entries(path: &Path) -> Result<BTreeMap<String, ParamTensor>, CheckpointError> {
    let bytes = std::fs::read(path)?;
    let mut r = bytes.as_slice();
    let mut magic = [0u8; 8];
    if !read_exact_or_none(&mut r, &mut magic)? || &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut out = BTreeMap::new();
    loop {
        let mut len_bytes = [0u8; 4];
        if !read_exact_or_none(&mut r, &mut len_bytes)? {
            break;
        }
        let name_len = u32::from_le_bytes(len_bytes) as usize;
        if name_len > 4096 {
            return Err(CheckpointError::Corrupt(format!("name length {name_len}")));
        }
        let mut name_bytes = vec![0u8; name_len];
        if !read_exact_or_none(&mut r, &mut name_bytes)? {
            return Err(CheckpointError::Corrupt("truncated name".into()));
        }
        let name = String::from_utf8(name_bytes)
            .map_err(|_| CheckpointError::Corrupt("name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        if rank > 8 {
            return Err(CheckpointError::Corrupt(format!("rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut vb = [0u8; 8];
        for _ in 0..n {
            if !read_exact_or_none(&mut r, &mut vb)? {
                return Err(CheckpointError::Corrupt("truncated values".into()));
            }
            data.push(f64::from_le_bytes(vb));
        }
        out.insert(name.clone(), ParamTensor { name, data, shape });
    }
    Ok(out)
}

/// Rebuild a full model from a checkpoint, using the embedded architecture
/// entry for shapes.
pub fn load_model(path: &Path) -> Result<ModelParams, CheckpointError> {
    let mut entries = load_entries(path)?;
    let meta = entries
        .remove(META_NAME)
        .ok_or_else(|| CheckpointError::Missing(META_NAME.into()))?;
    if meta.data.len() != 7 {
        return Err(CheckpointError::Corrupt("meta.model must hold 7 values".into()));
    }
    let config = EncoderConfig {
        d: meta.data[0] as usize,
        n_layers: meta.data[1] as usize,
        n_heads: meta.data[2] as usize,
        ffn_dim: meta.data[3] as usize,
        head_hidden: meta.data[4] as usize,
        t: meta.data[5] as usize,
        spatial_scale: meta.data[6],
    };
    let mut skeleton = ModelParams::init(config, 0)
        .map_err(|e| CheckpointError::Corrupt(format!("bad architecture: {e}")))?;

    let mut take = |name: &str, expected: &[usize]| -> Result<Vec<f64>, CheckpointError> {
        let p = entries.remove(name).ok_or_else(|| CheckpointError::Missing(name.into()))?;
        if p.shape != expected {
            return Err(CheckpointError::ShapeMismatch {
                name: name.into(),
                got: p.shape,
                expected: expected.to_vec(),
            });
        }
        Ok(p.data)
    };

    skeleton.embed = EmbeddingParams {
        prediction_token: take("embed.pred_token", &[config.d])?,
        mask_token: take("embed.mask_token", &[config.d])?,
    };
    for l in 0..config.n_layers {
        let layer = &mut skeleton.layers[l];
        for t in [
            &mut layer.wq,
            &mut layer.bq,
            &mut layer.wk,
            &mut layer.bk,
            &mut layer.wv,
            &mut layer.bv,
            &mut layer.wo,
            &mut layer.bo,
            &mut layer.ffn_w1,
            &mut layer.ffn_b1,
            &mut layer.ffn_w2,
            &mut layer.ffn_b2,
            &mut layer.norm1_gain,
            &mut layer.norm1_bias,
            &mut layer.norm2_gain,
            &mut layer.norm2_bias,
        ] {
            t.data = take(&t.name.clone(), &t.shape.clone())?;
        }
    }
    for t in [
        &mut skeleton.head.w1,
        &mut skeleton.head.b1,
        &mut skeleton.head.w2,
        &mut skeleton.head.b2,
        &mut skeleton.head.w3,
        &mut skeleton.head.b3,
    ] {
        t.data = take(&t.name.clone(), &t.shape.clone())?;
    }
    Ok(skeleton)
}
