//! Binary checkpoints: magic, version, a JSON header with the model config
//! and tensor shapes, then every tensor as little-endian f64 in header order.

use std::io::{Read, Write};
use std::path::Path;

use motif_core::remi::{VOCAB_SIZE, VOCAB_VERSION};
use serde::{Deserialize, Serialize};

use crate::branch::BranchModel;
use crate::model::{DecoderMode, ModelConfig, Transformer};
use crate::params::ParamStore;
use crate::tensor::Mat;
use crate::MgmError;

const MAGIC: &[u8; 8] = b"MGMCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelHeader {
    config: ModelConfig,
    mode: DecoderMode,
    tensors: Vec<TensorInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    vocab_size: usize,
    vocab_version: u32,
    models: Vec<ModelHeader>,
}

fn bad(msg: impl Into<String>) -> MgmError {
    MgmError::Checkpoint(msg.into())
}

/// Writes one or more models to a single stream.
pub fn write_models(w: &mut impl Write, models: &[&Transformer]) -> Result<(), MgmError> {
    let header = Header {
        vocab_size: VOCAB_SIZE,
        vocab_version: VOCAB_VERSION,
        models: models
            .iter()
            .map(|m| ModelHeader {
                config: m.config.clone(),
                mode: m.mode,
                tensors: m
                    .params
                    .iter()
                    .map(|(name, t)| TensorInfo { name: name.to_string(), rows: t.rows, cols: t.cols })
                    .collect(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for m in models {
        for (_, t) in m.params.iter() {
            let mut buf = Vec::with_capacity(t.data.len() * 8);
            for x in &t.data {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
    }
    Ok(())
}

pub fn read_models(r: &mut impl Read) -> Result<Vec<Transformer>, MgmError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8) as usize;
    if len > 1 << 26 {
        return Err(bad("header too large"));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
    if header.vocab_size != VOCAB_SIZE || header.vocab_version != VOCAB_VERSION {
        return Err(bad(format!(
            "vocabulary {} v{} does not match {} v{}",
            header.vocab_size, header.vocab_version, VOCAB_SIZE, VOCAB_VERSION
        )));
    }
    let mut out = Vec::with_capacity(header.models.len());
    for mh in header.models {
        let mut store = ParamStore::new();
        for t in &mh.tensors {
            let n = t.rows.checked_mul(t.cols).ok_or_else(|| bad("tensor too large"))?;
            let mut raw = vec![0u8; n * 8];
            r.read_exact(&mut raw)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            store.insert(&t.name, Mat::from_vec(t.rows, t.cols, data));
        }
        out.push(Transformer::with_params(mh.config, mh.mode, store)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after the last tensor"));
    }
    Ok(out)
}

pub fn save_model(path: &Path, model: &Transformer) -> Result<(), MgmError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_models(&mut f, &[model])?;
    f.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Transformer, MgmError> {
    let mut models = read_models(&mut std::io::BufReader::new(std::fs::File::open(path)?))?;
    if models.len() != 1 {
        return Err(bad(format!("expected one model, found {}", models.len())));
    }
    Ok(models.pop().expect("one model"))
}

pub fn save_branches(path: &Path, branches: &BranchModel) -> Result<(), MgmError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_models(&mut f, &branches.branches.iter().collect::<Vec<_>>())?;
    f.flush()?;
    Ok(())
}

pub fn load_branches(path: &Path) -> Result<BranchModel, MgmError> {
    let branches = read_models(&mut std::io::BufReader::new(std::fs::File::open(path)?))?;
    if branches.len() != 5 || branches.iter().any(|b| b.mode != DecoderMode::Standard) {
        return Err(bad("expected five standard-decoder branches"));
    }
    Ok(BranchModel { branches })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_in_memory() {
        let cfg = ModelConfig { d_model: 8, d_ff: 16, heads: 2, max_len: 32, seed: 7, ..ModelConfig::desk() };
        let a = Transformer::new(cfg.clone(), DecoderMode::Gated).unwrap();
        let b = Transformer::new(ModelConfig { seed: 8, ..cfg }, DecoderMode::Standard).unwrap();
        let mut buf = Vec::new();
        write_models(&mut buf, &[&a, &b]).unwrap();
        let back = read_models(&mut buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_models(&mut &b"nonsense bytes here"[..]).is_err());
        let cfg = ModelConfig { d_model: 8, d_ff: 16, heads: 2, max_len: 32, ..ModelConfig::desk() };
        let a = Transformer::new(cfg, DecoderMode::Gated).unwrap();
        let mut buf = Vec::new();
        write_models(&mut buf, &[&a]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_models(&mut buf.as_slice()).is_err());
        buf.extend_from_slice(&[0; 4]);
        assert!(read_models(&mut buf.as_slice()).is_err());
    }
}
