//! Versioned binary checkpoint:
//!
//! ```text
//! magic "ENDOCKPT" | u32 version | u64 meta_len | meta JSON
//! u32 n_tensors | per tensor: u32 name_len, name, u32 ndim, u64 dims.., f64 values..
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ModelConfig, Seq2SeqModel};
use crate::data::Vocab;

const MAGIC: &[u8; 8] = b"ENDOCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint format (version {found:?}, expected {CHECKPOINT_VERSION})")]
    Version { found: Option<u32> },
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("tensor {name}: checkpoint has shape {found:?}, config expects {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint is missing tensor {0}")]
    MissingTensor(String),
    #[error("checkpoint metadata: {0}")]
    Meta(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: ModelConfig,
    vocab: Vec<String>,
}

pub fn save_checkpoint(model: &Seq2SeqModel, vocab: &Vocab, path: &Path) -> Result<(), CheckpointError> {
    let meta = serde_json::to_vec(&Meta {
        config: model.config.clone(),
        vocab: vocab.tokens().to_vec(),
    })
    .map_err(|e| CheckpointError::Meta(e.to_string()))?;
    let params = model.parameters();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta);
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in &params {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data().iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(CheckpointError::Truncated(what))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Rebuilds the model described by the stored config and overwrites every
/// parameter with the stored values.
pub fn load_checkpoint(path: &Path) -> Result<(Seq2SeqModel, Vocab), CheckpointError> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if buf.len() >= MAGIC.len() && &buf[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::Version { found: None });
    }
    r.take(MAGIC.len(), "magic")?;
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version { found: Some(version) });
    }
    let meta_len = r.u64("metadata length")? as usize;
    let meta: Meta =
        serde_json::from_slice(r.take(meta_len, "metadata")?).map_err(|e| CheckpointError::Meta(e.to_string()))?;
    let vocab = Vocab::from_lines(meta.vocab).map_err(|e| CheckpointError::Meta(e.to_string()))?;
    if vocab.len() != meta.config.vocab_size {
        return Err(CheckpointError::Meta(format!(
            "vocabulary has {} tokens but config says {}",
            vocab.len(),
            meta.config.vocab_size
        )));
    }
    let model = Seq2SeqModel::new(meta.config, 0).map_err(|e| CheckpointError::Meta(e.to_string()))?;
    let params = model.parameters();

    let n = r.u32("tensor count")? as usize;
    let mut loaded = vec![false; params.len()];
    for _ in 0..n {
        let name_len = r.u32("tensor name")? as usize;
        let name = String::from_utf8_lossy(r.take(name_len, "tensor name")?).into_owned();
        let ndim = r.u32("tensor rank")? as usize;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(r.u64("tensor shape")? as usize);
        }
        let count: usize = shape.iter().product();
        let bytes = r.take(count.checked_mul(8).ok_or(CheckpointError::Truncated("tensor data"))?, "tensor data")?;
        let Some(idx) = params.iter().position(|(n, _)| *n == name) else {
            return Err(CheckpointError::Meta(format!("unexpected tensor {name}")));
        };
        let t = &params[idx].1;
        if t.shape() != shape.as_slice() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: t.shape().to_vec(),
                found: shape,
            });
        }
        let mut data = t.data_mut();
        for (dst, chunk) in data.iter_mut().zip(bytes.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        loaded[idx] = true;
    }
    if let Some(i) = loaded.iter().position(|&l| !l) {
        return Err(CheckpointError::MissingTensor(params[i].0.clone()));
    }
    Ok((model, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Seq2SeqModel, Vocab) {
        let vocab = Vocab::build(["a b c d e f g h i j k l m n o p"]);
        let cfg = ModelConfig {
            d_model: 16,
            n_enc_layers: 2,
            n_dec_layers: 2,
            n_seq_heads: 2,
            n_hormone_heads: 2,
            ff_width: 32,
            vocab_size: vocab.len(),
            max_len: 8,
            ..ModelConfig::default()
        };
        (Seq2SeqModel::new(cfg, 3).unwrap(), vocab)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let (m, v) = toy();
        save_checkpoint(&m, &v, &path).unwrap();
        let (back, vb) = load_checkpoint(&path).unwrap();
        assert_eq!(vb, v);
        assert_eq!(back.config, m.config);
        for ((na, a), (nb, b)) in m.parameters().iter().zip(back.parameters()) {
            assert_eq!(*na, nb);
            assert_eq!(a.to_vec(), b.to_vec());
            assert_eq!(a.requires_grad(), b.requires_grad());
        }
        let ids = [5, 6, 1, 0];
        let a = m.encode(&ids, &[1, 1, 1, 0], 1).unwrap().to_vec();
        let b = back.encode(&ids, &[1, 1, 1, 0], 1).unwrap().to_vec();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_magic_is_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let (m, v) = toy();
        save_checkpoint(&m, &v, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(CheckpointError::Version { found: None })));
        bytes[0] = b'E';
        bytes[8] = 9;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(CheckpointError::Version { found: Some(9) })));
    }

    #[test]
    fn truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let (m, v) = toy();
        save_checkpoint(&m, &v, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(CheckpointError::Truncated(_))));
    }

    #[test]
    fn shape_mismatch_with_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let (m, v) = toy();
        save_checkpoint(&m, &v, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        // rewrite the stored ff_width so the rebuilt model expects other shapes
        let key = b"\"ff_width\":32";
        let at = bytes.windows(key.len()).position(|w| w == key).unwrap();
        bytes[at + 11..at + 13].copy_from_slice(b"48");
        fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path).map(|_| ()).unwrap_err();
        assert!(matches!(err, CheckpointError::ShapeMismatch { .. }), "{err}");
    }
}
