//! Model container: versioned header, JSON metadata (spec, vocab,
//! pooling default), little-endian f32 parameter blob, and a SHA-256
//! parameter checksum verified on load.

use super::{EncoderSpec, PoolingStrategy, SentenceModel, TinyTransformer, Vocab};
use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"XLSM";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    spec: EncoderSpec,
    vocab: Vocab,
    pooling: PoolingStrategy,
}

fn blob_checksum(blob: &[f32]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for v in blob {
        hasher.update(v.to_le_bytes());
    }
    hasher.finalize().into()
}

pub fn save_model(model: &SentenceModel, path: &Path) -> Result<()> {
    let mut backend = model.backend.clone();
    let blob = backend.parameter_blob();
    let header = Header {
        spec: backend.spec().clone(),
        vocab: model.vocab.clone(),
        pooling: model.pooling,
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| CoreError::ModelFormat(format!("header encode: {e}")))?;

    let file = File::create(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| CoreError::io(path.display().to_string(), e);
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(header_json.len() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&header_json).map_err(io_err)?;
    w.write_all(&(blob.len() as u64).to_le_bytes()).map_err(io_err)?;
    for v in &blob {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    w.write_all(&blob_checksum(&blob)).map_err(io_err)?;
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SentenceModel> {
    let file = File::open(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let io_err = |e: std::io::Error| CoreError::io(path.display().to_string(), e);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(CoreError::ModelFormat(format!(
            "bad magic bytes {magic:?}, not a model file"
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io_err)?;
    let version = u32::from_le_bytes(u32buf);
    if version != FORMAT_VERSION {
        return Err(CoreError::ModelFormat(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(io_err)?;
    let header_len = u64::from_le_bytes(u64buf) as usize;
    let mut header_json = vec![0u8; header_len];
    r.read_exact(&mut header_json).map_err(io_err)?;
    let header: Header = serde_json::from_slice(&header_json)
        .map_err(|e| CoreError::ModelFormat(format!("header decode: {e}")))?;

    r.read_exact(&mut u64buf).map_err(io_err)?;
    let blob_len = u64::from_le_bytes(u64buf) as usize;
    let mut blob = Vec::with_capacity(blob_len);
    let mut f32buf = [0u8; 4];
    for _ in 0..blob_len {
        r.read_exact(&mut f32buf).map_err(io_err)?;
        blob.push(f32::from_le_bytes(f32buf));
    }
    let mut stored = [0u8; 32];
    r.read_exact(&mut stored).map_err(io_err)?;
    if stored != blob_checksum(&blob) {
        return Err(CoreError::ModelFormat(
            "parameter checksum mismatch (corrupt file)".to_string(),
        ));
    }

    let mut backend = TinyTransformer::new(header.spec, 0);
    backend
        .load_parameter_blob(&blob)
        .map_err(CoreError::ModelFormat)?;
    Ok(SentenceModel {
        backend,
        vocab: header.vocab,
        pooling: header.pooling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::PoolingStrategy;

    fn probe_model() -> SentenceModel {
        let vocab = Vocab::build(["x", "y", "z"]);
        SentenceModel::new(
            EncoderSpec {
                dim: 8,
                layers: 1,
                heads: 2,
                ffn_dim: 16,
                max_len: 6,
                ..Default::default()
            },
            vocab,
            PoolingStrategy::Mean,
            11,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_restores_embeddings_exactly() {
        let mut model = probe_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let mut loaded = load_model(&path).unwrap();
        let texts = ["x y", "z z y"];
        let a = model.encode(&texts, PoolingStrategy::Mean, false).unwrap();
        let b = loaded.encode(&texts, PoolingStrategy::Mean, false).unwrap();
        assert_eq!(a.vectors, b.vectors);
        assert_eq!(loaded.pooling, PoolingStrategy::Mean);
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.bin");
        std::fs::write(&path, b"NOPE plus some trailing bytes").unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(err, CoreError::ModelFormat(_)), "{err}");
    }

    #[test]
    fn corrupt_blob_fails_checksum() {
        let model = probe_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() - 40; // inside the parameter blob
        bytes[mid] ^= 0xFF;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }
}
