//! Embedding cache: `UPNEMB1`, u32 count, u32 dim, then per entry a u32
//! length-prefixed UTF-8 speaker id followed by `dim` little-endian f32.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::SpeakerEmbedding;

const MAGIC: &[u8; 7] = b"UPNEMB1";

pub fn write_embedding_cache<T: Real>(
    path: impl AsRef<Path>,
    entries: &[(String, SpeakerEmbedding<T>)],
) -> Result<()> {
    let dim = entries.first().map_or(0, |e| e.1.dim());
    if entries.iter().any(|e| e.1.dim() != dim) {
        return Err(Error::contract("embeddings in one cache must share a dimension"));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    for (id, emb) in entries {
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        for &v in emb.values() {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_embedding_cache(path: impl AsRef<Path>) -> Result<Vec<(String, SpeakerEmbedding<f32>)>> {
    let path = path.as_ref();
    let data = std::fs::read(path)?;
    let bad = |why: String| Error::format(path, why);
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = data.get(pos..pos + n).ok_or_else(|| bad("truncated".into()))?;
        pos += n;
        Ok(s)
    };
    if take(7)? != MAGIC {
        return Err(bad("missing UPNEMB1 header".into()));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
    let count = u32_at(take(4)?);
    let dim = u32_at(take(4)?);
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = u32_at(take(4)?);
        let id = String::from_utf8(take(len)?.to_vec()).map_err(|_| bad("speaker id is not UTF-8".into()))?;
        let values: Vec<f32> = take(4 * dim)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        // stored as f32, so renormalise rather than insist on 1e-6
        let emb = SpeakerEmbedding::from_raw(values).map_err(|e| bad(format!("entry `{id}`: {e}")))?;
        out.push((id, emb));
    }
    if pos != data.len() {
        return Err(bad("trailing bytes".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        let entries = vec![
            ("spk-a".to_string(), SpeakerEmbedding::new(vec![0.6, 0.8, 0.0]).unwrap()),
            ("Ω".to_string(), SpeakerEmbedding::new(vec![0.0, 0.0, 1.0]).unwrap()),
        ];
        write_embedding_cache(&p, &entries).unwrap();
        let back = read_embedding_cache(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].0, "Ω");
        for ((_, a), (_, b)) in entries.iter().zip(&back) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((*x as f32 - y).abs() < 1e-7);
            }
        }
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..7], b"UPNEMB1");
        std::fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(read_embedding_cache(&p).is_err());
    }
}
