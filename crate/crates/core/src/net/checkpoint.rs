//! Binary checkpoint: `UPNCKPT1`, u32 version, u32 tensor count, then per
//! tensor a u32 name length, the UTF-8 name, u32 rank, u32 dims and the
//! values as f32. Everything little-endian.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{NetConfig, NetParams, Tensor};
use crate::dsp::{FEATURE_DIM, N_BANDS};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"UPNCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_params<T: Real>(params: &NetParams<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(16 + 4 * params.n_params());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let named = params.named();
    buf.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, t) in named {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for &d in &t.dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            buf.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
    }
    // write to a sibling file first so a crash never leaves a torn checkpoint
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(&buf)?;
    f.sync_all()?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(self.path, format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn tensor_error(name: &str, reason: impl Into<String>) -> Error {
    Error::Tensor {
        tensor: name.to_string(),
        reason: reason.into(),
    }
}

/// Loads a checkpoint, inferring the network config from the tensor shapes.
pub fn load_params(path: impl AsRef<Path>) -> Result<NetParams<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let mut r = Reader {
        buf: &bytes,
        pos: 0,
        path,
    };
    if r.take(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "tensor name")?)
            .map_err(|_| Error::format(path, format!("tensor {i} has a non-UTF-8 name")))?
            .to_string();
        let rank = r.u32(&name)? as usize;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(r.u32(&name)? as usize);
        }
        let bytes_len = dims
            .iter()
            .try_fold(4usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| tensor_error(&name, "dimensions overflow"))?;
        let raw = r.take(bytes_len, &name)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, Tensor { dims, data }));
    }
    if r.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after last tensor"));
    }
    let find = |name: &str| -> Result<&Tensor<f32>> {
        tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| tensor_error(name, "missing from checkpoint"))
    };
    let conv1 = find("conv1.weight")?;
    let g0 = find("gru0.w_ih")?;
    if conv1.dims.len() != 3 || g0.dims.len() != 2 {
        return Err(tensor_error("conv1.weight", "unexpected rank"));
    }
    let conv_channels = conv1.dims[0];
    let gru_hidden = g0.dims[0] / 3;
    let gru_layers = (0..)
        .take_while(|l| tensors.iter().any(|(n, _)| *n == format!("gru{l}.w_ih")))
        .count();
    let config = NetConfig {
        feat_dim: FEATURE_DIM,
        cond_dim: g0.dims[1].checked_sub(conv_channels).ok_or_else(|| {
            tensor_error("gru0.w_ih", "input width smaller than conv channels")
        })?,
        conv_channels,
        gru_layers,
        gru_hidden,
        n_bands: N_BANDS,
    };
    config.validate()?;
    let mut params = NetParams::<f32>::zeros(config)?;
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    if names.len() != tensors.len() {
        return Err(Error::format(
            path,
            format!("expected {} tensors, found {}", names.len(), tensors.len()),
        ));
    }
    for (name, slot) in names.iter().zip(params.tensors_mut()) {
        let t = find(name)?;
        if t.dims != slot.dims {
            return Err(tensor_error(
                name,
                format!("shape {:?} does not match expected {:?}", t.dims, slot.dims),
            ));
        }
        slot.data.copy_from_slice(&t.data);
    }
    Ok(params)
}
