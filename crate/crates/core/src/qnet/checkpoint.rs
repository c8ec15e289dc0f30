//! Parameter checkpoint container.
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754 `f64`.
//!
//! ```text
//! magic        8 bytes   "SDQNCKPT"
//! version      u32       1
//! header_len   u32
//! header       UTF-8 JSON {"architecture": {...}, "pbln_epsilon": <f64>}
//! n_tensors    u32
//! n_tensors ×  name_len u32 | name UTF-8 | rank u32 | dims u32×rank | data f64×Πdims
//! ```
//!
//! Tensors appear in [`NetworkParams::named_tensors`] order and are matched by
//! name on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{init_params, Architecture, NetworkParams};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::pbln::DEFAULT_EPSILON;

pub const MAGIC: &[u8; 8] = b"SDQNCKPT";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    pbln_epsilon: f64,
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("value {v} exceeds u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode(arch: &Architecture, params: &NetworkParams) -> Result<Vec<u8>> {
    params.check(arch)?;
    let epsilon = params
        .conv_pbln
        .iter()
        .flatten()
        .chain(params.fc_pbln.iter())
        .map(|p| p.epsilon)
        .next()
        .unwrap_or(DEFAULT_EPSILON);
    let header = serde_json::to_vec(&Header {
        architecture: arch.clone(),
        pbln_epsilon: epsilon,
    })?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION as usize)?;
    put_u32(&mut buf, header.len())?;
    buf.extend_from_slice(&header);
    let tensors = params.named_tensors();
    put_u32(&mut buf, tensors.len())?;
    for (name, t) in tensors {
        put_u32(&mut buf, name.len())?;
        buf.extend_from_slice(name.as_bytes());
        put_u32(&mut buf, t.rank())?;
        for &d in t.shape() {
            put_u32(&mut buf, d)?;
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(f64::from_le_bytes(a))
    }
}

pub fn decode(bytes: &[u8]) -> Result<(Architecture, NetworkParams)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = r.u32()?;
    let header: Header = serde_json::from_slice(r.take(hlen)?)?;
    let arch = header.architecture;
    let mut params = init_params(&arch, 0)?;
    for p in params.conv_pbln.iter_mut().flatten().chain(params.fc_pbln.iter_mut()) {
        p.epsilon = header.pbln_epsilon;
    }
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let count = r.u32()?;
    if count != names.len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors stored, architecture needs {}",
            names.len()
        )));
    }
    let mut slots = params.tensors_mut();
    for _ in 0..count {
        let nlen = r.u32()?;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()?;
        let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let idx = names
            .iter()
            .position(|x| *x == name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor `{name}`")))?;
        let t = Tensor::new(&dims, data).map_err(|e| e.context(format!("tensor `{name}`")))?;
        if t.shape() != slots[idx].shape() {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has shape {:?}, expected {:?}",
                t.shape(),
                slots[idx].shape()
            )));
        }
        *slots[idx] = t;
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((arch, params))
}

pub fn save_checkpoint(path: &Path, arch: &Architecture, params: &NetworkParams) -> Result<()> {
    std::fs::write(path, encode(arch, params)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Architecture, NetworkParams)> {
    decode(&std::fs::read(path)?)
}
