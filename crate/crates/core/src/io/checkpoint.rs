//! Versioned binary weight checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  b"LCCKPT01"
//! meta_len u32      length of the JSON metadata blob
//! meta     bytes    CheckpointMeta as JSON (model config, training range,
//!                   densify kernel)
//! n_params u32
//! repeated per parameter, in the model's pinned parameter order:
//!   name_len u16, name utf-8 bytes,
//!   ndim u8, dims u32 * ndim,
//!   values f64 * prod(dims)
//! ```
//!
//! Checkpoints carry weights only; optimizer state is not persisted.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DecalibRange;
use crate::model::{build_model, Model, ModelConfig};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"LCCKPT01";

/// Everything needed to rebuild and use the model: the architecture and the
/// preprocessing/encoding settings it was trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub range: DecalibRange,
    pub densify_kernel: usize,
}

pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    range: &DecalibRange,
    densify_kernel: usize,
) -> Result<()> {
    let meta = CheckpointMeta {
        model: model.config().clone(),
        range: *range,
        densify_kernel,
    };
    let meta_json =
        serde_json::to_vec(&meta).map_err(|e| Error::BadCheckpoint(format!("meta: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let mut u32buf = [0u8; 4];
    LittleEndian::write_u32(&mut u32buf, meta_json.len() as u32);
    out.extend_from_slice(&u32buf);
    out.extend_from_slice(&meta_json);

    let mut n_params = 0u32;
    model.visit_params(|_| n_params += 1);
    LittleEndian::write_u32(&mut u32buf, n_params);
    out.extend_from_slice(&u32buf);

    model.visit_params(|p| {
        let name = p.name.as_bytes();
        let mut u16buf = [0u8; 2];
        LittleEndian::write_u16(&mut u16buf, name.len() as u16);
        out.extend_from_slice(&u16buf);
        out.extend_from_slice(name);
        out.push(p.value.shape().len() as u8);
        for &d in p.value.shape() {
            LittleEndian::write_u32(&mut u32buf, d as u32);
            out.extend_from_slice(&u32buf);
        }
        let mut f64buf = [0u8; 8];
        for &v in p.value.data() {
            LittleEndian::write_f64(&mut f64buf, v);
            out.extend_from_slice(&f64buf);
        }
    });
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::BadCheckpoint(format!(
                "unexpected end of file at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4)?))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(LittleEndian::read_u16(self.take(2)?))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(Error::BadCheckpoint(format!(
            "{} is not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let meta_len = r.u32()? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| Error::BadCheckpoint(format!("meta: {e}")))?;
    let n_params = r.u32()? as usize;

    let mut blobs: Vec<(String, Tensor)> = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|e| Error::BadCheckpoint(format!("parameter name: {e}")))?;
        let ndim = r.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let count: usize = shape.iter().product();
        let raw = r.take(count * 8)?;
        let mut data = Vec::with_capacity(count);
        for chunk in raw.chunks_exact(8) {
            data.push(LittleEndian::read_f64(chunk));
        }
        blobs.push((name, Tensor::from_vec(&shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::BadCheckpoint(format!(
            "{} trailing bytes after the last parameter",
            bytes.len() - r.pos
        )));
    }

    // Structure comes from the config; blobs must match it one for one.
    let mut model = build_model(&meta.model, 0)?;
    let mut idx = 0;
    let mut fill_err: Option<Error> = None;
    model.visit_params_mut(|p| {
        if fill_err.is_some() {
            return;
        }
        match blobs.get(idx) {
            Some((name, tensor)) if *name == p.name && tensor.shape() == p.value.shape() => {
                p.value = tensor.clone();
            }
            Some((name, tensor)) => {
                fill_err = Some(Error::BadCheckpoint(format!(
                    "parameter {idx}: expected {} {:?}, found {} {:?}",
                    p.name,
                    p.value.shape(),
                    name,
                    tensor.shape()
                )));
            }
            None => {
                fill_err = Some(Error::BadCheckpoint(format!(
                    "missing parameter {} (index {idx})",
                    p.name
                )));
            }
        }
        idx += 1;
    });
    if let Some(e) = fill_err {
        return Err(e);
    }
    if idx != blobs.len() {
        return Err(Error::BadCheckpoint(format!(
            "checkpoint has {} extra parameters",
            blobs.len() - idx
        )));
    }
    Ok((model, meta))
}
