//! Binary checkpoint format.
//!
//! ```text
//! "BSDL" | u32 version | u32 header_len | header (key=value lines)
//! per parameter, in name order:
//!   u32 name_len | name | u32 rank | u32 dims[rank] | f32 data[prod(dims)]
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{ArchitectureConfig, SsdlModel};
use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Tensor};

const MAGIC: &[u8; 4] = b"BSDL";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_checkpoint(model: &SsdlModel<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let header = model.config().to_header();
    put_u32(&mut out, header.len());
    out.extend_from_slice(header.as_bytes());
    for p in model.params().iter() {
        put_u32(&mut out, p.name().len());
        out.extend_from_slice(p.name().as_bytes());
        let shape = p.value().shape();
        put_u32(&mut out, shape.len());
        for &d in shape {
            put_u32(&mut out, d);
        }
        for v in p.value().data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::CheckpointTruncated(format!(
                "{what} needs {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

/// Parses checkpoint bytes. The stored parameters must match the
/// architecture described by the stored header.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<SsdlModel<f32>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::CheckpointMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32("version")? as u32;
    if version != VERSION {
        return Err(Error::CheckpointVersion(version));
    }
    let header_len = r.u32("header length")?;
    let header = std::str::from_utf8(r.take(header_len, "header")?)
        .map_err(|_| Error::ArchitectureMismatch("header is not UTF-8".into()))?;
    let config = ArchitectureConfig::from_header(header)?;
    let expected = super::parameter_shapes(&config);

    let mut params = ParamStore::new();
    for _ in 0..expected.len() {
        let name_len = r.u32("name length")?;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::ArchitectureMismatch("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32("rank")?;
        if rank > 8 {
            return Err(Error::ArchitectureMismatch(format!("{name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")?);
        }
        if let Some((_, want)) = expected.iter().find(|(n, _)| *n == name) {
            if *want != shape {
                return Err(Error::ArchitectureMismatch(format!(
                    "{name} has shape {shape:?}, header implies {want:?}"
                )));
            }
        } else {
            return Err(Error::ArchitectureMismatch(format!("unexpected parameter {name}")));
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * 4, &name)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        params
            .insert(name.clone(), Tensor::new(shape, data)?)
            .map_err(|_| Error::ArchitectureMismatch(format!("duplicate parameter {name}")))?;
    }
    if r.pos != bytes.len() {
        return Err(Error::ArchitectureMismatch(format!(
            "{} trailing bytes after the last parameter",
            bytes.len() - r.pos
        )));
    }
    SsdlModel::from_params(config, params)
}

/// Writes a checkpoint, creating parent directories.
pub fn save_checkpoint(model: &SsdlModel<f32>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, encode_checkpoint(model))
        .map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<SsdlModel<f32>> {
    let bytes = fs::read(path)
        .map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
    decode_checkpoint(&bytes)
}

/// Loads a checkpoint and requires its architecture to equal `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ArchitectureConfig) -> Result<SsdlModel<f32>> {
    let model = load_checkpoint(path)?;
    if model.config() != expected {
        return Err(Error::ArchitectureMismatch(format!(
            "checkpoint has input_side {} and channels {:?}; expected input_side {} and channels {:?}",
            model.config().input_side,
            model.config().conv_channels,
            expected.input_side,
            expected.conv_channels
        )));
    }
    Ok(model)
}
