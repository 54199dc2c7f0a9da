//! `KWSC` checkpoint files: magic, `u32` version, `u32` length of a UTF-8
//! TOML model-config record, the record, then named tensors until EOF
//! (`u32` name length, name, `u32` rank, `u32` dims, `f32` values). All
//! integers and floats are little-endian.

use std::path::Path;

use super::config::ModelConfig;
use super::model::Model;
use crate::error::{KwsError, Result};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 4] = b"KWSC";
pub const VERSION: u32 = 1;
const WHAT: &str = "checkpoint";
const MAX_RANK: usize = 8;

pub fn to_bytes(model: &Model<f32>) -> Vec<u8> {
    let record = model.config().to_record();
    let mut out = Vec::with_capacity(12 + record.len() + 4 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(record.len() as u32).to_le_bytes());
    out.extend_from_slice(record.as_bytes());
    for (name, t) in model.named_params() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(KwsError::format(WHAT, format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Parses a checkpoint. When `expected` is given the stored config must match it.
pub fn from_bytes(bytes: &[u8], expected: Option<&ModelConfig>) -> Result<Model<f32>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(KwsError::format(WHAT, "bad magic, not a KWSC file"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(KwsError::format(WHAT, format!("unsupported version {version}")));
    }
    let len = r.u32("config length")? as usize;
    let record = std::str::from_utf8(r.take(len, "config record")?)
        .map_err(|_| KwsError::format(WHAT, "config record is not UTF-8"))?;
    let cfg = ModelConfig::from_record(record)?;
    if let Some(exp) = expected {
        if *exp != cfg {
            return Err(KwsError::Config(format!(
                "checkpoint holds a {} model, expected {}",
                cfg.label(),
                exp.label()
            )));
        }
    }
    let budget = cfg.count_params();
    let mut read = 0usize;
    let mut tensors = Vec::new();
    while !r.done() {
        let n = r.u32("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(n, "tensor name")?)
            .map_err(|_| KwsError::format(WHAT, "tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u32("tensor rank")? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(KwsError::format(WHAT, format!("tensor '{name}' has rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        let mut count = 1usize;
        for _ in 0..rank {
            let d = r.u32("tensor dims")? as usize;
            count = count.saturating_mul(d);
            dims.push(d);
        }
        read = read.saturating_add(count);
        if read > budget {
            return Err(KwsError::format(
                WHAT,
                format!("tensor '{name}' exceeds the model's parameter count"),
            ));
        }
        let raw = r.take(count * 4, "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, Tensor::from_vec(&dims, data)?));
    }
    let model = Model::from_named(&cfg, tensors)?;
    if !model.is_finite() {
        return Err(KwsError::NonFinite(format!("{WHAT} contains NaN or infinite weights")));
    }
    Ok(model)
}

pub fn save(model: &Model<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| KwsError::io(path, e))
}

pub fn load(path: &Path, expected: Option<&ModelConfig>) -> Result<Model<f32>> {
    let bytes = std::fs::read(path).map_err(|e| KwsError::io(path, e))?;
    from_bytes(&bytes, expected)
}
