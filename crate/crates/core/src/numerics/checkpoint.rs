//! Versioned binary parameter checkpoints.
//!
//! Layout: the 8-byte magic `MCGCKPT1`, a little-endian `u32` parameter
//! count, then per parameter a `u16` name length, the UTF-8 name, `u32` rows,
//! `u32` cols and `rows * cols` little-endian `f64` values in row-major order.

use std::fs;
use std::path::Path;

use super::layers::Parameter;
use super::matrix::Matrix;
use crate::error::{McgError, Result};

pub const MAGIC: &[u8; 8] = b"MCGCKPT1";

pub fn encode<'a>(params: impl IntoIterator<Item = &'a Parameter>) -> Result<Vec<u8>> {
    let params: Vec<&Parameter> = params.into_iter().collect();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        let name = p.name.as_bytes();
        let len = u16::try_from(name.len())
            .map_err(|_| McgError::arg(format!("parameter name too long: {}", p.name)))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(name);
        buf.extend_from_slice(&(p.value.rows() as u32).to_le_bytes());
        buf.extend_from_slice(&(p.value.cols() as u32).to_le_bytes());
        for v in p.value.data() {
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
            return Err(McgError::Checkpoint(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Matrix)>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(McgError::Checkpoint("bad magic".into()));
    }
    let count = r.u32()?;
    let mut out = Vec::with_capacity(count.min(4096) as usize);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| McgError::Checkpoint("parameter name is not UTF-8".into()))?
            .to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| n * 8 <= bytes.len())
            .ok_or_else(|| McgError::Checkpoint(format!("implausible shape {rows}x{cols} for {name}")))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.f64()?);
        }
        let m = Matrix::from_vec(rows, cols, data)
            .map_err(|e| McgError::Checkpoint(format!("{name}: {e}")))?;
        out.push((name, m));
    }
    if r.pos != bytes.len() {
        return Err(McgError::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(out)
}

pub fn save<'a>(path: &Path, params: impl IntoIterator<Item = &'a Parameter>) -> Result<()> {
    let bytes = encode(params)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<(String, Matrix)>> {
    decode(&fs::read(path)?)
}

/// Copies loaded values into `params`, matching by position, name and shape.
pub fn restore(params: &mut [&mut Parameter], loaded: &[(String, Matrix)]) -> Result<()> {
    if params.len() != loaded.len() {
        return Err(McgError::Checkpoint(format!(
            "expected {} parameters, checkpoint has {}",
            params.len(),
            loaded.len()
        )));
    }
    for (p, (name, value)) in params.iter_mut().zip(loaded) {
        if &p.name != name || p.value.shape() != value.shape() {
            return Err(McgError::Checkpoint(format!(
                "parameter {} {:?} does not match checkpoint entry {name} {:?}",
                p.name,
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value.clone();
    }
    Ok(())
}
