use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Family;
use crate::error::{Result, SpcaError};
use crate::linalg::SymMatrix;

pub const INSTANCE_MAGIC: &[u8; 4] = b"SPCX";

/// An instance as stored on disk: family, parameters and population matrix.
///
/// Layout (little-endian): magic, `u32` tag length + UTF-8 tag, `u32` pair
/// count, then per pair `u32` key length + UTF-8 key + `f64` value, then
/// `u32 d` and `d·d` `f64` row-major.
pub fn write_instance(path: &Path, family: Family, params: &[(String, f64)], sigma: &SymMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| SpcaError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut buf = Vec::new();
    buf.extend_from_slice(INSTANCE_MAGIC);
    let put_str = |buf: &mut Vec<u8>, s: &str| {
        buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
        buf.extend_from_slice(s.as_bytes());
    };
    put_str(&mut buf, family.tag());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (k, v) in params {
        put_str(&mut buf, k);
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(sigma.dim() as u32).to_le_bytes());
    for x in sigma.as_slice() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| SpcaError::io(path, e))?;
    w.flush().map_err(|e| SpcaError::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(SpcaError::Format("truncated instance file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| SpcaError::Format("non-UTF-8 string".into()))
    }
}

pub fn read_instance(path: &Path) -> Result<(Family, Vec<(String, f64)>, SymMatrix)> {
    let file = File::open(path).map_err(|e| SpcaError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| SpcaError::io(path, e))?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4)? != INSTANCE_MAGIC {
        return Err(SpcaError::Format(format!("{}: bad magic, expected SPCX", path.display())));
    }
    let family = Family::from_tag(&c.string()?).map_err(|e| SpcaError::Format(e.to_string()))?;
    let count = c.u32()?;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let k = c.string()?;
        params.push((k, c.f64()?));
    }
    let d = c.u32()?;
    let mut data = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        data.push(c.f64()?);
    }
    if c.pos != bytes.len() {
        return Err(SpcaError::Format("trailing bytes after instance matrix".into()));
    }
    let sigma = SymMatrix::from_row_major(d, data).map_err(|e| SpcaError::Format(e.to_string()))?;
    Ok((family, params, sigma))
}
