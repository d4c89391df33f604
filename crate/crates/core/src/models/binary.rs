use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Result, SpcaError};

pub const DATASET_MAGIC: &[u8; 4] = b"SPCA";

/// Writes `magic, u32 n, u32 d, u64 seed, n·d f64`, all little-endian.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let n = u32::try_from(data.n()).map_err(|_| SpcaError::Format("n exceeds u32".into()))?;
    let d = u32::try_from(data.d()).map_err(|_| SpcaError::Format("d exceeds u32".into()))?;
    let file = File::create(path).map_err(|e| SpcaError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| SpcaError::io(path, e));
    put(DATASET_MAGIC)?;
    put(&n.to_le_bytes())?;
    put(&d.to_le_bytes())?;
    put(&data.seed().to_le_bytes())?;
    for x in data.rows() {
        put(&x.to_le_bytes())?;
    }
    w.flush().map_err(|e| SpcaError::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| SpcaError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 20];
    r.read_exact(&mut header)
        .map_err(|_| SpcaError::Format(format!("{}: truncated dataset header", path.display())))?;
    if &header[..4] != DATASET_MAGIC {
        return Err(SpcaError::Format(format!("{}: bad magic, expected SPCA", path.display())));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let seed = u64::from_le_bytes(header[12..20].try_into().unwrap());
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(|e| SpcaError::io(path, e))?;
    if body.len() != n * d * 8 {
        return Err(SpcaError::Format(format!(
            "{}: expected {} payload bytes for {n}x{d}, found {}",
            path.display(),
            n * d * 8,
            body.len()
        )));
    }
    let rows = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Dataset::new(n, d, rows, seed).map_err(|e| SpcaError::Format(format!("{}: {e}", path.display())))
}
