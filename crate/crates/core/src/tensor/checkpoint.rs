//! `DKW1` named-tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "DKW1"  u32 entry_count
//! entry:  u32 name_len, name (UTF-8), u32 rank, u32 extent × rank,
//!         f64 × product(extents)
//! ```
//!
//! Rank-0 entries hold a single value and carry scalar metadata.

use std::io::Write;
use std::path::Path;

use super::Tensor;
use crate::binio::Cursor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DKW1";

pub fn write_entries<W: Write>(mut out: W, entries: &[(String, Tensor)]) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, t) in entries {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &d in t.shape() {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_entries(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut cur = Cursor::new(bytes);
    let magic = cur.take(4).map_err(|_| Error::Format("file shorter than magic".into()))?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }
    let count = cur.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let name = cur.string()?;
        let rank = cur.u32()? as usize;
        let shape = (0..rank)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let raw = cur.take(numel * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(&shape, data)
            .map_err(|e| Error::Format(format!("entry {name}: {e}")))?;
        entries.push((name, t));
    }
    if cur.remaining() != 0 {
        return Err(Error::Format(format!(
            "{} trailing bytes after {count} entries",
            cur.remaining()
        )));
    }
    Ok(entries)
}

pub fn write_checkpoint(path: impl AsRef<Path>, entries: &[(String, Tensor)]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_entries(std::io::BufWriter::new(file), entries)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor)>> {
    let bytes = std::fs::read(path)?;
    read_entries(&bytes)
}
