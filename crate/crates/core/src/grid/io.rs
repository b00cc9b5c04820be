//! `DKG1` grid files and RMM label CSVs.
//!
//! Grid layout, integers little-endian, strings `u32`-length-prefixed:
//!
//! ```text
//! "DKG1"  u16 version (=1)  u32 T, lat, lon, var
//! start date (ISO-8601)  u32 var_count, var names
//! payload f32 [t][lat][lon][var]
//! ```
//!
//! Latitude/longitude geometry is not stored; readers assume the regular
//! 15°N–15°S, 0°–360° band of [`GridSpec::regular`].

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{GridSpec, GriddedSeries, SourceTag, Variable};
use crate::error::{Error, Result};
use crate::rmm::RmmSeries;
use crate::binio::Cursor;
use crate::tensor::Tensor;

pub const GRID_MAGIC: &[u8; 4] = b"DKG1";
pub const GRID_VERSION: u16 = 1;

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

pub(crate) fn encode_grid(series: &GriddedSeries) -> Vec<u8> {
    let s = series.values.shape();
    let mut buf = Vec::with_capacity(64 + series.values.len() * 4);
    buf.extend_from_slice(GRID_MAGIC);
    buf.extend_from_slice(&GRID_VERSION.to_le_bytes());
    for &d in s {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    put_str(&mut buf, &series.start_date.format("%Y-%m-%d").to_string());
    buf.extend_from_slice(&(series.spec.variables.len() as u32).to_le_bytes());
    for v in &series.spec.variables {
        put_str(&mut buf, &v.name);
    }
    for &v in series.values.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    buf
}

pub(crate) fn decode_grid(bytes: &[u8]) -> Result<GriddedSeries> {
    let mut cur = Cursor::new(bytes);
    let magic = cur
        .take(4)
        .map_err(|_| Error::Format("file shorter than magic".into()))?;
    if magic != GRID_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"DKG1\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = cur.u16()?;
    if version != GRID_VERSION {
        return Err(Error::Format(format!("unsupported grid version {version}")));
    }
    let (t, l, w, c) = (
        cur.u32()? as usize,
        cur.u32()? as usize,
        cur.u32()? as usize,
        cur.u32()? as usize,
    );
    if t == 0 || l == 0 || w == 0 || c == 0 {
        return Err(Error::Format(format!("zero extent in header {t}x{l}x{w}x{c}")));
    }
    let date_str = cur.string()?;
    let start_date = NaiveDate::parse_from_str(&date_str, "%Y-%m-%d")
        .map_err(|e| Error::Format(format!("start date {date_str:?}: {e}")))?;
    let nvars = cur.u32()? as usize;
    if nvars != c {
        return Err(Error::Format(format!(
            "header declares {c} channels but lists {nvars} variable names"
        )));
    }
    let variables = (0..nvars)
        .map(|_| cur.string().map(|n| Variable::named(&n)))
        .collect::<Result<Vec<_>>>()?;
    let payload = t * l * w * c * 4;
    if cur.remaining() != payload {
        let header = bytes.len() - cur.remaining();
        return Err(Error::Length {
            expected: (header + payload) as u64,
            actual: bytes.len() as u64,
        });
    }
    let raw = cur.take(payload)?;
    let data = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    let spec = GridSpec::regular(l, w, variables)?;
    GriddedSeries::new(
        spec,
        start_date,
        Tensor::new(&[t, l, w, c], data)?,
        SourceTag::Reanalysis,
    )
}

/// Writes `series` as a `DKG1` file. Values are stored as `f32`.
pub fn write_grid_file(path: impl AsRef<Path>, series: &GriddedSeries) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_grid(series))?;
    Ok(())
}

/// Reads a `DKG1` file. The source tag is not stored and defaults to
/// [`SourceTag::Reanalysis`]; use [`GriddedSeries::with_source`] to retag.
pub fn read_grid_file(path: impl AsRef<Path>) -> Result<GriddedSeries> {
    decode_grid(&std::fs::read(path)?)
}

#[derive(Serialize, Deserialize)]
struct LabelRow {
    date: NaiveDate,
    rmm1: f64,
    rmm2: f64,
}

pub fn write_labels_csv(path: impl AsRef<Path>, labels: &RmmSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for i in 0..labels.len() {
        w.serialize(LabelRow {
            date: labels.dates[i],
            rmm1: labels.rmm1[i],
            rmm2: labels.rmm2[i],
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<RmmSeries> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "rmm1", "rmm2"] {
        return Err(Error::Format(format!(
            "label header must be date,rmm1,rmm2, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut dates, mut rmm1, mut rmm2) = (Vec::new(), Vec::new(), Vec::new());
    for row in r.deserialize() {
        let row: LabelRow = row?;
        dates.push(row.date);
        rmm1.push(row.rmm1);
        rmm2.push(row.rmm2);
    }
    RmmSeries::new(dates, rmm1, rmm2)
}
