//! Gridded daily climate fields, the `DKG1` file format, synthetic data
//! and sample windowing.

mod io;
mod samples;
mod synth;

pub use io::{
    read_grid_file, read_labels_csv, write_grid_file, write_labels_csv, GRID_MAGIC, GRID_VERSION,
};
pub use samples::{
    merge_sources, split_by_date, window_count, window_series, MergeConfig, Sample, SampleSet,
    WindowSpec,
};
pub use synth::{synth_generate, ChannelParams, SynthParams, MIN_SYNTH_DAYS};

use chrono::{Duration, NaiveDate};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Land/missing marker used in SST fields.
pub const LAND_MASK_VALUE: f64 = -32767.0;

pub const OLR: &str = "OLR";
pub const U200: &str = "U200";
pub const U850: &str = "U850";
pub const SST: &str = "SST";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub units: String,
}

impl Variable {
    pub fn new(name: &str, units: &str) -> Self {
        Self {
            name: name.to_string(),
            units: units.to_string(),
        }
    }

    /// Variable with the conventional units for known names.
    pub fn named(name: &str) -> Self {
        let units = match name {
            OLR => "W/m^2",
            U200 | U850 => "m/s",
            SST => "K",
            _ => "",
        };
        Self::new(name, units)
    }
}

pub fn default_variables() -> Vec<Variable> {
    [OLR, U200, U850, SST].into_iter().map(Variable::named).collect()
}

/// Regular latitude/longitude grid and its variable list.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lat_count: usize,
    pub lon_count: usize,
    pub lat_start: f64,
    pub lat_step: f64,
    pub lon_start: f64,
    pub lon_step: f64,
    pub variables: Vec<Variable>,
}

impl Default for GridSpec {
    /// 15°N–15°S, 0°–360° at 2.5°: 13 × 144.
    fn default() -> Self {
        Self::regular(13, 144, default_variables()).expect("default grid is valid")
    }
}

impl GridSpec {
    /// Grid spanning 15°N→15°S and the full longitude circle.
    pub fn regular(lat_count: usize, lon_count: usize, variables: Vec<Variable>) -> Result<Self> {
        let lat_step = if lat_count > 1 {
            -30.0 / (lat_count - 1) as f64
        } else {
            0.0
        };
        let lon_step = if lon_count > 0 {
            360.0 / lon_count as f64
        } else {
            0.0
        };
        let spec = Self {
            lat_count,
            lon_count,
            lat_start: if lat_count > 1 { 15.0 } else { 0.0 },
            lat_step,
            lon_start: 0.0,
            lon_step,
            variables,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Desk-scale 13 × 36 grid (every 10° of longitude).
    pub fn desk() -> Self {
        Self::regular(13, 36, default_variables()).expect("desk grid is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.lat_count == 0 || self.lon_count == 0 {
            return Err(Error::Parameter(format!(
                "grid extents must be positive, got {}x{}",
                self.lat_count, self.lon_count
            )));
        }
        if self.variables.is_empty() {
            return Err(Error::Parameter("grid needs at least one variable".into()));
        }
        for (i, v) in self.variables.iter().enumerate() {
            if self.variables[..i].iter().any(|u| u.name == v.name) {
                return Err(Error::Parameter(format!("duplicate variable {}", v.name)));
            }
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.variables.len()
    }

    pub fn channel(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn latitude(&self, i: usize) -> f64 {
        self.lat_start + self.lat_step * i as f64
    }

    pub fn longitude(&self, j: usize) -> f64 {
        self.lon_start + self.lon_step * j as f64
    }

    /// Same extents and variable names.
    pub fn compatible(&self, other: &GridSpec) -> bool {
        self.lat_count == other.lat_count
            && self.lon_count == other.lon_count
            && self.variables.len() == other.variables.len()
            && self
                .variables
                .iter()
                .zip(&other.variables)
                .all(|(a, b)| a.name == b.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SourceTag {
    Reanalysis,
    Model,
    Synthetic,
}

impl SourceTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceTag::Reanalysis => "reanalysis",
            SourceTag::Model => "model",
            SourceTag::Synthetic => "synthetic",
        }
    }
}

/// Consecutive daily fields `[T × lat × lon × var]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddedSeries {
    pub spec: GridSpec,
    pub start_date: NaiveDate,
    pub values: Tensor,
    pub source: SourceTag,
}

impl GriddedSeries {
    pub fn new(
        spec: GridSpec,
        start_date: NaiveDate,
        values: Tensor,
        source: SourceTag,
    ) -> Result<Self> {
        spec.validate()?;
        let s = values.shape();
        if s.len() != 4
            || s[1] != spec.lat_count
            || s[2] != spec.lon_count
            || s[3] != spec.channels()
        {
            return Err(Error::Dimension(format!(
                "series values {s:?} do not match grid {}x{}x{}",
                spec.lat_count,
                spec.lon_count,
                spec.channels()
            )));
        }
        Ok(Self {
            spec,
            start_date,
            values,
            source,
        })
    }

    pub fn days(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn date(&self, t: usize) -> NaiveDate {
        self.start_date + Duration::days(t as i64)
    }

    pub fn end_date(&self) -> NaiveDate {
        self.date(self.days() - 1)
    }

    /// Day index of `date`, if inside the series.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let off = (date - self.start_date).num_days();
        (off >= 0 && (off as usize) < self.days()).then_some(off as usize)
    }

    pub fn day_len(&self) -> usize {
        self.spec.lat_count * self.spec.lon_count * self.spec.channels()
    }

    /// Values of day `t` as a flat `[lat × lon × var]` slice.
    pub fn day(&self, t: usize) -> &[f64] {
        let n = self.day_len();
        &self.values.data()[t * n..(t + 1) * n]
    }

    /// Days `[start, start + len)` as a new series.
    pub fn slice_days(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.days() {
            return Err(Error::Coverage {
                what: format!("slice starting at day {start}"),
                required: start + len,
                available: self.days(),
            });
        }
        let n = self.day_len();
        let data = self.values.data()[start * n..(start + len) * n].to_vec();
        let mut shape = self.values.shape().to_vec();
        shape[0] = len;
        Ok(Self {
            spec: self.spec.clone(),
            start_date: self.date(start),
            values: Tensor::new(&shape, data)?,
            source: self.source,
        })
    }

    pub fn with_source(mut self, source: SourceTag) -> Self {
        self.source = source;
        self
    }

    /// Flat index of `(t, lat, lon, var)`.
    pub fn offset(&self, t: usize, i: usize, j: usize, c: usize) -> usize {
        ((t * self.spec.lat_count + i) * self.spec.lon_count + j) * self.spec.channels() + c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_tropical_band() {
        let g = GridSpec::default();
        assert_eq!((g.lat_count, g.lon_count), (13, 144));
        assert_eq!(g.latitude(0), 15.0);
        assert_eq!(g.latitude(12), -15.0);
        assert_eq!(g.lon_step, 2.5);
        assert_eq!(g.channel(SST), Some(3));
    }

    #[test]
    fn duplicate_variables_rejected() {
        let vars = vec![Variable::named(OLR), Variable::named(OLR)];
        assert!(GridSpec::regular(3, 4, vars).is_err());
        assert!(GridSpec::regular(0, 4, default_variables()).is_err());
    }
}
