//! Combined EOF basis over meridionally averaged OLR/U200/U850.
//!
//! Each day becomes a `3·lon` state vector: the latitude mean of every field,
//! divided by that field's standard deviation over the fitting period. The
//! leading two eigenvectors of the state second-moment matrix form the basis;
//! RMM1/RMM2 are the daily projections scaled to unit standard deviation.

use chrono::NaiveDate;
use log::warn;

use super::{symmetric_eigen, RmmSeries};
use crate::error::{Error, Result};
use crate::grid::{GriddedSeries, OLR, U200, U850};
use crate::tensor::Tensor;

pub const EOF_FIELDS: [&str; 3] = [OLR, U200, U850];

/// Relative gap below which the leading eigenvalues are treated as equal.
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct EofBasis {
    pub lon_count: usize,
    /// Per-field normalization divisors, in [`EOF_FIELDS`] order.
    pub norms: [f64; 3],
    /// EOF1 and EOF2, each of length `3·lon_count`, unit norm.
    pub patterns: [Vec<f64>; 2],
    /// Standard deviation of each principal component over the fit period.
    pub pc_std: [f64; 2],
    /// All eigenvalues of the state second-moment matrix, descending.
    pub eigenvalues: Vec<f64>,
}

impl EofBasis {
    pub fn state_len(&self) -> usize {
        3 * self.lon_count
    }

    /// Fraction of total variance carried by mode `k` (0-based).
    pub fn explained_variance(&self, k: usize) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues[k] / total
    }

    pub fn to_entries(&self) -> Vec<(String, Tensor)> {
        let n = self.state_len();
        let mut pat = self.patterns[0].clone();
        pat.extend_from_slice(&self.patterns[1]);
        vec![
            ("eof.patterns".into(), Tensor::new(&[2, n], pat).expect("pattern shape")),
            ("eof.norms".into(), Tensor::from_vec(self.norms.to_vec())),
            ("eof.pc_std".into(), Tensor::from_vec(self.pc_std.to_vec())),
            ("eof.eigenvalues".into(), Tensor::from_vec(self.eigenvalues.clone())),
        ]
    }

    pub fn from_entries(entries: &[(String, Tensor)]) -> Result<Self> {
        let find = |name: &str| {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::Format(format!("basis file lacks entry {name}")))
        };
        let pat = find("eof.patterns")?;
        let norms = find("eof.norms")?;
        let pc_std = find("eof.pc_std")?;
        let eig = find("eof.eigenvalues")?;
        if pat.rank() != 2 || pat.shape()[0] != 2 || pat.shape()[1] % 3 != 0 {
            return Err(Error::Format(format!("eof.patterns shape {:?}", pat.shape())));
        }
        if norms.len() != 3 || pc_std.len() != 2 {
            return Err(Error::Format("eof.norms needs 3 values, eof.pc_std 2".into()));
        }
        let n = pat.shape()[1];
        Ok(Self {
            lon_count: n / 3,
            norms: [norms.data()[0], norms.data()[1], norms.data()[2]],
            patterns: [pat.data()[..n].to_vec(), pat.data()[n..].to_vec()],
            pc_std: [pc_std.data()[0], pc_std.data()[1]],
            eigenvalues: eig.data().to_vec(),
        })
    }
}

fn field_channels(series: &GriddedSeries) -> Result<[usize; 3]> {
    let mut out = [0; 3];
    for (slot, name) in out.iter_mut().zip(EOF_FIELDS) {
        *slot = series
            .spec
            .channel(name)
            .ok_or_else(|| Error::Channel(format!("RMM needs channel {name}")))?;
    }
    Ok(out)
}

/// Latitude-averaged `[T × 3·lon]` fields, un-normalized.
fn meridional_means(series: &GriddedSeries) -> Result<Vec<f64>> {
    let ch = field_channels(series)?;
    let (l, w) = (series.spec.lat_count, series.spec.lon_count);
    let vals = series.values.data();
    let mut out = vec![0.0; series.days() * 3 * w];
    for t in 0..series.days() {
        for (f, &c) in ch.iter().enumerate() {
            for j in 0..w {
                let mut acc = 0.0;
                for i in 0..l {
                    acc += vals[series.offset(t, i, j, c)];
                }
                out[(t * 3 + f) * w + j] = acc / l as f64;
            }
        }
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits the two-mode combined EOF basis to preprocessed anomalies.
pub fn compute_eof_basis(anomalies: &GriddedSeries) -> Result<EofBasis> {
    let w = anomalies.spec.lon_count;
    let n = 3 * w;
    let days = anomalies.days();
    if days < n {
        warn!("EOF fit on {days} days for a {n}-element state: covariance is rank deficient");
    }
    let mut state = meridional_means(anomalies)?;

    let mut norms = [0.0; 3];
    for (f, norm) in norms.iter_mut().enumerate() {
        let vals: Vec<f64> = (0..days)
            .flat_map(|t| state[t * n + f * w..t * n + (f + 1) * w].iter().copied())
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        if var <= 0.0 {
            return Err(Error::Degenerate(format!(
                "field {} has zero variance",
                EOF_FIELDS[f]
            )));
        }
        *norm = var.sqrt();
    }
    for t in 0..days {
        for f in 0..3 {
            for v in &mut state[t * n + f * w..t * n + (f + 1) * w] {
                *v /= norms[f];
            }
        }
    }

    let mut cov = vec![0.0; n * n];
    for row in state.chunks(n) {
        for i in 0..n {
            let ri = row[i];
            for j in i..n {
                cov[i * n + j] += ri * row[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[i * n + j] / days as f64;
            cov[i * n + j] = v;
            cov[j * n + i] = v;
        }
    }

    let (eigenvalues, vectors) = symmetric_eigen(&cov, n);
    let lead = eigenvalues[0].abs().max(f64::MIN_POSITIVE);
    for k in 0..2.min(n - 1) {
        if (eigenvalues[k] - eigenvalues[k + 1]).abs() <= DEGENERACY_TOL * lead {
            return Err(Error::Degenerate(format!(
                "eigenvalues {} and {} coincide ({:e})",
                k + 1,
                k + 2,
                eigenvalues[k]
            )));
        }
    }
    let mut e1 = vectors[..n].to_vec();
    let mut e2 = vectors[n..2 * n].to_vec();
    orient_modes(&mut e1, &mut e2, w);

    let mut pc_std = [0.0; 2];
    for (k, e) in [&e1, &e2].into_iter().enumerate() {
        let pcs: Vec<f64> = state.chunks(n).map(|row| dot(row, e)).collect();
        let mean = pcs.iter().sum::<f64>() / days as f64;
        let var = pcs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / days as f64;
        pc_std[k] = var.sqrt();
    }

    Ok(EofBasis {
        lon_count: w,
        norms,
        patterns: [e1, e2],
        pc_std,
        eigenvalues,
    })
}

/// Deterministic signs for the two modes.
///
/// EOF1: its OLR segment projects negatively onto a zonal wavenumber-1
/// cosine peaking at 90°E (enhanced convection over the Indian Ocean);
/// falls back to the largest-magnitude OLR element being negative.
/// EOF2: chosen to correlate positively with EOF1 shifted a quarter of the
/// circle eastward, which makes eastward propagation rotate RMM
/// counterclockwise.
fn orient_modes(e1: &mut [f64], e2: &mut [f64], w: usize) {
    let olr = &e1[..w];
    let center = 90.0f64.to_radians();
    let proj: f64 = olr
        .iter()
        .enumerate()
        .map(|(j, v)| v * (2.0 * std::f64::consts::PI * j as f64 / w as f64 - center).cos())
        .sum();
    let norm: f64 = olr.iter().map(|v| v * v).sum::<f64>().sqrt();
    let flip1 = if proj.abs() > 1e-6 * norm.max(f64::MIN_POSITIVE) {
        proj > 0.0
    } else {
        let big = olr
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        big > 0.0
    };
    if flip1 {
        e1.iter_mut().for_each(|v| *v = -*v);
    }
    let shift = (w / 4).max(1);
    let mut lagged = 0.0;
    for f in 0..3 {
        for j in 0..w {
            let src = (j + w - shift) % w;
            lagged += e2[f * w + j] * e1[f * w + src];
        }
    }
    if lagged < 0.0 {
        e2.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Projects anomalies onto a fitted basis, one (RMM1, RMM2) per day.
pub fn project_rmm(anomalies: &GriddedSeries, basis: &EofBasis) -> Result<RmmSeries> {
    let w = anomalies.spec.lon_count;
    if w != basis.lon_count {
        return Err(Error::Dimension(format!(
            "anomalies have {w} longitudes, basis expects {}",
            basis.lon_count
        )));
    }
    let n = 3 * w;
    let state = meridional_means(anomalies)?;
    let mut rmm1 = Vec::with_capacity(anomalies.days());
    let mut rmm2 = Vec::with_capacity(anomalies.days());
    let mut scaled = vec![0.0; n];
    for row in state.chunks(n) {
        for f in 0..3 {
            for j in 0..w {
                scaled[f * w + j] = row[f * w + j] / basis.norms[f];
            }
        }
        rmm1.push(dot(&scaled, &basis.patterns[0]) / basis.pc_std[0]);
        rmm2.push(dot(&scaled, &basis.patterns[1]) / basis.pc_std[1]);
    }
    let dates: Vec<NaiveDate> = (0..anomalies.days()).map(|t| anomalies.date(t)).collect();
    RmmSeries::new(dates, rmm1, rmm2)
}
