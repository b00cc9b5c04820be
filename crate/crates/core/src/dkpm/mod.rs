//! Anomaly preprocessing: annual-cycle removal, trailing-mean removal,
//! SST masking and the input batch-normalization layer.

mod batchnorm;
mod harmonic;

pub use batchnorm::{batchnorm_forward, BatchNormState, BnMode};
pub use harmonic::{fit_harmonics, remove_cycles, HarmonicFit, ANNUAL_OMEGA};

use crate::error::{Error, Result};
use crate::grid::{GriddedSeries, LAND_MASK_VALUE, SST};
use crate::tensor::Tensor;

/// Length of the trailing mean removed from every anomaly.
pub const RUNNING_MEAN_DAYS: usize = 120;

/// Harmonics kept in the climatology.
pub const MAX_WAVE: usize = 3;

/// `x(t) − mean(x(t−120 … t−1))` for every non-SST value.
///
/// The output starts 120 days after the input; SST is copied through with
/// the same 120 days dropped.
pub fn remove_running_mean(series: &GriddedSeries) -> Result<GriddedSeries> {
    let w = RUNNING_MEAN_DAYS;
    let days = series.days();
    if days <= w {
        return Err(Error::Coverage {
            what: "trailing 120-day mean".into(),
            required: w + 1,
            available: days,
        });
    }
    let points = series.day_len();
    let c = series.spec.channels();
    let sst = series.spec.channel(SST);
    let src = series.values.data();
    let mut sum = vec![0.0; points];
    let mut out = Vec::with_capacity((days - w) * points);
    for t in w..days {
        // Exact re-summation every window length bounds rounding drift.
        if (t - w).is_multiple_of(w) {
            sum.iter_mut().for_each(|s| *s = 0.0);
            for d in t - w..t {
                for (s, v) in sum.iter_mut().zip(&src[d * points..(d + 1) * points]) {
                    *s += v;
                }
            }
        } else {
            let add = &src[(t - 1) * points..t * points];
            let drop = &src[(t - 1 - w) * points..(t - w) * points];
            for q in 0..points {
                sum[q] += add[q] - drop[q];
            }
        }
        let today = &src[t * points..(t + 1) * points];
        for q in 0..points {
            if Some(q % c) == sst {
                out.push(today[q]);
            } else {
                out.push(today[q] - sum[q] / w as f64);
            }
        }
    }
    let mut shape = series.values.shape().to_vec();
    shape[0] = days - w;
    GriddedSeries::new(
        series.spec.clone(),
        series.date(w),
        Tensor::new(&shape, out)?,
        series.source,
    )
}

/// Replaces land-masked SST values with 0.
pub fn mask_sst(series: &GriddedSeries) -> Result<GriddedSeries> {
    let ch = series
        .spec
        .channel(SST)
        .ok_or_else(|| Error::Channel("series has no SST channel to mask".into()))?;
    let c = series.spec.channels();
    let mut out = series.clone();
    for v in out.values.data_mut().iter_mut().skip(ch).step_by(c) {
        if *v == LAND_MASK_VALUE {
            *v = 0.0;
        }
    }
    Ok(out)
}

/// Climatology removal, trailing-mean removal and SST masking in order.
///
/// Skipping the mask is meant for diagnostics only.
pub fn anomalies(series: &GriddedSeries, fit: &HarmonicFit, mask: bool) -> Result<GriddedSeries> {
    let out = remove_running_mean(&remove_cycles(series, fit)?)?;
    if mask {
        mask_sst(&out)
    } else {
        Ok(out)
    }
}
