//! Raw series to training and validation samples.
//!
//! The climatology and EOF basis are fitted on the training period only
//! and then applied everywhere, so validation data never leaks into the
//! preprocessing state.

use std::path::Path;

use chrono::{Duration, NaiveDate};
use log::info;
use serde::{Deserialize, Serialize};

use crate::dkpm::{anomalies, fit_harmonics, HarmonicFit, MAX_WAVE, RUNNING_MEAN_DAYS};
use crate::error::{Error, Result};
use crate::grid::{merge_sources, window_series, GriddedSeries, MergeConfig, SampleSet, WindowSpec};
use crate::rmm::{compute_eof_basis, project_rmm, EofBasis, RmmSeries};
use crate::tensor::Tensor;
use crate::training::DkstnModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Trailing reanalysis days held out for validation.
    pub valid_days: usize,
    pub reanalysis_stride: usize,
    pub model_stride: usize,
    pub valid_stride: usize,
    /// Merge model series 1:1 with reanalysis; otherwise train on
    /// reanalysis alone.
    pub merge: bool,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            valid_days: 365,
            reanalysis_stride: 2,
            model_stride: 7,
            valid_stride: 1,
            merge: true,
            seed: 0,
        }
    }
}

/// Everything derived from the raw series.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub fit: HarmonicFit,
    pub basis: EofBasis,
    pub labels: RmmSeries,
    pub reanalysis: GriddedSeries,
    pub model: Vec<GriddedSeries>,
    /// First validation anchor date.
    pub split: NaiveDate,
    pub train: SampleSet,
    pub valid: SampleSet,
}

fn before(series: &GriddedSeries, split: NaiveDate) -> Option<GriddedSeries> {
    let len = (split - series.start_date).num_days().min(series.days() as i64);
    (len > 0).then(|| series.slice_days(0, len as usize).ok()).flatten()
}

/// Fits preprocessing on the training period, derives labels and cuts
/// windows of length `k` with horizon `n`.
pub fn prepare(
    reanalysis: &GriddedSeries,
    model: &[GriddedSeries],
    k: usize,
    n: usize,
    mask_sst: bool,
    cfg: &DataConfig,
) -> Result<Prepared> {
    let total = reanalysis.days();
    let need = RUNNING_MEAN_DAYS + cfg.valid_days + 2 * (k + n);
    if total < need {
        return Err(Error::Coverage {
            what: "reanalysis split into training and validation".into(),
            required: need,
            available: total,
        });
    }
    let split = reanalysis.date(total - cfg.valid_days);
    let train_raw = reanalysis.slice_days(0, total - cfg.valid_days)?;
    let fit = fit_harmonics(&train_raw, MAX_WAVE)?;
    let re = anomalies(reanalysis, &fit, mask_sst)?;
    let model: Vec<GriddedSeries> = model
        .iter()
        .map(|m| anomalies(m, &fit, mask_sst))
        .collect::<Result<_>>()?;

    let re_train = before(&re, split).ok_or_else(|| Error::Coverage {
        what: "training-period anomalies".into(),
        required: 1,
        available: 0,
    })?;
    let basis = compute_eof_basis(&re_train)?;
    let labels = project_rmm(&re, &basis)?;

    let (train, valid) = build_samples(&re, &model, &labels, split, k, n, cfg)?;
    Ok(Prepared {
        fit,
        basis,
        labels,
        reanalysis: re,
        model,
        split,
        train,
        valid,
    })
}

/// First validation date when the trailing `valid_days` are held out.
pub fn split_date(series: &GriddedSeries, valid_days: usize) -> Result<NaiveDate> {
    if valid_days == 0 || valid_days >= series.days() {
        return Err(Error::Coverage {
            what: "train/validation split".into(),
            required: valid_days + 1,
            available: series.days(),
        });
    }
    Ok(series.date(series.days() - valid_days))
}

/// Cuts training windows ending before `split` and validation windows
/// anchored on or after it from anomaly series.
pub fn build_samples(
    reanalysis: &GriddedSeries,
    model: &[GriddedSeries],
    labels: &RmmSeries,
    split: NaiveDate,
    k: usize,
    n: usize,
    cfg: &DataConfig,
) -> Result<(SampleSet, SampleSet)> {
    let re_train = before(reanalysis, split).ok_or_else(|| Error::Coverage {
        what: "training-period anomalies".into(),
        required: 1,
        available: 0,
    })?;
    let train = if cfg.merge && !model.is_empty() {
        let model_train: Vec<GriddedSeries> = model.iter().filter_map(|m| before(m, split)).collect();
        let mc = MergeConfig {
            k,
            n,
            lead: 0,
            reanalysis_stride: cfg.reanalysis_stride,
            model_stride: cfg.model_stride,
            seed: cfg.seed,
        };
        merge_sources(&re_train, &model_train, labels, &mc)?
    } else {
        window_series(&re_train, labels, &WindowSpec::new(k, n, cfg.reanalysis_stride))?
    };
    let at = reanalysis.index_of(split).ok_or(Error::Alignment(split))?;
    if at + 1 < k {
        return Err(Error::Coverage {
            what: "validation windows".into(),
            required: k,
            available: at + 1,
        });
    }
    let first = at + 1 - k;
    let re_valid = reanalysis.slice_days(first, reanalysis.days() - first)?;
    let valid = window_series(&re_valid, labels, &WindowSpec::new(k, n, cfg.valid_stride))?;
    info!(
        "{} training and {} validation samples, split at {split}",
        train.len(),
        valid.len()
    );
    Ok((train, valid))
}

/// Forecasts keyed by anchor date: `values` is `[M × n × 2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecasts {
    pub anchors: Vec<NaiveDate>,
    pub values: Tensor,
}

impl Forecasts {
    pub fn horizon(&self) -> usize {
        self.values.shape()[1]
    }

    /// Long format `anchor,lead,rmm1,rmm2`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["anchor", "lead", "rmm1", "rmm2"])?;
        let n = self.horizon();
        for (i, a) in self.anchors.iter().enumerate() {
            for j in 0..n {
                w.write_record([
                    a.to_string(),
                    (j + 1).to_string(),
                    self.values.at(&[i, j, 0]).to_string(),
                    self.values.at(&[i, j, 1]).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rows: Vec<(NaiveDate, usize, f64, f64)> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Parse(format!("forecast row {}: bad {what}", line + 2));
            if rec.len() != 4 {
                return Err(bad("column count"));
            }
            rows.push((
                rec[0].parse().map_err(|_| bad("anchor"))?,
                rec[1].parse().map_err(|_| bad("lead"))?,
                rec[2].parse().map_err(|_| bad("rmm1"))?,
                rec[3].parse().map_err(|_| bad("rmm2"))?,
            ));
        }
        let n = rows.iter().map(|r| r.1).max().unwrap_or(0);
        if n == 0 || !rows.len().is_multiple_of(n) {
            return Err(Error::Parse("forecast file has no complete lead blocks".into()));
        }
        let mut anchors = Vec::new();
        let mut data = Vec::with_capacity(rows.len() * 2);
        for (b, block) in rows.chunks(n).enumerate() {
            for (j, r) in block.iter().enumerate() {
                if r.0 != block[0].0 || r.1 != j + 1 {
                    return Err(Error::Parse(format!("forecast block {} is not leads 1..{n}", b + 1)));
                }
                data.extend([r.2, r.3]);
            }
            anchors.push(block[0].0);
        }
        let values = Tensor::new(&[anchors.len(), n, 2], data)?;
        Ok(Self { anchors, values })
    }

    /// Verifying truth for every anchor whose full horizon is labelled:
    /// `(pred, truth, anchors)`.
    pub fn align(&self, labels: &RmmSeries) -> Result<(Tensor, Tensor, Vec<NaiveDate>)> {
        let n = self.horizon();
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        let mut kept = Vec::new();
        for (i, &a) in self.anchors.iter().enumerate() {
            let idx: Option<Vec<usize>> = (1..=n as i64)
                .map(|j| labels.index_of(a + Duration::days(j)))
                .collect();
            let Some(idx) = idx else { continue };
            for (j, t) in idx.into_iter().enumerate() {
                pred.extend([self.values.at(&[i, j, 0]), self.values.at(&[i, j, 1])]);
                truth.extend([labels.rmm1[t], labels.rmm2[t]]);
            }
            kept.push(a);
        }
        if kept.is_empty() {
            return Err(Error::Data("no forecast anchor has labels for its full horizon".into()));
        }
        let m = kept.len();
        Ok((Tensor::new(&[m, n, 2], pred)?, Tensor::new(&[m, n, 2], truth)?, kept))
    }
}

/// Forecasts for every anchor in `anomalies` with `k` days of history,
/// starting at `from` when given.
pub fn forecast_series(
    model: &DkstnModel,
    anomalies: &GriddedSeries,
    from: Option<NaiveDate>,
) -> Result<Forecasts> {
    let k = model.k();
    let first = match from {
        Some(d) => anomalies.index_of(d).ok_or(Error::Alignment(d))?.max(k - 1),
        None => k - 1,
    };
    if first >= anomalies.days() {
        return Err(Error::Coverage {
            what: "forecast windows".into(),
            required: k,
            available: anomalies.days(),
        });
    }
    let per_day = anomalies.day_len();
    let s = anomalies.values.shape();
    let anchors_idx: Vec<usize> = (first..anomalies.days()).collect();
    let mut parts = Vec::new();
    for chunk in anchors_idx.chunks(64) {
        let mut data = Vec::with_capacity(chunk.len() * k * per_day);
        for &t in chunk {
            data.extend_from_slice(&anomalies.values.data()[(t + 1 - k) * per_day..(t + 1) * per_day]);
        }
        let x = Tensor::new(&[chunk.len(), k, s[1], s[2], s[3]], data)?;
        let y = model.predict_batch(&x)?;
        parts.extend((0..chunk.len()).map(|i| y.index_outer(i)));
    }
    Ok(Forecasts {
        anchors: anchors_idx.iter().map(|&t| anomalies.date(t)).collect(),
        values: Tensor::stack(&parts)?,
    })
}
