//! Sliding-window samples and two-source dataset merging.

use chrono::{Duration, NaiveDate};
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GriddedSeries, SourceTag};
use crate::error::{Error, Result};
use crate::rmm::RmmSeries;
use crate::tensor::Tensor;

/// Window geometry. `lead` days at the start of a series are skipped,
/// which lets raw series reserve the running-mean history.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    pub k: usize,
    pub n: usize,
    pub stride: usize,
    pub lead: usize,
}

impl WindowSpec {
    pub fn new(k: usize, n: usize, stride: usize) -> Self {
        Self {
            k,
            n,
            stride,
            lead: 0,
        }
    }

    pub fn with_lead(mut self, lead: usize) -> Self {
        self.lead = lead;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.stride == 0 {
            return Err(Error::Parameter(format!(
                "window needs k, n, stride >= 1, got k={} n={} stride={}",
                self.k, self.n, self.stride
            )));
        }
        Ok(())
    }

    /// Days a series needs for a single window.
    pub fn required_days(&self) -> usize {
        self.lead + self.k + self.n
    }
}

/// Number of windows in a `days`-long series.
pub fn window_count(days: usize, spec: &WindowSpec) -> usize {
    if spec.stride == 0 || days < spec.required_days() {
        0
    } else {
        (days - spec.required_days()) / spec.stride + 1
    }
}

/// Anchor day indices (last input day) of every window.
fn anchors(days: usize, spec: &WindowSpec) -> impl Iterator<Item = usize> {
    let first = spec.lead + spec.k - 1;
    let stride = spec.stride;
    (0..window_count(days, spec)).map(move |i| first + i * stride)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `[k × lat × lon × var]`
    pub input: Tensor,
    /// `[n × 2]`, (RMM1, RMM2) for anchor+1 … anchor+n.
    pub label: Tensor,
    pub source: SourceTag,
    /// Last day of the input window.
    pub anchor: NaiveDate,
}

impl Sample {
    pub fn input_dates(&self) -> Vec<NaiveDate> {
        let k = self.input.shape()[0] as i64;
        (0..k).map(|i| self.anchor - Duration::days(k - 1 - i)).collect()
    }

    pub fn label_dates(&self) -> Vec<NaiveDate> {
        let n = self.label.shape()[0] as i64;
        (1..=n).map(|j| self.anchor + Duration::days(j)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
}

impl SampleSet {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, source: SourceTag) -> usize {
        self.samples.iter().filter(|s| s.source == source).count()
    }

    /// Input window length, if the set is non-empty.
    pub fn k(&self) -> Option<usize> {
        self.samples.first().map(|s| s.input.shape()[0])
    }

    pub fn horizon(&self) -> Option<usize> {
        self.samples.first().map(|s| s.label.shape()[0])
    }

    /// Stacks the chosen inputs into `[B × k × lat × lon × var]`.
    pub fn batch_inputs(&self, indices: &[usize]) -> Result<Tensor> {
        let parts: Vec<Tensor> = indices.iter().map(|&i| self.samples[i].input.clone()).collect();
        Tensor::stack(&parts)
    }

    /// Stacks the chosen labels into `[B × n × 2]`.
    pub fn batch_labels(&self, indices: &[usize]) -> Result<Tensor> {
        let parts: Vec<Tensor> = indices.iter().map(|&i| self.samples[i].label.clone()).collect();
        Tensor::stack(&parts)
    }

    pub fn filter(&self, keep: impl Fn(&Sample) -> bool) -> SampleSet {
        SampleSet::new(self.samples.iter().filter(|s| keep(s)).cloned().collect())
    }
}

/// Cuts `series` into (input, label) windows with labels looked up by date.
///
/// An empty result is not an error; a window whose label date is absent
/// from `labels` is an alignment error naming that date.
pub fn window_series(
    series: &GriddedSeries,
    labels: &RmmSeries,
    spec: &WindowSpec,
) -> Result<SampleSet> {
    spec.validate()?;
    let days = series.days();
    let count = window_count(days, spec);
    if count == 0 {
        warn!(
            "{} series of {days} days yields no windows for k={} n={} lead={}",
            series.source.as_str(),
            spec.k,
            spec.n,
            spec.lead
        );
        return Ok(SampleSet::default());
    }
    let day_len = series.day_len();
    let s = series.values.shape();
    let mut samples = Vec::with_capacity(count);
    for t in anchors(days, spec) {
        let start = t + 1 - spec.k;
        let data = series.values.data()[start * day_len..(t + 1) * day_len].to_vec();
        let input = Tensor::new(&[spec.k, s[1], s[2], s[3]], data)?;
        let mut label = Vec::with_capacity(2 * spec.n);
        for j in 1..=spec.n {
            let date = series.date(t + j);
            let idx = labels.index_of(date).ok_or(Error::Alignment(date))?;
            label.push(labels.rmm1[idx]);
            label.push(labels.rmm2[idx]);
        }
        samples.push(Sample {
            input,
            label: Tensor::new(&[spec.n, 2], label)?,
            source: series.source,
            anchor: series.date(t),
        });
    }
    Ok(SampleSet::new(samples))
}

/// Two-source merging settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MergeConfig {
    pub k: usize,
    pub n: usize,
    pub lead: usize,
    pub reanalysis_stride: usize,
    pub model_stride: usize,
    pub seed: u64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            k: 7,
            n: 35,
            lead: 0,
            reanalysis_stride: 2,
            model_stride: 7,
            seed: 0,
        }
    }
}

/// Builds a shuffled set with equal reanalysis and model sample counts.
///
/// Every source is windowed at its own stride, the larger side is
/// subsampled (seeded) down to the smaller, and the union is shuffled.
/// Labels for all samples come from `labels`, looked up by date.
pub fn merge_sources(
    reanalysis: &GriddedSeries,
    model: &[GriddedSeries],
    labels: &RmmSeries,
    cfg: &MergeConfig,
) -> Result<SampleSet> {
    let rspec = WindowSpec::new(cfg.k, cfg.n, cfg.reanalysis_stride).with_lead(cfg.lead);
    let mspec = WindowSpec::new(cfg.k, cfg.n, cfg.model_stride).with_lead(cfg.lead);
    rspec.validate()?;
    mspec.validate()?;
    if model.is_empty() {
        return Err(Error::Coverage {
            what: "merging with no model series".into(),
            required: mspec.required_days(),
            available: 0,
        });
    }
    let check = |s: &GriddedSeries, spec: &WindowSpec| {
        if s.days() < spec.required_days() {
            return Err(Error::Coverage {
                what: format!("{} series starting {}", s.source.as_str(), s.start_date),
                required: spec.required_days(),
                available: s.days(),
            });
        }
        if !s.spec.compatible(&reanalysis.spec) {
            return Err(Error::Dimension(format!(
                "{} series grid {}x{}x{} differs from reanalysis",
                s.source.as_str(),
                s.spec.lat_count,
                s.spec.lon_count,
                s.spec.channels()
            )));
        }
        Ok(())
    };
    check(reanalysis, &rspec)?;
    for m in model {
        check(m, &mspec)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut re = window_series(&reanalysis.clone().with_source(SourceTag::Reanalysis), labels, &rspec)?.samples;
    let mut mo = Vec::new();
    for m in model {
        mo.extend(window_series(&m.clone().with_source(SourceTag::Model), labels, &mspec)?.samples);
    }
    let half = re.len().min(mo.len());
    for side in [&mut re, &mut mo] {
        if side.len() > half {
            side.shuffle(&mut rng);
            side.truncate(half);
        }
    }
    let mut all = re;
    all.append(&mut mo);
    all.shuffle(&mut rng);
    Ok(SampleSet::new(all))
}

/// Splits at `split`: training keeps samples whose label window ends before
/// it, validation keeps reanalysis samples anchored on or after it.
pub fn split_by_date(set: &SampleSet, split: NaiveDate) -> (SampleSet, SampleSet) {
    let train = set.filter(|s| s.label_dates().last().is_some_and(|d| *d < split));
    let valid = set.filter(|s| s.source == SourceTag::Reanalysis && s.anchor >= split);
    (train, valid)
}
