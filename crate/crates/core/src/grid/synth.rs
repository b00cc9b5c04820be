//! Synthetic tropical fields with a propagating intraseasonal wave.
//!
//! Every non-SST channel is
//!
//! ```text
//! base + annual·cos(ωt) + semiannual·cos(2ωt) + drift·s
//!      + A·env(lat)·m(t)·sin(2π(j/w − t/P) + φ + ψ(t)) + noise
//! ```
//!
//! with `t` days since [`SynthParams::epoch`], `s` days since series start,
//! `env(lat) = exp(−(lat/lat_scale)²)`, and `m(t)`, `ψ(t)` slow random
//! amplitude and phase perturbations driven by `signal_seed`. SST gets the
//! seasonal terms only, plus a land-mask longitude stripe.

use std::f64::consts::PI;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{GridSpec, GriddedSeries, SourceTag, LAND_MASK_VALUE, OLR, SST, U200, U850};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Shortest series the generator will produce.
pub const MIN_SYNTH_DAYS: usize = 200;

const OMEGA: f64 = 2.0 * PI / 365.25;

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParams {
    pub base: f64,
    pub annual: f64,
    pub semiannual: f64,
    pub drift_per_day: f64,
    pub wave_amplitude: f64,
    pub wave_phase: f64,
    pub noise_std: f64,
}

impl ChannelParams {
    /// Defaults by variable name; unknown names get a unit-scale channel.
    pub fn for_variable(name: &str) -> Self {
        match name {
            OLR => Self {
                base: 230.0,
                annual: 15.0,
                semiannual: 4.0,
                drift_per_day: 2e-3,
                wave_amplitude: 20.0,
                wave_phase: 0.0,
                noise_std: 6.0,
            },
            U200 => Self {
                base: 5.0,
                annual: 6.0,
                semiannual: 1.5,
                drift_per_day: 1e-3,
                wave_amplitude: 8.0,
                wave_phase: 0.6 * PI,
                noise_std: 2.5,
            },
            U850 => Self {
                base: -1.0,
                annual: 3.0,
                semiannual: 1.0,
                drift_per_day: 5e-4,
                wave_amplitude: 3.0,
                wave_phase: -0.4 * PI,
                noise_std: 1.0,
            },
            SST => Self {
                base: 300.0,
                annual: 1.5,
                semiannual: 0.3,
                drift_per_day: 2e-4,
                wave_amplitude: 0.0,
                wave_phase: 0.0,
                noise_std: 0.2,
            },
            _ => Self {
                base: 0.0,
                annual: 1.0,
                semiannual: 0.0,
                drift_per_day: 0.0,
                wave_amplitude: 1.0,
                wave_phase: 0.0,
                noise_std: 0.3,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    /// One entry per grid variable, in grid order.
    pub channels: Vec<ChannelParams>,
    pub start_date: NaiveDate,
    /// Origin of the seasonal and wave clocks.
    pub epoch: NaiveDate,
    pub wave_period: f64,
    pub lat_scale: f64,
    /// Multiplies every channel's wave amplitude.
    pub wave_scale: f64,
    /// Multiplies every channel's noise std.
    pub noise_scale: f64,
    /// Multiplies every channel's drift.
    pub drift_scale: f64,
    /// Standard deviation of the AR(1) amplitude modulation `m(t) − 1`.
    pub modulation: f64,
    /// Daily standard deviation of the random-walk phase `ψ(t)`.
    pub phase_jitter: f64,
    /// e-folding time of the amplitude modulation, days.
    pub modulation_tau: f64,
    pub signal_seed: u64,
    /// Offset added to non-SST channels, in units of their noise std.
    pub bias: f64,
    /// Longitudes `[start, end)` in degrees where SST is masked.
    pub land_stripe: Option<(f64, f64)>,
    pub source: SourceTag,
}

impl SynthParams {
    pub fn for_spec(spec: &GridSpec) -> Self {
        Self {
            channels: spec
                .variables
                .iter()
                .map(|v| ChannelParams::for_variable(&v.name))
                .collect(),
            start_date: NaiveDate::from_ymd_opt(1990, 1, 1).unwrap(),
            epoch: NaiveDate::from_ymd_opt(1979, 1, 1).unwrap(),
            wave_period: 45.0,
            lat_scale: 12.0,
            wave_scale: 1.0,
            noise_scale: 1.0,
            drift_scale: 1.0,
            modulation: 0.25,
            phase_jitter: 0.03,
            modulation_tau: 30.0,
            signal_seed: 7,
            bias: 0.0,
            land_stripe: Some((10.0, 40.0)),
            source: SourceTag::Synthetic,
        }
    }

    /// Pseudo-hindcast variant: same signal, damped wave, biased, new noise.
    pub fn model_emulation(&self) -> Self {
        Self {
            wave_scale: self.wave_scale * 0.9,
            bias: 0.5,
            source: SourceTag::Model,
            ..self.clone()
        }
    }
}

/// Slow amplitude factor `m(t)` and phase `ψ(t)` for `days` days.
fn signal_paths(params: &SynthParams, days: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(params.signal_seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let rho = if params.modulation_tau > 0.0 {
        (-1.0 / params.modulation_tau).exp()
    } else {
        0.0
    };
    let innov = (1.0 - rho * rho).sqrt();
    let mut a = std.sample(&mut rng);
    let mut psi = 0.0;
    let mut amp = Vec::with_capacity(days);
    let mut phase = Vec::with_capacity(days);
    for _ in 0..days {
        amp.push((1.0 + params.modulation * a).max(0.0));
        phase.push(psi);
        a = rho * a + innov * std.sample(&mut rng);
        psi += params.phase_jitter * std.sample(&mut rng);
    }
    (amp, phase)
}

/// Generates `days` days of synthetic fields on `spec`.
pub fn synth_generate(
    spec: &GridSpec,
    days: usize,
    seed: u64,
    params: &SynthParams,
) -> Result<GriddedSeries> {
    if days < MIN_SYNTH_DAYS {
        return Err(Error::Parameter(format!(
            "synthetic series needs at least {MIN_SYNTH_DAYS} days, got {days}"
        )));
    }
    spec.validate()?;
    if params.channels.len() != spec.channels() {
        return Err(Error::Parameter(format!(
            "{} channel parameter sets for {} grid variables",
            params.channels.len(),
            spec.channels()
        )));
    }
    if params.wave_period <= 0.0 {
        return Err(Error::Parameter("wave period must be positive".into()));
    }
    let sst = spec.channel(SST);
    let (l, w, c) = (spec.lat_count, spec.lon_count, spec.channels());
    let env: Vec<f64> = (0..l)
        .map(|i| (-(spec.latitude(i) / params.lat_scale).powi(2)).exp())
        .collect();
    let masked: Vec<bool> = (0..w)
        .map(|j| {
            let lon = spec.longitude(j).rem_euclid(360.0);
            params.land_stripe.is_some_and(|(a, b)| lon >= a && lon < b)
        })
        .collect();
    let (amp, psi) = signal_paths(params, days);
    let offset = (params.start_date - params.epoch).num_days() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Vec::with_capacity(days * l * w * c);
    for d in 0..days {
        let t = offset + d as f64;
        let seasonal: Vec<f64> = params
            .channels
            .iter()
            .map(|p| {
                p.base
                    + p.annual * (OMEGA * t).cos()
                    + p.semiannual * (2.0 * OMEGA * t).cos()
                    + p.drift_per_day * params.drift_scale * d as f64
            })
            .collect();
        for &e in &env {
            for (j, &land) in masked.iter().enumerate() {
                let arg = 2.0 * PI * (j as f64 / w as f64 - t / params.wave_period) + psi[d];
                for (ch, p) in params.channels.iter().enumerate() {
                    let noise = p.noise_std * params.noise_scale * unit.sample(&mut rng);
                    if Some(ch) == sst {
                        data.push(if land { LAND_MASK_VALUE } else { seasonal[ch] + noise });
                        continue;
                    }
                    let wave = p.wave_amplitude
                        * params.wave_scale
                        * e
                        * amp[d]
                        * (arg + p.wave_phase).sin();
                    let bias = params.bias * p.noise_std;
                    data.push(seasonal[ch] + wave + bias + noise);
                }
            }
        }
    }
    GriddedSeries::new(
        spec.clone(),
        params.start_date,
        Tensor::new(&[days, l, w, c], data)?,
        params.source,
    )
}
