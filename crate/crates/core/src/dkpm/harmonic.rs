use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, GriddedSeries, SST};
use crate::tensor::Tensor;

/// Angular frequency of the annual cycle, rad/day.
pub const ANNUAL_OMEGA: f64 = 2.0 * std::f64::consts::PI / 365.25;

/// Climatological mean plus the first `max_wave` annual harmonics at every
/// grid point and variable.
///
/// Coefficients are stored as `[2·max_wave + 1, lat, lon, var]` in the
/// order `a0, a1, b1, a2, b2, …`. Time is measured in days from `origin`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicFit {
    pub spec: GridSpec,
    pub coeffs: Tensor,
    pub origin: NaiveDate,
    pub omega: f64,
    pub max_wave: usize,
}

fn basis(t: f64, omega: f64, max_wave: usize, out: &mut [f64]) {
    out[0] = 1.0;
    for n in 1..=max_wave {
        let a = n as f64 * omega * t;
        out[2 * n - 1] = a.cos();
        out[2 * n] = a.sin();
    }
}

/// Solves `g·x = b` for symmetric positive definite `g` (Cholesky).
fn cholesky(g: &[f64], p: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = g[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Degenerate("harmonic normal matrix is singular".into()));
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], p: usize, b: &mut [f64]) {
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= l[k * p + i] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
}

/// Least-squares fit of the mean and harmonics 1..=`max_wave`.
///
/// The SST channel is left at zero so that removal passes it through.
pub fn fit_harmonics(series: &GriddedSeries, max_wave: usize) -> Result<HarmonicFit> {
    let days = series.days();
    let period = (2.0 * std::f64::consts::PI / ANNUAL_OMEGA).ceil() as usize;
    if days < period {
        return Err(Error::Coverage {
            what: "harmonic fit over one annual period".into(),
            required: period,
            available: days,
        });
    }
    let p = 2 * max_wave + 1;
    let points = series.day_len();
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p * points];
    let mut phi = vec![0.0; p];
    for t in 0..days {
        basis(t as f64, ANNUAL_OMEGA, max_wave, &mut phi);
        for i in 0..p {
            for j in 0..p {
                gram[i * p + j] += phi[i] * phi[j];
            }
        }
        let day = series.day(t);
        for (i, &f) in phi.iter().enumerate() {
            let row = &mut rhs[i * points..(i + 1) * points];
            for (r, &x) in row.iter_mut().zip(day) {
                *r += f * x;
            }
        }
    }
    let l = cholesky(&gram, p)?;
    let sst = series.spec.channel(SST);
    let c = series.spec.channels();
    let mut coeffs = vec![0.0; p * points];
    let mut b = vec![0.0; p];
    for q in 0..points {
        if Some(q % c) == sst {
            continue;
        }
        for i in 0..p {
            b[i] = rhs[i * points + q];
        }
        cholesky_solve(&l, p, &mut b);
        for i in 0..p {
            coeffs[i * points + q] = b[i];
        }
    }
    let s = series.values.shape();
    Ok(HarmonicFit {
        spec: series.spec.clone(),
        coeffs: Tensor::new(&[p, s[1], s[2], s[3]], coeffs)?,
        origin: series.start_date,
        omega: ANNUAL_OMEGA,
        max_wave,
    })
}

impl HarmonicFit {
    /// Coefficient `idx` (0 = a0, 2n−1 = a_n, 2n = b_n) at one grid cell.
    pub fn coefficient(&self, idx: usize, lat: usize, lon: usize, var: usize) -> f64 {
        self.coeffs.at(&[idx, lat, lon, var])
    }

    /// Reconstructed climatology `[lat × lon × var]` for `date`.
    pub fn climatology(&self, date: NaiveDate) -> Vec<f64> {
        let p = 2 * self.max_wave + 1;
        let points = self.coeffs.len() / p;
        let mut phi = vec![0.0; p];
        basis(
            (date - self.origin).num_days() as f64,
            self.omega,
            self.max_wave,
            &mut phi,
        );
        let mut out = vec![0.0; points];
        for (i, &f) in phi.iter().enumerate() {
            let row = &self.coeffs.data()[i * points..(i + 1) * points];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += f * a;
            }
        }
        out
    }

    pub fn to_entries(&self) -> Vec<(String, Tensor)> {
        vec![
            ("harmonic.coeffs".into(), self.coeffs.clone()),
            (
                "harmonic.origin_day".into(),
                Tensor::scalar(self.origin.num_days_from_ce() as f64),
            ),
            ("harmonic.omega".into(), Tensor::scalar(self.omega)),
        ]
    }

    /// Rebuilds a fit from stored entries; `spec` supplies the grid geometry.
    pub fn from_entries(entries: &[(String, Tensor)], spec: &GridSpec) -> Result<Self> {
        let find = |name: &str| {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::Format(format!("missing entry {name}")))
        };
        let coeffs = find("harmonic.coeffs")?.clone();
        let s = coeffs.shape();
        if s.len() != 4
            || s[0] % 2 == 0
            || s[1] != spec.lat_count
            || s[2] != spec.lon_count
            || s[3] != spec.channels()
        {
            return Err(Error::Format(format!("harmonic.coeffs shape {s:?}")));
        }
        let day = find("harmonic.origin_day")?.item() as i32;
        let origin = NaiveDate::from_num_days_from_ce_opt(day)
            .ok_or_else(|| Error::Format(format!("bad origin day {day}")))?;
        Ok(Self {
            spec: spec.clone(),
            max_wave: (s[0] - 1) / 2,
            coeffs,
            origin,
            omega: find("harmonic.omega")?.item(),
        })
    }
}

/// Subtracts the fitted climatology from every non-SST value.
pub fn remove_cycles(series: &GriddedSeries, fit: &HarmonicFit) -> Result<GriddedSeries> {
    if !series.spec.compatible(&fit.spec) {
        return Err(Error::Dimension(format!(
            "series grid {}x{}x{} does not match fit grid {}x{}x{}",
            series.spec.lat_count,
            series.spec.lon_count,
            series.spec.channels(),
            fit.spec.lat_count,
            fit.spec.lon_count,
            fit.spec.channels()
        )));
    }
    let points = series.day_len();
    let mut out = series.clone();
    let data = out.values.data_mut();
    for t in 0..series.days() {
        let clim = fit.climatology(series.date(t));
        for (v, c) in data[t * points..(t + 1) * points].iter_mut().zip(&clim) {
            *v -= c;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{default_variables, SourceTag, Variable, OLR};

    fn scalar_series(f: impl Fn(f64) -> f64, days: usize) -> GriddedSeries {
        let spec = GridSpec::regular(1, 1, vec![Variable::named(OLR)]).unwrap();
        let data = (0..days).map(|t| f(t as f64)).collect();
        GriddedSeries::new(
            spec,
            NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            Tensor::new(&[days, 1, 1, 1], data).unwrap(),
            SourceTag::Reanalysis,
        )
        .unwrap()
    }

    fn coeffs(fit: &HarmonicFit) -> Vec<f64> {
        (0..7).map(|i| fit.coefficient(i, 0, 0, 0)).collect()
    }

    #[test]
    fn constant_series() {
        let fit = fit_harmonics(&scalar_series(|_| 5.0, 400), 3).unwrap();
        let c = coeffs(&fit);
        assert!((c[0] - 5.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-10), "{c:?}");
    }

    #[test]
    fn second_harmonic_over_two_periods() {
        let s = scalar_series(|t| (2.0 * ANNUAL_OMEGA * t).cos(), 731);
        let c = coeffs(&fit_harmonics(&s, 3).unwrap());
        assert!((c[3] - 1.0).abs() < 1e-8);
        for (i, v) in c.iter().enumerate() {
            if i != 3 {
                assert!(v.abs() < 1e-8, "coefficient {i} = {v}");
            }
        }
    }

    #[test]
    fn mixed_harmonics() {
        let s = scalar_series(|t| 3.0 + (ANNUAL_OMEGA * t).cos() + 0.5 * (3.0 * ANNUAL_OMEGA * t).sin(), 1000);
        let c = coeffs(&fit_harmonics(&s, 3).unwrap());
        let want = [3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.5];
        for (g, w) in c.iter().zip(want) {
            assert!((g - w).abs() < 1e-9, "{c:?}");
        }
    }

    #[test]
    fn short_series_is_coverage_error() {
        let s = scalar_series(|_| 1.0, 365);
        assert!(matches!(fit_harmonics(&s, 3), Err(Error::Coverage { .. })));
    }

    #[test]
    fn removal_of_own_climatology_is_zero() {
        let s = scalar_series(|t| 2.0 - (ANNUAL_OMEGA * t).sin() + 0.1 * (2.0 * ANNUAL_OMEGA * t).cos(), 500);
        let fit = fit_harmonics(&s, 3).unwrap();
        let r = remove_cycles(&s, &fit).unwrap();
        assert!(r.values.max_abs() < 1e-10);
        let again = fit_harmonics(&r, 3).unwrap();
        assert!(coeffs(&again).iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn sst_is_untouched_and_spec_checked() {
        let spec = GridSpec::regular(2, 2, default_variables()).unwrap();
        let n = 400 * 2 * 2 * 4;
        let data = (0..n).map(|i| (i % 17) as f64).collect();
        let s = GriddedSeries::new(
            spec,
            NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            Tensor::new(&[400, 2, 2, 4], data).unwrap(),
            SourceTag::Reanalysis,
        )
        .unwrap();
        let fit = fit_harmonics(&s, 3).unwrap();
        let r = remove_cycles(&s, &fit).unwrap();
        for t in [0, 100, 399] {
            assert_eq!(r.values.at(&[t, 1, 0, 3]), s.values.at(&[t, 1, 0, 3]));
        }
        let other = scalar_series(|_| 1.0, 400);
        assert!(matches!(remove_cycles(&other, &fit), Err(Error::Dimension(_))));
    }

    #[test]
    fn entries_round_trip() {
        let s = scalar_series(|t| (ANNUAL_OMEGA * t).cos(), 400);
        let fit = fit_harmonics(&s, 3).unwrap();
        let back = HarmonicFit::from_entries(&fit.to_entries(), &fit.spec).unwrap();
        assert_eq!(back, fit);
    }
}
