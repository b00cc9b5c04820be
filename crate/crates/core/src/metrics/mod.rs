//! Forecast verification for RMM predictions.
//!
//! All metrics take `[M × n × 2]` tensors (samples × leads × components)
//! and return one value per lead.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const COR_THRESHOLD: f64 = 0.5;
pub const RMSE_THRESHOLD: f64 = 1.4;

fn check(pred: &Tensor, truth: &Tensor) -> Result<(usize, usize)> {
    let s = truth.shape();
    if pred.shape() != s {
        return Err(Error::Dimension(format!(
            "prediction {:?} and truth {s:?} differ",
            pred.shape()
        )));
    }
    if s.len() != 3 || s[2] != 2 || s[0] == 0 {
        return Err(Error::Dimension(format!(
            "metrics expect [M, n, 2] with M >= 1, got {s:?}"
        )));
    }
    Ok((s[0], s[1]))
}

fn pair(t: &Tensor, i: usize, j: usize, n: usize) -> (f64, f64) {
    let o = (i * n + j) * 2;
    (t.data()[o], t.data()[o + 1])
}

/// Uncentered bivariate correlation per lead.
pub fn cor(pred: &Tensor, truth: &Tensor) -> Result<Vec<f64>> {
    let (m, n) = check(pred, truth)?;
    (0..n)
        .map(|j| {
            let (mut num, mut pp, mut tt) = (0.0, 0.0, 0.0);
            for i in 0..m {
                let (p1, p2) = pair(pred, i, j, n);
                let (t1, t2) = pair(truth, i, j, n);
                num += p1 * t1 + p2 * t2;
                pp += p1 * p1 + p2 * p2;
                tt += t1 * t1 + t2 * t2;
            }
            // sqrt(x·x) rounds back to x, so identical inputs give exactly 1.
            let prod = pp * tt;
            let den = if prod.is_finite() && prod > 0.0 { prod.sqrt() } else { pp.sqrt() * tt.sqrt() };
            if den == 0.0 {
                return Err(Error::UndefinedMetric {
                    lead: j + 1,
                    reason: "zero-norm denominator in COR".into(),
                });
            }
            Ok(num / den)
        })
        .collect()
}

pub fn rmse(pred: &Tensor, truth: &Tensor) -> Result<Vec<f64>> {
    let (m, n) = check(pred, truth)?;
    Ok((0..n)
        .map(|j| {
            let sum: f64 = (0..m)
                .map(|i| {
                    let (p1, p2) = pair(pred, i, j, n);
                    let (t1, t2) = pair(truth, i, j, n);
                    (p1 - t1).powi(2) + (p2 - t2).powi(2)
                })
                .sum();
            (sum / m as f64).sqrt()
        })
        .collect())
}

/// Mean signed amplitude error; negative when forecasts are too weak.
pub fn amp_error(pred: &Tensor, truth: &Tensor) -> Result<Vec<f64>> {
    let (m, n) = check(pred, truth)?;
    Ok((0..n)
        .map(|j| {
            let sum: f64 = (0..m)
                .map(|i| {
                    let (p1, p2) = pair(pred, i, j, n);
                    let (t1, t2) = pair(truth, i, j, n);
                    p1.hypot(p2) - t1.hypot(t2)
                })
                .sum();
            sum / m as f64
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    /// `arctan(y2/y1)` differences, folded to half-planes.
    #[default]
    Literal,
    /// Full-quadrant angle difference wrapped to (−π, π].
    Wrapped,
}

fn wrap(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = a - tau * (a / tau).round();
    if r <= -std::f64::consts::PI {
        r + tau
    } else {
        r
    }
}

pub fn phase_error(pred: &Tensor, truth: &Tensor, mode: PhaseMode) -> Result<Vec<f64>> {
    let (m, n) = check(pred, truth)?;
    (0..n)
        .map(|j| {
            let mut sum = 0.0;
            for i in 0..m {
                let (p1, p2) = pair(pred, i, j, n);
                let (t1, t2) = pair(truth, i, j, n);
                sum += match mode {
                    PhaseMode::Literal => {
                        if p1 == 0.0 || t1 == 0.0 {
                            return Err(Error::UndefinedMetric {
                                lead: j + 1,
                                reason: format!("zero first component in sample {i}"),
                            });
                        }
                        (p2 / p1).atan() - (t2 / t1).atan()
                    }
                    PhaseMode::Wrapped => wrap(p2.atan2(p1) - t2.atan2(t1)),
                };
            }
            Ok(sum / m as f64)
        })
        .collect()
}

/// Skill horizons in days.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SkillDays {
    pub cor: usize,
    pub rmse: usize,
    pub combined: usize,
}

/// The last lead before COR drops below `cor_threshold` and the last lead
/// before RMSE exceeds `rmse_threshold`; censored at the horizon.
pub fn skill_days(cor: &[f64], rmse: &[f64], cor_threshold: f64, rmse_threshold: f64) -> SkillDays {
    let c = cor.iter().position(|&v| v < cor_threshold).unwrap_or(cor.len());
    let r = rmse.iter().position(|&v| v > rmse_threshold).unwrap_or(rmse.len());
    SkillDays {
        cor: c,
        rmse: r,
        combined: c.min(r),
    }
}

/// Spearman rank correlation, ties ranked by their average position.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Dimension(format!(
            "spearman needs two equal series of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut s = 0;
        while s < idx.len() {
            let mut e = s;
            while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[s]] {
                e += 1;
            }
            let avg = (s + e) as f64 / 2.0 + 1.0;
            for &k in &idx[s..=e] {
                r[k] = avg;
            }
            s = e + 1;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut num, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mean) * (b - mean);
        sx += (a - mean).powi(2);
        sy += (b - mean).powi(2);
    }
    if sx == 0.0 || sy == 0.0 {
        return Err(Error::UndefinedMetric {
            lead: 0,
            reason: "constant series has no rank correlation".into(),
        });
    }
    Ok(num / (sx * sy).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Season {
    Mam,
    Jja,
    Son,
    Djf,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Mam, Season::Jja, Season::Son, Season::Djf];

    pub fn of(date: NaiveDate) -> Self {
        match date.month() {
            3..=5 => Season::Mam,
            6..=8 => Season::Jja,
            9..=11 => Season::Son,
            _ => Season::Djf,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Season::Mam => "MAM",
            Season::Jja => "JJA",
            Season::Son => "SON",
            Season::Djf => "DJF",
        }
    }
}

/// Per-lead verification of one forecast set.
#[derive(Clone, Debug, PartialEq)]
pub struct SkillReport {
    pub samples: usize,
    pub cor: Vec<f64>,
    pub rmse: Vec<f64>,
    pub ae: Vec<f64>,
    pub pe: Vec<f64>,
    pub skill: SkillDays,
    pub phase_mode: PhaseMode,
    pub seasons: BTreeMap<Season, SkillReport>,
}

impl SkillReport {
    pub fn compute(pred: &Tensor, truth: &Tensor, mode: PhaseMode) -> Result<Self> {
        let (m, _) = check(pred, truth)?;
        let cor = cor(pred, truth)?;
        let rmse = rmse(pred, truth)?;
        let skill = skill_days(&cor, &rmse, COR_THRESHOLD, RMSE_THRESHOLD);
        Ok(Self {
            samples: m,
            ae: amp_error(pred, truth)?,
            pe: phase_error(pred, truth, mode)?,
            cor,
            rmse,
            skill,
            phase_mode: mode,
            seasons: BTreeMap::new(),
        })
    }

    pub fn leads(&self) -> usize {
        self.cor.len()
    }

    /// Rows `lead,cor,rmse,ae,pe`, a blank line, then `key,value` summary rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lead,cor,rmse,ae,pe\n");
        for j in 0..self.leads() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                j + 1,
                self.cor[j],
                self.rmse[j],
                self.ae[j],
                self.pe[j]
            );
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let _ = write!(
            s,
            "\nkey,value\nsamples,{}\nskill_days_cor,{}\nskill_days_rmse,{}\nskill_days_combined,{}\nmean_ae,{}\nmean_pe,{}\nphase_mode,{}\n",
            self.samples,
            self.skill.cor,
            self.skill.rmse,
            self.skill.combined,
            mean(&self.ae),
            mean(&self.pe),
            match self.phase_mode {
                PhaseMode::Literal => "literal",
                PhaseMode::Wrapped => "wrapped",
            }
        );
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Stratifies forecasts by the season of their anchor date. Empty seasons
/// are left out.
pub fn seasonal_split(
    pred: &Tensor,
    truth: &Tensor,
    anchors: &[NaiveDate],
    mode: PhaseMode,
) -> Result<BTreeMap<Season, SkillReport>> {
    let (m, n) = check(pred, truth)?;
    if anchors.len() != m {
        return Err(Error::Dimension(format!(
            "{} anchors for {m} forecasts",
            anchors.len()
        )));
    }
    let mut out = BTreeMap::new();
    for season in Season::ALL {
        let idx: Vec<usize> = (0..m).filter(|&i| Season::of(anchors[i]) == season).collect();
        if idx.is_empty() {
            continue;
        }
        let take = |t: &Tensor| {
            let data = idx
                .iter()
                .flat_map(|&i| t.data()[i * n * 2..(i + 1) * n * 2].iter().copied())
                .collect();
            Tensor::new(&[idx.len(), n, 2], data)
        };
        out.insert(season, SkillReport::compute(&take(pred)?, &take(truth)?, mode)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> Tensor {
        Tensor::uniform(&[m, n, 2], 2.0, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn identity_and_negation() {
        let t = random(20, 5, 1);
        assert!(cor(&t, &t).unwrap().iter().all(|&c| (c - 1.0).abs() < 1e-15));
        assert!(rmse(&t, &t).unwrap().iter().all(|&r| r == 0.0));
        let neg = t.map(|v| -v);
        assert!(cor(&neg, &t).unwrap().iter().all(|&c| (c + 1.0).abs() < 1e-15));
        let zero = Tensor::zeros(&[20, 5, 2]);
        assert!(matches!(cor(&t, &zero), Err(Error::UndefinedMetric { lead: 1, .. })));
    }

    #[test]
    fn constant_offsets() {
        let t = random(8, 3, 2);
        let mut a = t.clone();
        let mut b = t.clone();
        for (i, v) in a.data_mut().iter_mut().enumerate() {
            if i % 2 == 0 {
                *v += 1.0;
            }
        }
        b.data_mut().iter_mut().for_each(|v| *v += 1.0);
        assert!(rmse(&a, &t).unwrap().iter().all(|&r| (r - 1.0).abs() < 1e-12));
        assert!(rmse(&b, &t).unwrap().iter().all(|&r| (r - 2f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn amplitude_doubling() {
        let angles = [0.3, 1.9, -2.5, 4.0];
        let data: Vec<f64> = angles.iter().flat_map(|a: &f64| [a.cos(), a.sin()]).collect();
        let t = Tensor::new(&[4, 1, 2], data).unwrap();
        let ae = amp_error(&t.map(|v| 2.0 * v), &t).unwrap();
        assert!((ae[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_phase() {
        let a: f64 = 0.4;
        let b = a + std::f64::consts::PI / 8.0;
        let t = Tensor::new(&[1, 1, 2], vec![a.cos(), a.sin()]).unwrap();
        let p = Tensor::new(&[1, 1, 2], vec![b.cos(), b.sin()]).unwrap();
        let w = phase_error(&p, &t, PhaseMode::Wrapped).unwrap()[0];
        assert!((w - std::f64::consts::PI / 8.0).abs() < 1e-12);
        let l = phase_error(&p, &t, PhaseMode::Literal).unwrap()[0];
        assert!((l - std::f64::consts::PI / 8.0).abs() < 1e-12);
        assert_eq!(phase_error(&t, &t, PhaseMode::Literal).unwrap()[0], 0.0);
        let z = Tensor::new(&[1, 1, 2], vec![0.0, 1.0]).unwrap();
        assert!(phase_error(&z, &t, PhaseMode::Literal).is_err());
        assert!(phase_error(&z, &t, PhaseMode::Wrapped).is_ok());
    }

    #[test]
    fn wrapped_range() {
        assert_eq!(wrap(std::f64::consts::PI), std::f64::consts::PI);
        assert_eq!(wrap(-std::f64::consts::PI), std::f64::consts::PI);
        assert!((wrap(3.0 * std::f64::consts::PI / 2.0) + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn skill_crossings() {
        let c = [0.9, 0.8, 0.7, 0.6, 0.49, 0.3];
        let r = [0.5; 6];
        assert_eq!(skill_days(&c, &r, 0.5, 1.4), SkillDays { cor: 4, rmse: 6, combined: 4 });
        assert_eq!(skill_days(&[0.9; 35], &[1.0; 35], 0.5, 1.4).combined, 35);
        assert_eq!(skill_days(&[0.2], &[2.0], 0.5, 1.4).combined, 0);
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 5.0, 9.0, 20.0]).unwrap() - 1.0).abs() < 1e-15);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 2.0]).unwrap();
        assert!((r - 0.894_427_190_999_915_9).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn seasons() {
        let d = |m, day| NaiveDate::from_ymd_opt(2001, m, day).unwrap();
        assert_eq!(Season::of(d(12, 15)), Season::Djf);
        assert_eq!(Season::of(d(3, 1)), Season::Mam);
        let t = random(3, 2, 4);
        let p = random(3, 2, 5);
        let split = seasonal_split(&p, &t, &[d(7, 1), d(7, 10), d(7, 20)], PhaseMode::Wrapped).unwrap();
        assert_eq!(split.keys().copied().collect::<Vec<_>>(), vec![Season::Jja]);
        assert_eq!(split[&Season::Jja].cor, cor(&p, &t).unwrap());
    }

    #[test]
    fn csv_layout() {
        let t = random(4, 3, 6);
        let r = SkillReport::compute(&t, &t, PhaseMode::Wrapped).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "lead,cor,rmse,ae,pe");
        assert!(lines[1].starts_with("1,") && lines[1].split(',').nth(2) == Some("0"));
        assert!(csv.contains("skill_days_combined,3"));
    }
}
