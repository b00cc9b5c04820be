#![allow(dead_code)]

use chrono::NaiveDate;
use dkstn::dkpm::{batchnorm_forward, BatchNormState, BnMode};
use dkstn::gradcheck::check_gradients;
use dkstn::grid::{default_variables, GridSpec, GriddedSeries, SourceTag};
use dkstn::rmm::{compute_eof_basis, mjo_active, rmm_phase, EofBasis, RmmSeries};
use dkstn::srcm::{srcm_forward, SrcmConfig, SrcmWeights};
use dkstn::taam::{attend, decode, AttentionWeights, DecoderStack};
use dkstn::tensor::Tape;
use rand::seq::SliceRandom;
use dkstn::tensor::{lstm_cell, LstmWeights, ParamStore, Tensor, Var};
use dkstn::training::loss_overall;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, 1.0, rng)
}

/// `Σ y ⊙ r` for a fixed random `r`, so every output element gets a
/// distinct upstream gradient.
fn project<'t>(y: Var<'t>, seed: u64) -> dkstn::Result<Var<'t>> {
    let r = Tensor::uniform(&y.shape(), 1.0, &mut rng(seed ^ 0xABCD));
    y.mul(y.tape().constant(r))?.sum().reshape(&[])
}

pub const GRADIENT_OPS: [&str; 9] = [
    "matmul",
    "conv2d",
    "elementwise",
    "lstm_cell",
    "batchnorm",
    "attend",
    "srcm_forward",
    "decode",
    "loss_overall",
];

fn srcm_small() -> SrcmConfig {
    SrcmConfig {
        layers: 3,
        channels: 2,
        projection_dim: 4,
        ..SrcmConfig::default()
    }
}

/// Worst relative gradient error of one op on one seeded instance.
pub fn gradient_instance(op: &str, seed: u64) -> f64 {
    let mut r = rng(seed);
    let errs = match op {
        "matmul" => check_gradients(&[uniform(&[3, 4], &mut r), uniform(&[4, 5], &mut r)], STEP, |_, v| {
            project(v[0].matmul(v[1])?, seed)
        }),
        "conv2d" => check_gradients(
            &[uniform(&[2, 3, 7, 7], &mut r), uniform(&[4, 3, 3, 3], &mut r)],
            STEP,
            |_, v| project(v[0].conv2d(v[1], 2, 1)?, seed),
        ),
        "elementwise" => check_gradients(&[uniform(&[3, 4], &mut r), uniform(&[3, 4], &mut r)], STEP, |_, v| {
            let a = v[0].sigmoid().mul(v[1].tanh())?;
            let b = v[0].sub(v[1])?.relu().scale(0.7);
            let c = v[0].add(v[1])?.softmax_lastdim();
            project(a.add(b)?.add(c)?, seed)
        }),
        "lstm_cell" => {
            let (b, d, i) = (2, 3, 4);
            check_gradients(
                &[
                    uniform(&[b, i], &mut r),
                    uniform(&[b, d], &mut r),
                    uniform(&[b, d], &mut r),
                    uniform(&[d + i, 4 * d], &mut r),
                    uniform(&[4 * d], &mut r),
                ],
                STEP,
                |_, v| {
                    let w = LstmWeights { weight: v[3], bias: v[4] };
                    let (h, c) = lstm_cell(v[0], v[1], v[2], &w)?;
                    project(Var::concat(&[h, c], 1)?, seed)
                },
            )
        }
        "batchnorm" => check_gradients(
            &[uniform(&[4, 2, 3, 3, 2], &mut r), uniform(&[2], &mut r), uniform(&[2], &mut r)],
            STEP,
            |_, v| {
                let mut st = BatchNormState::new(2);
                project(batchnorm_forward(v[0], v[1], v[2], &mut st, BnMode::Train)?, seed)
            },
        ),
        "attend" => check_gradients(
            &[
                uniform(&[2, 4, 3], &mut r),
                uniform(&[3, 3], &mut r),
                uniform(&[3, 3], &mut r),
                uniform(&[3, 3], &mut r),
            ],
            STEP,
            |_, v| {
                let w = AttentionWeights { wq: v[1], wk: v[2], wv: v[3] };
                let (h_star, alpha) = attend(v[0], &w)?;
                project(h_star, seed)?.add(project(alpha, seed + 1)?)
            },
        ),
        "srcm_forward" => {
            let cfg = srcm_small();
            let mut store = ParamStore::new();
            cfg.init_params(&mut store, 4, 6, 8, &mut r).unwrap();
            // Nonzero biases so every bias gradient is exercised.
            let mut inputs = vec![uniform(&[4, 6, 8], &mut r)];
            let names: Vec<String> = store.params().iter().map(|p| p.name.clone()).collect();
            for p in store.params() {
                inputs.push(if p.name.ends_with("bias") {
                    Tensor::uniform(p.value.shape(), 0.3, &mut r)
                } else {
                    p.value.clone()
                });
            }
            check_gradients(&inputs, STEP, move |_, v| {
                let w = srcm_bound(&cfg, &names, &v[1..])?;
                project(srcm_forward(v[0], &cfg, &w)?, seed)
            })
        }
        "decode" => {
            let (b, k, d, n) = (2, 3, 3, 2);
            let mut inputs = vec![
                uniform(&[b, k, d], &mut r),
                uniform(&[b, d], &mut r),
                uniform(&[b, d], &mut r),
            ];
            for _ in 0..n {
                inputs.push(uniform(&[2 * d, 4 * d], &mut r));
                inputs.push(uniform(&[4 * d], &mut r));
            }
            inputs.push(uniform(&[d, 2], &mut r));
            inputs.push(uniform(&[2], &mut r));
            check_gradients(&inputs, STEP, |_, v| {
                let steps = (0..n)
                    .map(|i| LstmWeights { weight: v[3 + 2 * i], bias: v[4 + 2 * i] })
                    .collect();
                let stack = DecoderStack {
                    steps,
                    head_weight: v[3 + 2 * n],
                    head_bias: v[4 + 2 * n],
                };
                project(decode(v[0], v[1], v[2], &stack, n)?, seed)
            })
        }
        "loss_overall" => check_gradients(
            &[uniform(&[3, 4, 2], &mut r), uniform(&[3, 4, 2], &mut r)],
            STEP,
            |_, v| loss_overall(v[0], v[1], 0.3, 0.8),
        ),
        other => panic!("unknown op {other}"),
    };
    errs.unwrap_or_else(|e| panic!("{op} seed {seed}: {e}"))
        .into_iter()
        .fold(0.0, f64::max)
}

fn srcm_bound<'t>(cfg: &SrcmConfig, names: &[String], vars: &[Var<'t>]) -> dkstn::Result<SrcmWeights<'t>> {
    let get = |n: &str| vars[names.iter().position(|x| x == n).expect("parameter present")];
    Ok(SrcmWeights {
        conv1: (get("srcm.conv1.weight"), get("srcm.conv1.bias")),
        residual: (2..=cfg.layers)
            .map(|i| (get(&format!("srcm.res{i}.weight")), get(&format!("srcm.res{i}.bias"))))
            .collect(),
        projection: Some((get("srcm.proj.weight"), get("srcm.proj.bias"))),
    })
}

/// Worst error per op over `instances` seeds.
pub fn gradient_suite(instances: u64) -> Vec<(&'static str, f64)> {
    GRADIENT_OPS
        .iter()
        .map(|&op| (op, (0..instances).map(|s| gradient_instance(op, s)).fold(0.0, f64::max)))
        .collect()
}

/// Two planted modes with quadrature time series on a 13 x 36 grid.
///
/// Mode 1 is `cos(2πj/w + φ_f)` and mode 2 `sin(2πj/w + φ_f)` in each of
/// OLR, U200, U850, with amplitudes 1.0 and 0.75, so the pair describes an
/// eastward-moving wave of period `period` days. Independent noise at every
/// cell has variance `signal variance / snr`. Returns the series and the
/// unit-norm planted patterns.
pub fn planted_series(days: usize, snr: f64, period: f64, seed: u64) -> (GriddedSeries, [Vec<f64>; 2]) {
    let spec = GridSpec::regular(13, 36, default_variables()).unwrap();
    let (l, w, c) = (spec.lat_count, spec.lon_count, spec.channels());
    let phase = [0.0, 2.2, -1.1];
    let amp = [1.0, 0.75];
    let tau = std::f64::consts::TAU;
    let mut p1 = vec![0.0; 3 * w];
    let mut p2 = vec![0.0; 3 * w];
    for f in 0..3 {
        for j in 0..w {
            let a = tau * j as f64 / w as f64 + phase[f];
            p1[f * w + j] = a.cos();
            p2[f * w + j] = a.sin();
        }
    }
    let signal_var = (amp[0] * amp[0] + amp[1] * amp[1]) / 4.0;
    let noise = Normal::new(0.0, (signal_var / snr).sqrt()).unwrap();
    let mut r = rng(seed);
    let mut data = vec![0.0; days * l * w * c];
    for t in 0..days {
        let th = tau * t as f64 / period;
        let (a1, a2) = (amp[0] * th.cos(), amp[1] * th.sin());
        for i in 0..l {
            for j in 0..w {
                for f in 0..c {
                    let idx = ((t * l + i) * w + j) * c + f;
                    data[idx] = if f < 3 {
                        a1 * p1[f * w + j] + a2 * p2[f * w + j] + noise.sample(&mut r)
                    } else {
                        noise.sample(&mut r)
                    };
                }
            }
        }
    }
    let norm = |v: &mut Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    };
    norm(&mut p1);
    norm(&mut p2);
    let series = GriddedSeries::new(
        spec,
        NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
        Tensor::new(&[days, l, w, c], data).unwrap(),
        SourceTag::Synthetic,
    )
    .unwrap();
    (series, [p1, p2])
}

/// Angle in degrees between two directions, ignoring sign.
pub fn axis_angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot.abs() / (na * nb)).min(1.0).acos().to_degrees()
}

/// Share of consecutive active-day pairs whose phase stays or advances by
/// one (mod 8).
pub fn monotone_phase_fraction(rmm: &RmmSeries) -> f64 {
    let mut total = 0;
    let mut good = 0;
    for t in 0..rmm.len().saturating_sub(1) {
        let (a, b) = ((rmm.rmm1[t], rmm.rmm2[t]), (rmm.rmm1[t + 1], rmm.rmm2[t + 1]));
        if !(mjo_active(a.0, a.1) && mjo_active(b.0, b.1)) {
            continue;
        }
        total += 1;
        let step = (rmm_phase(b.0, b.1).unwrap() + 8 - rmm_phase(a.0, a.1).unwrap()) % 8;
        if step <= 1 {
            good += 1;
        }
    }
    good as f64 / total.max(1) as f64
}

/// `x[t] − mean(x[t−window..t])` by direct summation from day `window` on;
/// SST is copied.
pub fn brute_running_mean(series: &GriddedSeries, window: usize) -> Vec<f64> {
    let per = series.day_len();
    let c = series.spec.channels();
    let sst = series.spec.channel("SST");
    let v = series.values.data();
    let mut out = Vec::with_capacity((series.days() - window) * per);
    for t in window..series.days() {
        for p in 0..per {
            if Some(p % c) == sst {
                out.push(v[t * per + p]);
                continue;
            }
            let mean = (1..=window).map(|i| v[(t - i) * per + p]).sum::<f64>() / window as f64;
            out.push(v[t * per + p] - mean);
        }
    }
    out
}

/// Planted patterns expressed in the basis' normalized state space.
fn normalized(p: &[f64], basis: &EofBasis) -> Vec<f64> {
    let w = basis.lon_count;
    p.iter().enumerate().map(|(i, v)| v / basis.norms[i / w]).collect()
}

/// Angles in degrees between recovered and planted EOFs.
pub fn recovery_angles(days: usize, snr: f64, seed: u64) -> [f64; 2] {
    let (series, planted) = planted_series(days, snr, 45.0, seed);
    let basis = compute_eof_basis(&series).unwrap();
    [0, 1].map(|k| axis_angle_deg(&basis.patterns[k], &normalized(&planted[k], &basis)))
}

struct Outcome {
    row_sum_err: f64,
    min_alpha: f64,
    perm_err: f64,
    uniform_err: f64,
}

fn permute_rows(t: &Tensor, perm: &[usize]) -> Tensor {
    let s = t.shape();
    let (b, k, d) = (s[0], s[1], s[2]);
    let mut out = Tensor::zeros(s);
    for bb in 0..b {
        for i in 0..k {
            for j in 0..d {
                out.set(&[bb, i, j], t.at(&[bb, perm[i], j]));
            }
        }
    }
    out
}

fn instance(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let (b, k, d) = (2, 7, 5);
    let h = Tensor::uniform(&[b, k, d], 2.0, &mut r);
    let ws: Vec<Tensor> = (0..3).map(|_| uniform(&[d, d], &mut r)).collect();
    let tape = Tape::new();
    let w = AttentionWeights {
        wq: tape.constant(ws[0].clone()),
        wk: tape.constant(ws[1].clone()),
        wv: tape.constant(ws[2].clone()),
    };
    let run = |x: &Tensor| {
        let (hs, a) = attend(tape.constant(x.clone()), &w).unwrap();
        (hs.value(), a.value())
    };

    let (hs, alpha) = run(&h);
    let mut row_sum_err: f64 = 0.0;
    let mut min_alpha = f64::INFINITY;
    for bb in 0..b {
        for i in 0..k {
            let row: Vec<f64> = (0..k).map(|j| alpha.at(&[bb, i, j])).collect();
            row_sum_err = row_sum_err.max((row.iter().sum::<f64>() - 1.0).abs());
            min_alpha = row.iter().copied().fold(min_alpha, f64::min);
        }
    }

    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(&mut r);
    let (hs_p, alpha_p) = run(&permute_rows(&h, &perm));
    let mut perm_err: f64 = 0.0;
    for bb in 0..b {
        for i in 0..k {
            for j in 0..d {
                perm_err = perm_err.max((hs_p.at(&[bb, i, j]) - hs.at(&[bb, perm[i], j])).abs());
            }
            for j in 0..k {
                perm_err = perm_err.max((alpha_p.at(&[bb, i, j]) - alpha.at(&[bb, perm[i], perm[j]])).abs());
            }
        }
    }

    let row = uniform(&[d], &mut r);
    let constant = Tensor::new(&[b, k, d], (0..b * k).flat_map(|_| row.data().to_vec()).collect()).unwrap();
    let (_, alpha_c) = run(&constant);
    let uniform_err = alpha_c
        .data()
        .iter()
        .map(|a| (a - 1.0 / k as f64).abs())
        .fold(0.0, f64::max);

    Outcome {
        row_sum_err,
        min_alpha,
        perm_err,
        uniform_err,
    }
}

/// Worst row-sum error, smallest weight, worst permutation error and worst
/// deviation from uniform weights over seeded instances.
pub fn attention_invariants(instances: u64) -> (f64, f64, f64, f64) {
    (0..instances).map(instance).fold((0.0, f64::INFINITY, 0.0, 0.0), |acc, o| {
        (
            acc.0.max(o.row_sum_err),
            acc.1.min(o.min_alpha),
            acc.2.max(o.perm_err),
            acc.3.max(o.uniform_err),
        )
    })
}


pub fn random_series(lat: usize, lon: usize, days: usize, start: NaiveDate, seed: u64) -> GriddedSeries {
    let spec = GridSpec::regular(lat, lon, default_variables()).unwrap();
    let values = Tensor::uniform(&[days, lat, lon, spec.channels()], 5.0, &mut rng(seed));
    GriddedSeries::new(spec, start, values, SourceTag::Synthetic).unwrap()
}

pub fn random_labels(start: NaiveDate, days: usize, seed: u64) -> RmmSeries {
    let mut r = rng(seed);
    let t = Tensor::uniform(&[2, days], 2.0, &mut r);
    let dates = (0..days as i64).map(|d| start + chrono::Duration::days(d)).collect();
    RmmSeries::new(dates, t.data()[..days].to_vec(), t.data()[days..].to_vec()).unwrap()
}

/// Reanalysis and model sample counts of a merge drawn from `seed`:
/// random lengths, strides, window sizes and one to three model series.
pub fn merge_balance(seed: u64) -> (usize, usize) {
    use dkstn::grid::{merge_sources, MergeConfig};
    use rand::Rng;
    let mut r = rng(seed);
    let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    let k = r.gen_range(1..8);
    let n = r.gen_range(1..10);
    let re_days = r.gen_range(k + n..200);
    let re = random_series(2, 3, re_days, start, seed);
    let models: Vec<GriddedSeries> = (0..r.gen_range(1..4))
        .map(|i| {
            let offset = r.gen_range(0..60);
            let days = r.gen_range(k + n..160);
            random_series(2, 3, days, start + chrono::Duration::days(offset), seed * 10 + i)
        })
        .collect();
    let labels = random_labels(start, 400, seed);
    let cfg = MergeConfig {
        k,
        n,
        lead: 0,
        reanalysis_stride: r.gen_range(1..8),
        model_stride: r.gen_range(1..8),
        seed,
    };
    let set = merge_sources(&re, &models, &labels, &cfg).unwrap();
    (set.count(SourceTag::Reanalysis), set.count(SourceTag::Model))
}

/// Brute-force reference metrics on nested vectors `[M][n][2]`.
pub mod oracle {
    pub fn nested(t: &dkstn::tensor::Tensor) -> Vec<Vec<[f64; 2]>> {
        let s = t.shape();
        (0..s[0])
            .map(|i| (0..s[1]).map(|j| [t.at(&[i, j, 0]), t.at(&[i, j, 1])]).collect())
            .collect()
    }

    pub fn cor(p: &[Vec<[f64; 2]>], y: &[Vec<[f64; 2]>], j: usize) -> f64 {
        let mut num = 0.0;
        let mut pp = 0.0;
        let mut yy = 0.0;
        for i in 0..p.len() {
            for c in 0..2 {
                num += p[i][j][c] * y[i][j][c];
                pp += p[i][j][c] * p[i][j][c];
                yy += y[i][j][c] * y[i][j][c];
            }
        }
        num / (pp.sqrt() * yy.sqrt())
    }

    pub fn rmse(p: &[Vec<[f64; 2]>], y: &[Vec<[f64; 2]>], j: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..p.len() {
            s += (p[i][j][0] - y[i][j][0]).abs().powi(2) + (p[i][j][1] - y[i][j][1]).abs().powi(2);
        }
        (s / p.len() as f64).sqrt()
    }

    pub fn ae(p: &[Vec<[f64; 2]>], y: &[Vec<[f64; 2]>], j: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..p.len() {
            s += (p[i][j][0].powi(2) + p[i][j][1].powi(2)).sqrt() - (y[i][j][0].powi(2) + y[i][j][1].powi(2)).sqrt();
        }
        s / p.len() as f64
    }

    pub fn pe_literal(p: &[Vec<[f64; 2]>], y: &[Vec<[f64; 2]>], j: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..p.len() {
            s += (p[i][j][1] / p[i][j][0]).atan() - (y[i][j][1] / y[i][j][0]).atan();
        }
        s / p.len() as f64
    }

    pub fn pe_wrapped(p: &[Vec<[f64; 2]>], y: &[Vec<[f64; 2]>], j: usize) -> f64 {
        use std::f64::consts::PI;
        let mut s = 0.0;
        for i in 0..p.len() {
            let mut d = p[i][j][1].atan2(p[i][j][0]) - y[i][j][1].atan2(y[i][j][0]);
            while d > PI {
                d -= 2.0 * PI;
            }
            while d <= -PI {
                d += 2.0 * PI;
            }
            s += d;
        }
        s / p.len() as f64
    }

    /// Walks leads in order; the answer is the count of leading entries
    /// that still meet the threshold.
    pub fn skill(cor: &[f64], rmse: &[f64], ct: f64, rt: f64) -> (usize, usize, usize) {
        let mut c = 0;
        while c < cor.len() && cor[c] >= ct {
            c += 1;
        }
        let mut r = 0;
        while r < rmse.len() && rmse[r] <= rt {
            r += 1;
        }
        (c, r, if c < r { c } else { r })
    }
}

/// Largest deviation of every metric from its brute-force reference over
/// `instances` random cases, plus whether skill days matched exactly.
pub fn metric_oracle(instances: u64) -> (f64, bool) {
    use dkstn::metrics::{amp_error, cor, phase_error, rmse, skill_days, PhaseMode};
    use rand::Rng;
    let mut worst: f64 = 0.0;
    let mut skill_ok = true;
    for seed in 0..instances {
        let mut r = rng(1000 + seed);
        let m = r.gen_range(1..40);
        let n = r.gen_range(1..12);
        let p = Tensor::uniform(&[m, n, 2], 3.0, &mut r);
        let y = Tensor::uniform(&[m, n, 2], 3.0, &mut r);
        let (pn, yn) = (oracle::nested(&p), oracle::nested(&y));
        let c = cor(&p, &y).unwrap();
        let e = rmse(&p, &y).unwrap();
        let a = amp_error(&p, &y).unwrap();
        let pl = phase_error(&p, &y, PhaseMode::Literal).unwrap();
        let pw = phase_error(&p, &y, PhaseMode::Wrapped).unwrap();
        for j in 0..n {
            for (got, want) in [
                (c[j], oracle::cor(&pn, &yn, j)),
                (e[j], oracle::rmse(&pn, &yn, j)),
                (a[j], oracle::ae(&pn, &yn, j)),
                (pl[j], oracle::pe_literal(&pn, &yn, j)),
                (pw[j], oracle::pe_wrapped(&pn, &yn, j)),
            ] {
                worst = worst.max((got - want).abs());
            }
        }
        let ct = r.gen_range(0.0..1.0);
        let rt = r.gen_range(0.5..4.0);
        let s = skill_days(&c, &e, ct, rt);
        skill_ok &= (s.cor, s.rmse, s.combined) == oracle::skill(&c, &e, ct, rt);
    }
    (worst, skill_ok)
}

/// A small untrained model on a 4×6 grid.
pub fn tiny_model(k: usize, n: usize, seed: u64) -> dkstn::training::DkstnModel {
    use dkstn::srcm::SrcmConfig;
    use dkstn::taam::TaamConfig;
    let grid = GridSpec::regular(4, 6, default_variables()).unwrap();
    let srcm = SrcmConfig {
        layers: 2,
        channels: 3,
        first_kernel: 3,
        projection_dim: 8,
        ..SrcmConfig::default()
    };
    let taam = TaamConfig {
        k,
        n,
        hidden: 8,
        tied_decoder: false,
    };
    dkstn::training::DkstnModel::new(&grid, srcm, taam, seed).unwrap()
}

/// Random samples shaped for [`tiny_model`].
pub fn tiny_samples(count: usize, k: usize, n: usize, seed: u64) -> dkstn::grid::SampleSet {
    use dkstn::grid::{Sample, SampleSet};
    let mut r = rng(seed);
    let start = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
    SampleSet::new(
        (0..count)
            .map(|i| Sample {
                input: Tensor::uniform(&[k, 4, 6, 4], 1.0, &mut r),
                label: Tensor::uniform(&[n, 2], 1.0, &mut r),
                source: SourceTag::Reanalysis,
                anchor: start + chrono::Duration::days(i as i64),
            })
            .collect(),
    )
}

/// Largest |anomaly| of the non-SST channels for a wave-free, noise-free
/// synthetic series with the given drift multiplier, plus the steepest
/// channel drift in units per day.
pub fn preprocessing_residual(drift_scale: f64) -> (f64, f64) {
    use dkstn::dkpm::{anomalies, fit_harmonics, MAX_WAVE};
    use dkstn::grid::{synth_generate, SynthParams, SST};
    let spec = GridSpec::regular(13, 36, default_variables()).unwrap();
    let params = SynthParams {
        wave_scale: 0.0,
        noise_scale: 0.0,
        drift_scale,
        ..SynthParams::for_spec(&spec)
    };
    let raw = synth_generate(&spec, 800, 0, &params).unwrap();
    let fit = fit_harmonics(&raw, MAX_WAVE).unwrap();
    let anom = anomalies(&raw, &fit, true).unwrap();
    let c = spec.channels();
    let sst = spec.channel(SST).unwrap();
    let worst = anom
        .values
        .data()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % c != sst)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    let slope = params
        .channels
        .iter()
        .map(|ch| (ch.drift_per_day * drift_scale).abs())
        .fold(0.0, f64::max);
    (worst, slope)
}

/// Constructed COR/RMSE curves over `n` leads whose thresholds are met
/// through `cor_last` and `rmse_last` (1-based leads) and missed after.
pub fn threshold_curves(n: usize, cor_last: usize, rmse_last: usize) -> (Vec<f64>, Vec<f64>) {
    let cor = (1..=n)
        .map(|lead| if lead <= cor_last { 0.95 - 0.4 * lead as f64 / cor_last as f64 } else { 0.45 - 0.001 * lead as f64 })
        .collect();
    let rmse = (1..=n)
        .map(|lead| if lead <= rmse_last { 0.6 + 0.7 * lead as f64 / rmse_last as f64 } else { 1.45 + 0.01 * lead as f64 })
        .collect();
    (cor, rmse)
}
