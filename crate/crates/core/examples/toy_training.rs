//! Desk-scale end-to-end training run.
//!
//! `cargo run --release --example toy_training [epochs]`
//!
//! Synthesizes 1200 days of reanalysis and of an emulated model archive on
//! a 13 x 36 grid, trains a small network (C=8, D=32, k=7, n=10) and reports
//! held-out skill per lead.

use std::time::Instant;

use dkstn::grid::{synth_generate, GridSpec, SourceTag, SynthParams};
use dkstn::metrics::{cor, rmse, spearman};
use dkstn::pipeline::{prepare, DataConfig};
use dkstn::srcm::SrcmConfig;
use dkstn::taam::TaamConfig;
use dkstn::training::{predict_samples, train, DkstnModel, TrainConfig};

fn main() -> dkstn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(25);
    let spec = GridSpec::desk();
    let params = SynthParams::for_spec(&spec);
    let re = synth_generate(&spec, 1200, 1, &params)?.with_source(SourceTag::Reanalysis);
    let mo = synth_generate(&spec, 1200, 2, &params.model_emulation())?;

    let data = DataConfig {
        valid_days: 240,
        model_stride: 1,
        ..DataConfig::default()
    };
    let prep = prepare(&re, &[mo], 7, 10, true, &data)?;
    println!("{} training / {} validation samples", prep.train.len(), prep.valid.len());
    println!("EOF variance fraction: {:.3}", prep.basis.explained_variance(0) + prep.basis.explained_variance(1));

    let srcm = SrcmConfig {
        channels: 8,
        projection_dim: 32,
        ..SrcmConfig::default()
    };
    let taam = TaamConfig {
        k: 7,
        n: 10,
        hidden: 32,
        tied_decoder: false,
    };
    let mut model = DkstnModel::new(&spec, srcm, taam, 0)?;
    println!("{} parameters", model.params.total_count());

    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let report = train(&mut model, &prep.train, &prep.valid, &cfg)?;
    let elapsed = start.elapsed();

    let idx: Vec<usize> = (0..prep.valid.len()).collect();
    let truth = prep.valid.batch_labels(&idx)?;
    let pred = predict_samples(&model, &prep.valid)?;
    let c = cor(&pred, &truth)?;
    let r = rmse(&pred, &truth)?;
    let leads: Vec<f64> = (1..=c.len()).map(|j| j as f64).collect();

    println!("lead  cor     rmse");
    for j in 0..c.len() {
        println!("{:>4}  {:.4}  {:.4}", j + 1, c[j], r[j]);
    }
    let last = report.history.last().map_or(f64::NAN, |e| e.train_loss);
    println!(
        "train loss {:.4} -> {:.4} (ratio {:.3}), best epoch {}",
        report.initial_train_loss,
        last,
        last / report.initial_train_loss,
        report.best_epoch
    );
    println!("spearman(cor, lead) = {:.3}", spearman(&leads, &c)?);
    println!("training time {:.1} s", elapsed.as_secs_f64());
    Ok(())
}
