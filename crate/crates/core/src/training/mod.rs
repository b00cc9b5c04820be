//! Loss, training loop and forecasting.

mod model;

pub use model::{DkstnModel, EpochLog};

use chrono::{Duration, NaiveDate};
use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dkpm::{anomalies, BnMode, RUNNING_MEAN_DAYS};
use crate::error::{Error, Result};
use crate::grid::{GriddedSeries, SampleSet};
use crate::rmm::RmmSeries;
use crate::tensor::{adam_step, AdamConfig, AdamState, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Weight of the RMM1 error.
    pub beta: f64,
    /// Weight of the RMM2 error.
    pub gamma: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            learning_rate: 1e-4,
            weight_decay: 1e-3,
            batch_size: 16,
            beta: 0.5,
            gamma: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size < 2 {
            return Err(Error::Parameter(format!(
                "training needs epochs >= 1 and batch_size >= 2, got {} and {}",
                self.epochs, self.batch_size
            )));
        }
        if !(self.beta > 0.0 && self.gamma > 0.0) {
            return Err(Error::Parameter(format!(
                "loss weights must be positive, got beta={} gamma={}",
                self.beta, self.gamma
            )));
        }
        if !(self.learning_rate >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::Parameter("learning rate and weight decay must be >= 0".into()));
        }
        Ok(())
    }
}

fn check_pair(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred != truth || pred.len() != 3 || pred[2] != 2 {
        return Err(Error::Dimension(format!(
            "loss needs matching [M, n, 2] tensors, got {pred:?} and {truth:?}"
        )));
    }
    Ok(())
}

/// `β·mean((ŷ₁ − y₁)²) + γ·mean((ŷ₂ − y₂)²)` over samples and leads.
pub fn loss_overall<'t>(pred: Var<'t>, truth: Var<'t>, beta: f64, gamma: f64) -> Result<Var<'t>> {
    check_pair(&pred.shape(), &truth.shape())?;
    let d = pred.sub(truth)?;
    let sq = d.mul(d)?;
    let c1 = sq.slice(2, 0, 1)?.mean().scale(beta);
    let c2 = sq.slice(2, 1, 1)?.mean().scale(gamma);
    c1.add(c2)
}

/// Value of [`loss_overall`] without a tape.
pub fn loss_value(pred: &Tensor, truth: &Tensor, beta: f64, gamma: f64) -> Result<f64> {
    check_pair(pred.shape(), truth.shape())?;
    let mut s = [0.0; 2];
    for (i, (a, b)) in pred.data().iter().zip(truth.data()).enumerate() {
        s[i % 2] += (a - b) * (a - b);
    }
    let count = (pred.len() / 2) as f64;
    Ok(beta * s[0] / count + gamma * s[1] / count)
}

/// Per-epoch losses plus the loss of the untrained model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub initial_train_loss: f64,
    pub initial_valid_loss: f64,
    pub history: Vec<EpochLog>,
    pub best_epoch: usize,
}

impl TrainReport {
    /// CSV `epoch,train_loss,valid_loss`; epoch 0 is the untrained model.
    pub fn write_log(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "train_loss", "valid_loss"])?;
        let first = EpochLog {
            epoch: 0,
            train_loss: self.initial_train_loss,
            valid_loss: self.initial_valid_loss,
        };
        for e in std::iter::once(&first).chain(&self.history) {
            w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.valid_loss.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Index batches of `batch_size`; a trailing single sample joins the
/// previous batch so that every batch has at least two samples.
fn batches(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        let tail = out.pop().unwrap();
        out.last_mut().unwrap().extend(tail);
    }
    out
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Mean inference loss over a set, evaluated in batches.
pub fn evaluate_loss(model: &DkstnModel, set: &SampleSet, cfg: &TrainConfig) -> Result<f64> {
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(cfg.batch_size.max(1) * 4) {
        let pred = model.predict_batch(&set.batch_inputs(chunk)?)?;
        let truth = set.batch_labels(chunk)?;
        total += loss_value(&pred, &truth, cfg.beta, cfg.gamma)? * chunk.len() as f64;
    }
    Ok(total / set.len() as f64)
}

/// Training-mode loss of the current parameters, without updates.
fn probe_train_loss(model: &DkstnModel, set: &SampleSet, cfg: &TrainConfig) -> Result<f64> {
    let order: Vec<usize> = (0..set.len()).collect();
    let mut bn = model.bn.clone();
    let mut total = 0.0;
    for batch in batches(&order, cfg.batch_size) {
        let tape = Tape::new();
        let bound = model.params.bind(&tape);
        let x = tape.constant(set.batch_inputs(&batch)?);
        let pred = model.forward(&bound, &mut bn, x, BnMode::Train)?.value();
        total += loss_value(&pred, &set.batch_labels(&batch)?, cfg.beta, cfg.gamma)? * batch.len() as f64;
    }
    Ok(total / set.len() as f64)
}

/// Trains `model` with Adam and leaves it at the epoch with the lowest
/// validation loss.
pub fn train(
    model: &mut DkstnModel,
    train_set: &SampleSet,
    valid_set: &SampleSet,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.len() < 2 {
        return Err(Error::Data(format!(
            "training split has {} samples, need at least 2",
            train_set.len()
        )));
    }
    if valid_set.is_empty() {
        return Err(Error::Data("validation split is empty".into()));
    }
    for set in [train_set, valid_set] {
        if set.k() != Some(model.k()) || set.horizon() != Some(model.horizon()) {
            return Err(Error::Dimension(format!(
                "samples have k={:?} n={:?}, model expects k={} n={}",
                set.k(),
                set.horizon(),
                model.k(),
                model.horizon()
            )));
        }
    }
    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_cfg, &model.params);
    let initial_train_loss = probe_train_loss(model, train_set, cfg)?;
    let initial_valid_loss = evaluate_loss(model, valid_set, cfg)?;
    info!("initial losses: train {initial_train_loss:.6} valid {initial_valid_loss:.6}");

    let mut best: Option<(f64, DkstnModel)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, epoch)));
        let mut total = 0.0;
        for (b, batch) in batches(&order, cfg.batch_size).into_iter().enumerate() {
            model.params.zero_grad();
            let tape = Tape::new();
            let bound = model.params.bind(&tape);
            let x = tape.constant(train_set.batch_inputs(&batch)?);
            let y = tape.constant(train_set.batch_labels(&batch)?);
            let mut bn = model.bn.clone();
            let pred = model.forward(&bound, &mut bn, x, BnMode::Train)?;
            let loss = loss_overall(pred, y, cfg.beta, cfg.gamma)?;
            let value = loss.value().item();
            if !value.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            let grads = tape.backward(loss)?;
            model.params.accumulate(&bound, &grads)?;
            adam_step(&mut model.params, &mut adam).map_err(|e| {
                Error::Training(format!("epoch {epoch}, batch {}: {e}", b + 1))
            })?;
            model.bn = bn;
            total += value * batch.len() as f64;
            debug!("epoch {epoch} batch {} loss {value:.6}", b + 1);
        }
        let train_loss = total / train_set.len() as f64;
        let valid_loss = evaluate_loss(model, valid_set, cfg)?;
        info!("epoch {epoch}: train {train_loss:.6} valid {valid_loss:.6}");
        history.push(EpochLog {
            epoch,
            train_loss,
            valid_loss,
        });
        if best.as_ref().is_none_or(|(v, _)| valid_loss < *v) {
            let mut snapshot = model.clone();
            snapshot.best_epoch = epoch;
            best = Some((valid_loss, snapshot));
        }
    }
    let (_, mut chosen) = best.expect("at least one epoch");
    chosen.history = history.clone();
    let best_epoch = chosen.best_epoch;
    *model = chosen;
    Ok(TrainReport {
        initial_train_loss,
        initial_valid_loss,
        history,
        best_epoch,
    })
}

/// Forecasts from every sample of a preprocessed set: `[M × n × 2]`.
pub fn predict_samples(model: &DkstnModel, set: &SampleSet) -> Result<Tensor> {
    if set.is_empty() {
        return Err(Error::Data("no samples to predict".into()));
    }
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut parts = Vec::new();
    for chunk in idx.chunks(64) {
        let y = model.predict_batch(&set.batch_inputs(chunk)?)?;
        for i in 0..chunk.len() {
            parts.push(y.index_outer(i));
        }
    }
    Tensor::stack(&parts)
}

/// Forecast for the `n` days after `anchor` from raw fields.
///
/// `history` must hold at least `120 + k` days ending on `anchor`; it is
/// preprocessed with the model's stored climatology.
pub fn predict(model: &DkstnModel, history: &GriddedSeries, anchor: NaiveDate) -> Result<RmmSeries> {
    let fit = model
        .harmonic
        .as_ref()
        .ok_or_else(|| Error::Config("model carries no climatology for raw-field forecasts".into()))?;
    let k = model.k();
    let need = RUNNING_MEAN_DAYS + k;
    let end = history.index_of(anchor).ok_or(Error::Coverage {
        what: format!("forecast anchored on {anchor}"),
        required: need,
        available: 0,
    })?;
    if end + 1 < need {
        return Err(Error::Coverage {
            what: format!("forecast anchored on {anchor}"),
            required: need,
            available: end + 1,
        });
    }
    let context = history.slice_days(end + 1 - need, need)?;
    let anom = anomalies(&context, fit, true)?;
    let s = anom.values.shape();
    let window = anom.values.clone().into_reshape(&[1, s[0], s[1], s[2], s[3]])?;
    let y = model.predict_batch(&window)?;
    let n = model.horizon();
    let dates = (1..=n as i64).map(|j| anchor + Duration::days(j)).collect();
    let r1 = (0..n).map(|j| y.at(&[0, j, 0])).collect();
    let r2 = (0..n).map(|j| y.at(&[0, j, 1])).collect();
    RmmSeries::new(dates, r1, r2)
}
