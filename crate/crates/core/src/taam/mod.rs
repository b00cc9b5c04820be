//! Temporal attentive adaptation: LSTM encoder, scaled dot-product
//! self-attention and a chained decoder of `n` LSTM passes.
//!
//! All functions work on batches: sequences are `[B × k × D]`, states
//! `[B × D]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{lstm_cell, BoundParams, LstmWeights, ParamStore, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaamConfig {
    pub k: usize,
    pub n: usize,
    pub hidden: usize,
    /// One LSTM parameter set shared by every decoder step.
    pub tied_decoder: bool,
}

impl Default for TaamConfig {
    fn default() -> Self {
        Self {
            k: 7,
            n: 35,
            hidden: 256,
            tied_decoder: false,
        }
    }
}

pub const FORGET_BIAS: f64 = 1.0;

fn step_prefix(cfg: &TaamConfig, step: usize) -> String {
    if cfg.tied_decoder {
        "dec.shared".to_string()
    } else {
        format!("dec.step{step}")
    }
}

impl TaamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.hidden == 0 {
            return Err(Error::Parameter(format!(
                "taam needs k, n, hidden >= 1, got k={} n={} hidden={}",
                self.k, self.n, self.hidden
            )));
        }
        Ok(())
    }

    /// Parameter names and shapes, in registration order.
    pub fn param_shapes(&self, input_dim: usize) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        let d = self.hidden;
        let mut out = vec![
            ("enc.lstm.weight".to_string(), vec![d + input_dim, 4 * d]),
            ("enc.lstm.bias".to_string(), vec![4 * d]),
            ("attn.wq".to_string(), vec![d, d]),
            ("attn.wk".to_string(), vec![d, d]),
            ("attn.wv".to_string(), vec![d, d]),
        ];
        let steps = if self.tied_decoder { 1 } else { self.n };
        for i in 1..=steps {
            let p = step_prefix(self, i);
            out.push((format!("{p}.weight"), vec![2 * d, 4 * d]));
            out.push((format!("{p}.bias"), vec![4 * d]));
        }
        out.push(("head.weight".to_string(), vec![d, 2]));
        out.push(("head.bias".to_string(), vec![2]));
        Ok(out)
    }

    /// Uniform `±√(1/fan_in)` weights, zero biases with the forget gate at
    /// [`FORGET_BIAS`].
    pub fn init_params<R: Rng + ?Sized>(
        &self,
        store: &mut ParamStore,
        input_dim: usize,
        rng: &mut R,
    ) -> Result<()> {
        let d = self.hidden;
        for (name, shape) in self.param_shapes(input_dim)? {
            if name == "head.bias" {
                store.insert(name, Tensor::zeros(&shape))?;
            } else if name.ends_with(".bias") {
                let mut b = Tensor::zeros(&shape);
                b.data_mut()[..d].iter_mut().for_each(|v| *v = FORGET_BIAS);
                store.insert(name, b)?;
            } else {
                store.insert_uniform(name, &shape, shape[0], rng)?;
            }
        }
        Ok(())
    }
}

/// Attention projections bound to a tape.
#[derive(Clone, Copy)]
pub struct AttentionWeights<'t> {
    pub wq: Var<'t>,
    pub wk: Var<'t>,
    pub wv: Var<'t>,
}

/// Decoder steps and output head bound to a tape.
#[derive(Clone)]
pub struct DecoderStack<'t> {
    pub steps: Vec<LstmWeights<'t>>,
    pub head_weight: Var<'t>,
    pub head_bias: Var<'t>,
}

/// Every TAAM weight bound to a tape.
#[derive(Clone)]
pub struct TaamWeights<'t> {
    pub encoder: LstmWeights<'t>,
    pub attention: AttentionWeights<'t>,
    pub decoder: DecoderStack<'t>,
}

impl<'t> TaamWeights<'t> {
    pub fn from_bound(cfg: &TaamConfig, p: &BoundParams<'t>) -> Result<Self> {
        let lstm = |prefix: &str| -> Result<LstmWeights<'t>> {
            Ok(LstmWeights {
                weight: p.get(&format!("{prefix}.weight"))?,
                bias: p.get(&format!("{prefix}.bias"))?,
            })
        };
        let steps = (1..=cfg.n)
            .map(|i| lstm(&step_prefix(cfg, i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            encoder: lstm("enc.lstm")?,
            attention: AttentionWeights {
                wq: p.get("attn.wq")?,
                wk: p.get("attn.wk")?,
                wv: p.get("attn.wv")?,
            },
            decoder: DecoderStack {
                steps,
                head_weight: p.get("head.weight")?,
                head_bias: p.get("head.bias")?,
            },
        })
    }
}

/// One LSTM pass over `seq` `[B × k × in]` from the given states.
/// Returns the hidden sequence `[B × k × D]` and the final `(h, c)`.
pub fn lstm_pass<'t>(
    seq: Var<'t>,
    h0: Var<'t>,
    c0: Var<'t>,
    w: &LstmWeights<'t>,
) -> Result<(Var<'t>, Var<'t>, Var<'t>)> {
    let s = seq.shape();
    if s.len() != 3 {
        return Err(Error::Dimension(format!(
            "lstm pass expects [B, k, in], got {s:?}"
        )));
    }
    let (mut h, mut c) = (h0, c0);
    let mut hs = Vec::with_capacity(s[1]);
    for t in 0..s[1] {
        let (nh, nc) = lstm_cell(seq.select(1, t)?, h, c, w)?;
        h = nh;
        c = nc;
        hs.push(h);
    }
    Ok((Var::stack(&hs, 1)?, h, c))
}

/// Encodes `z` `[B × k × D_in]` from zero states into `(H, h_k, c_k)`.
pub fn encode<'t>(z: Var<'t>, w: &LstmWeights<'t>) -> Result<(Var<'t>, Var<'t>, Var<'t>)> {
    let s = z.shape();
    if s.len() != 3 {
        return Err(Error::Dimension(format!(
            "encoder input must be [B, k, D_in], got {s:?}"
        )));
    }
    let zero = z.tape().constant(Tensor::zeros(&[s[0], w.hidden()]));
    lstm_pass(z, zero, zero, w)
}

/// `α = softmax(Q·Kᵀ/√d)`, `H* = α·V` with `Q, K, V = H·W_{Q,K,V}`.
/// Returns `(H*, α)`.
pub fn attend<'t>(h: Var<'t>, w: &AttentionWeights<'t>) -> Result<(Var<'t>, Var<'t>)> {
    let s = h.shape();
    if s.len() != 3 {
        return Err(Error::Dimension(format!(
            "attention input must be [B, k, D], got {s:?}"
        )));
    }
    let (b, k, d) = (s[0], s[1], s[2]);
    let flat = h.reshape(&[b * k, d])?;
    let proj = |m: Var<'t>| -> Result<Var<'t>> { flat.matmul(m)?.reshape(&[b, k, d]) };
    let (q, key, v) = (proj(w.wq)?, proj(w.wk)?, proj(w.wv)?);
    let scores = q.bmm(key.transpose_last2()?)?.scale(1.0 / (d as f64).sqrt());
    let alpha = scores.softmax_lastdim();
    Ok((alpha.bmm(v)?, alpha))
}

/// Runs the first `n` decoder steps. Step `i` re-reads the sequence
/// produced by step `i − 1` (step 1 reads `H*`) starting from that step's
/// final states, and the head maps its final hidden state to lead `i`.
/// Returns `[B × n × 2]`.
pub fn decode<'t>(
    h_star: Var<'t>,
    h_k: Var<'t>,
    c_k: Var<'t>,
    stack: &DecoderStack<'t>,
    n: usize,
) -> Result<Var<'t>> {
    if stack.steps.len() < n {
        return Err(Error::Config(format!(
            "decoder has {} steps, {n} requested",
            stack.steps.len()
        )));
    }
    let (mut seq, mut h, mut c) = (h_star, h_k, c_k);
    let mut preds = Vec::with_capacity(n);
    for step in &stack.steps[..n] {
        let (ns, nh, nc) = lstm_pass(seq, h, c, step)?;
        seq = ns;
        h = nh;
        c = nc;
        preds.push(h.matmul(stack.head_weight)?.add(stack.head_bias)?);
    }
    Var::stack(&preds, 1)
}

/// Full TAAM forward: `[B × k × D_in]` features to `[B × n × 2]`.
pub fn taam_forward<'t>(z: Var<'t>, cfg: &TaamConfig, w: &TaamWeights<'t>) -> Result<Var<'t>> {
    let (h, h_k, c_k) = encode(z, &w.encoder)?;
    let (h_star, _) = attend(h, &w.attention)?;
    decode(h_star, h_k, c_k, &w.decoder, cfg.n)
}

/// Appends `extra` decoder steps copied bit-for-bit from step `n` and
/// returns the extended config. The head is unchanged.
pub fn extend_horizon(store: &mut ParamStore, cfg: &TaamConfig, extra: usize) -> Result<TaamConfig> {
    if extra < 1 {
        return Err(Error::Parameter("horizon extension needs extra >= 1".into()));
    }
    let out = TaamConfig {
        n: cfg.n + extra,
        ..cfg.clone()
    };
    if cfg.tied_decoder {
        return Ok(out);
    }
    let last = step_prefix(cfg, cfg.n);
    for suffix in ["weight", "bias"] {
        let src = store
            .get(&format!("{last}.{suffix}"))
            .ok_or_else(|| Error::Parameter(format!("missing {last}.{suffix}")))?
            .clone();
        for i in cfg.n + 1..=cfg.n + extra {
            store.insert(format!("dec.step{i}.{suffix}"), src.clone())?;
        }
    }
    Ok(out)
}
