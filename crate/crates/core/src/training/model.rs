use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dkpm::{batchnorm_forward, BatchNormState, BnMode, HarmonicFit};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Variable};
use crate::rmm::EofBasis;
use crate::srcm::{srcm_forward_batch, SrcmConfig, SrcmWeights};
use crate::taam::{extend_horizon, taam_forward, TaamConfig, TaamWeights};
use crate::tensor::{
    read_checkpoint, write_checkpoint, BoundParams, ParamStore, Tape, Tensor, Var,
};

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

/// Trainable parameters, normalization statistics and the preprocessing
/// state needed to forecast from raw fields.
#[derive(Clone, Debug)]
pub struct DkstnModel {
    pub grid: GridSpec,
    pub srcm: SrcmConfig,
    pub taam: TaamConfig,
    pub params: ParamStore,
    pub bn: BatchNormState,
    /// Horizon the decoder was trained for; `taam.n` exceeds it after
    /// extension.
    pub n_trained: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
    pub harmonic: Option<HarmonicFit>,
    pub basis: Option<EofBasis>,
}

impl DkstnModel {
    pub fn new(grid: &GridSpec, srcm: SrcmConfig, taam: TaamConfig, seed: u64) -> Result<Self> {
        grid.validate()?;
        srcm.validate()?;
        taam.validate()?;
        let c = grid.channels();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        params.insert("bn.gamma", Tensor::full(&[c], 1.0))?;
        params.insert("bn.beta", Tensor::zeros(&[c]))?;
        srcm.init_params(&mut params, c, grid.lat_count, grid.lon_count, &mut rng)?;
        let d_in = srcm.feature_dim(grid.lat_count, grid.lon_count)?;
        taam.init_params(&mut params, d_in, &mut rng)?;
        Ok(Self {
            grid: grid.clone(),
            n_trained: taam.n,
            srcm,
            taam,
            params,
            bn: BatchNormState::new(c),
            seed,
            best_epoch: 0,
            history: Vec::new(),
            harmonic: None,
            basis: None,
        })
    }

    pub fn k(&self) -> usize {
        self.taam.k
    }

    pub fn horizon(&self) -> usize {
        self.taam.n
    }

    /// Closed-form parameter count for a configuration.
    pub fn expected_param_count(grid: &GridSpec, srcm: &SrcmConfig, taam: &TaamConfig) -> Result<usize> {
        let c = grid.channels();
        let d_in = srcm.feature_dim(grid.lat_count, grid.lon_count)?;
        let shapes = srcm
            .param_shapes(c, grid.lat_count, grid.lon_count)?
            .into_iter()
            .chain(taam.param_shapes(d_in)?);
        Ok(2 * c + shapes.map(|(_, s)| s.iter().product::<usize>()).sum::<usize>())
    }

    /// Forward pass on channel-last windows `[B × k × lat × lon × var]`,
    /// returning `[B × n × 2]`. Train mode updates the running statistics.
    pub fn forward<'t>(
        &self,
        bound: &BoundParams<'t>,
        bn: &mut BatchNormState,
        x: Var<'t>,
        mode: BnMode,
    ) -> Result<Var<'t>> {
        let s = x.shape();
        let want = [self.taam.k, self.grid.lat_count, self.grid.lon_count, self.grid.channels()];
        if s.len() != 5 || s[1..] != want {
            return Err(Error::Dimension(format!(
                "model input {s:?}, expected [B, {}, {}, {}, {}]",
                want[0], want[1], want[2], want[3]
            )));
        }
        let xn = batchnorm_forward(x, bound.get("bn.gamma")?, bound.get("bn.beta")?, bn, mode)?;
        let sw = SrcmWeights::from_bound(&self.srcm, bound)?;
        let tw = TaamWeights::from_bound(&self.taam, bound)?;
        let z = srcm_forward_batch(xn, &self.srcm, &sw)?;
        taam_forward(z, &self.taam, &tw)
    }

    /// Inference on a batch of preprocessed windows.
    pub fn predict_batch(&self, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let bound = self.params.bind(&tape);
        let mut bn = self.bn.clone();
        let xv = tape.constant(x.clone());
        let y = self.forward(&bound, &mut bn, xv, BnMode::Infer)?;
        Ok(y.value())
    }

    /// Adds `extra` decoder steps copied from the last trained step.
    pub fn extend(&mut self, extra: usize) -> Result<()> {
        self.taam = extend_horizon(&mut self.params, &self.taam, extra)?;
        Ok(())
    }

    pub fn to_entries(&self) -> Vec<(String, Tensor)> {
        let mut out: Vec<(String, Tensor)> = self
            .params
            .params()
            .iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .collect();
        out.push(("bn.running_mean".into(), Tensor::from_vec(self.bn.running_mean.clone())));
        out.push(("bn.running_var".into(), Tensor::from_vec(self.bn.running_var.clone())));
        let names = self
            .grid
            .variables
            .iter()
            .map(|v| v.name.as_str())
            .collect::<Vec<_>>()
            .join(",");
        out.push((
            "config.variables".into(),
            Tensor::from_vec(names.bytes().map(f64::from).collect()),
        ));
        let s = &self.srcm;
        let t = &self.taam;
        let scalars = [
            ("config.lat", self.grid.lat_count as f64),
            ("config.lon", self.grid.lon_count as f64),
            ("config.srcm.layers", s.layers as f64),
            ("config.srcm.channels", s.channels as f64),
            ("config.srcm.first_kernel", s.first_kernel as f64),
            ("config.srcm.residual_kernel", s.residual_kernel as f64),
            ("config.srcm.first_stride", s.first_stride as f64),
            ("config.srcm.projection_dim", s.projection_dim as f64),
            ("config.srcm.flatten_only", f64::from(u8::from(s.flatten_only))),
            ("config.taam.k", t.k as f64),
            ("config.taam.n", t.n as f64),
            ("config.taam.hidden", t.hidden as f64),
            ("config.taam.tied_decoder", f64::from(u8::from(t.tied_decoder))),
            ("config.n_trained", self.n_trained as f64),
            ("config.seed", self.seed as f64),
            ("config.best_epoch", self.best_epoch as f64),
            ("config.bn.momentum", self.bn.momentum),
            ("config.bn.eps", self.bn.eps),
        ];
        out.extend(scalars.iter().map(|(n, v)| (n.to_string(), Tensor::scalar(*v))));
        if !self.history.is_empty() {
            let col = |f: fn(&EpochLog) -> f64| Tensor::from_vec(self.history.iter().map(f).collect());
            out.push(("history.train_loss".into(), col(|e| e.train_loss)));
            out.push(("history.valid_loss".into(), col(|e| e.valid_loss)));
        }
        if let Some(h) = &self.harmonic {
            out.extend(h.to_entries());
        }
        if let Some(b) = &self.basis {
            out.extend(b.to_entries());
        }
        out
    }

    pub fn from_entries(entries: &[(String, Tensor)]) -> Result<Self> {
        let find = |name: &str| {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks entry {name}")))
        };
        let int = |name: &str| -> Result<usize> {
            let v = find(name)?.item();
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Format(format!("{name} = {v} is not a count")));
            }
            Ok(v as usize)
        };
        let flag = |name: &str| -> Result<bool> { Ok(int(name)? != 0) };
        let names: String = find("config.variables")?
            .data()
            .iter()
            .map(|&b| b as u8 as char)
            .collect();
        let variables = names.split(',').map(Variable::named).collect();
        let grid = GridSpec::regular(int("config.lat")?, int("config.lon")?, variables)?;
        let srcm = SrcmConfig {
            layers: int("config.srcm.layers")?,
            channels: int("config.srcm.channels")?,
            first_kernel: int("config.srcm.first_kernel")?,
            residual_kernel: int("config.srcm.residual_kernel")?,
            first_stride: int("config.srcm.first_stride")?,
            projection_dim: int("config.srcm.projection_dim")?,
            flatten_only: flag("config.srcm.flatten_only")?,
        };
        let taam = TaamConfig {
            k: int("config.taam.k")?,
            n: int("config.taam.n")?,
            hidden: int("config.taam.hidden")?,
            tied_decoder: flag("config.taam.tied_decoder")?,
        };
        let mut params = ParamStore::new();
        params.insert("bn.gamma", find("bn.gamma")?.clone())?;
        params.insert("bn.beta", find("bn.beta")?.clone())?;
        let d_in = srcm.feature_dim(grid.lat_count, grid.lon_count)?;
        let shapes = srcm
            .param_shapes(grid.channels(), grid.lat_count, grid.lon_count)?
            .into_iter()
            .chain(taam.param_shapes(d_in)?);
        for (name, shape) in shapes {
            let t = find(&name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Format(format!(
                    "{name} has shape {:?}, configuration implies {shape:?}",
                    t.shape()
                )));
            }
            params.insert(name, t.clone())?;
        }
        let bn = BatchNormState {
            running_mean: find("bn.running_mean")?.data().to_vec(),
            running_var: find("bn.running_var")?.data().to_vec(),
            momentum: find("config.bn.momentum")?.item(),
            eps: find("config.bn.eps")?.item(),
        };
        if bn.channels() != grid.channels() {
            return Err(Error::Format("batchnorm statistics do not match channels".into()));
        }
        let history = match (find("history.train_loss"), find("history.valid_loss")) {
            (Ok(t), Ok(v)) => t
                .data()
                .iter()
                .zip(v.data())
                .enumerate()
                .map(|(i, (&train_loss, &valid_loss))| EpochLog {
                    epoch: i + 1,
                    train_loss,
                    valid_loss,
                })
                .collect(),
            _ => Vec::new(),
        };
        let has = |name: &str| entries.iter().any(|(n, _)| n == name);
        let harmonic = if has("harmonic.coeffs") {
            Some(HarmonicFit::from_entries(entries, &grid)?)
        } else {
            None
        };
        let basis = if has("eof.patterns") {
            Some(EofBasis::from_entries(entries)?)
        } else {
            None
        };
        Ok(Self {
            grid,
            srcm,
            taam,
            params,
            bn,
            n_trained: int("config.n_trained")?,
            seed: int("config.seed")? as u64,
            best_epoch: int("config.best_epoch")?,
            history,
            harmonic,
            basis,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_checkpoint(path, &self.to_entries())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_entries(&read_checkpoint(path)?)
    }
}
