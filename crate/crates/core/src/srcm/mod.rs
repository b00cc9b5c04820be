//! Spatial residual convolution stack.
//!
//! Each daily frame `[var × lat × lon]` passes through a strided stem
//! convolution, `layers − 1` residual blocks `relu(z + conv(z))`, a flatten
//! to `Ĉ = L·W·C`, and an optional learned projection to `D_in`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{BoundParams, ParamStore, Var};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrcmConfig {
    pub layers: usize,
    pub channels: usize,
    pub first_kernel: usize,
    pub residual_kernel: usize,
    pub first_stride: usize,
    pub projection_dim: usize,
    /// Feed the raw flattened map onward, skipping the projection.
    pub flatten_only: bool,
}

impl Default for SrcmConfig {
    fn default() -> Self {
        Self {
            layers: 7,
            channels: 16,
            first_kernel: 7,
            residual_kernel: 3,
            first_stride: 2,
            projection_dim: 256,
            flatten_only: false,
        }
    }
}

impl SrcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 {
            return Err(Error::Parameter(format!(
                "srcm needs at least 2 layers, got {}",
                self.layers
            )));
        }
        if self.first_kernel.is_multiple_of(2) || self.residual_kernel.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "srcm kernels must be odd, got {} and {}",
                self.first_kernel, self.residual_kernel
            )));
        }
        if self.channels == 0 || self.first_stride == 0 || self.projection_dim == 0 {
            return Err(Error::Parameter(
                "srcm channels, stride and projection_dim must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Spatial extent `(L, W)` after the stem convolution.
    pub fn map_size(&self, lat: usize, lon: usize) -> Result<(usize, usize)> {
        let pad = self.first_kernel / 2;
        let out = |n: usize| {
            (n + 2 * pad)
                .checked_sub(self.first_kernel)
                .map(|v| v / self.first_stride + 1)
        };
        match (out(lat), out(lon)) {
            (Some(l), Some(w)) => Ok((l, w)),
            _ => Err(Error::Dimension(format!(
                "{lat}x{lon} grid is too small for a {k}x{k} stem convolution",
                k = self.first_kernel
            ))),
        }
    }

    /// `Ĉ = L·W·C`.
    pub fn flat_dim(&self, lat: usize, lon: usize) -> Result<usize> {
        let (l, w) = self.map_size(lat, lon)?;
        Ok(l * w * self.channels)
    }

    /// Length of the per-day feature vector handed to the encoder.
    pub fn feature_dim(&self, lat: usize, lon: usize) -> Result<usize> {
        if self.flatten_only {
            self.flat_dim(lat, lon)
        } else {
            Ok(self.projection_dim)
        }
    }

    /// Parameter names and shapes, in registration order.
    pub fn param_shapes(
        &self,
        in_channels: usize,
        lat: usize,
        lon: usize,
    ) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        let (c, k1, kr) = (self.channels, self.first_kernel, self.residual_kernel);
        let mut out = vec![
            ("srcm.conv1.weight".to_string(), vec![c, in_channels, k1, k1]),
            ("srcm.conv1.bias".to_string(), vec![c, 1, 1]),
        ];
        for i in 2..=self.layers {
            out.push((format!("srcm.res{i}.weight"), vec![c, c, kr, kr]));
            out.push((format!("srcm.res{i}.bias"), vec![c, 1, 1]));
        }
        if !self.flatten_only {
            let flat = self.flat_dim(lat, lon)?;
            out.push(("srcm.proj.weight".to_string(), vec![flat, self.projection_dim]));
            out.push(("srcm.proj.bias".to_string(), vec![self.projection_dim]));
        }
        Ok(out)
    }

    /// Registers freshly initialized weights; biases start at zero.
    pub fn init_params<R: Rng + ?Sized>(
        &self,
        store: &mut ParamStore,
        in_channels: usize,
        lat: usize,
        lon: usize,
        rng: &mut R,
    ) -> Result<()> {
        for (name, shape) in self.param_shapes(in_channels, lat, lon)? {
            if name.ends_with(".bias") {
                store.insert(name, crate::tensor::Tensor::zeros(&shape))?;
            } else {
                let fan_in = if shape.len() == 4 {
                    shape[1] * shape[2] * shape[3]
                } else {
                    shape[0]
                };
                store.insert_uniform(name, &shape, fan_in, rng)?;
            }
        }
        Ok(())
    }
}

/// SRCM weights bound to one tape.
#[derive(Clone)]
pub struct SrcmWeights<'t> {
    pub conv1: (Var<'t>, Var<'t>),
    pub residual: Vec<(Var<'t>, Var<'t>)>,
    pub projection: Option<(Var<'t>, Var<'t>)>,
}

impl<'t> SrcmWeights<'t> {
    pub fn from_bound(cfg: &SrcmConfig, p: &BoundParams<'t>) -> Result<Self> {
        let conv1 = (p.get("srcm.conv1.weight")?, p.get("srcm.conv1.bias")?);
        let residual = (2..=cfg.layers)
            .map(|i| {
                Ok((
                    p.get(&format!("srcm.res{i}.weight"))?,
                    p.get(&format!("srcm.res{i}.bias"))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let projection = if cfg.flatten_only {
            None
        } else {
            Some((p.get("srcm.proj.weight")?, p.get("srcm.proj.bias")?))
        };
        Ok(Self {
            conv1,
            residual,
            projection,
        })
    }
}

/// Stack output for a batch of frames.
pub struct SrcmOutput<'t> {
    /// `[N × feature_dim]`
    pub features: Var<'t>,
    /// `[N × C × L × W]` map after the last residual block.
    pub spatial: Var<'t>,
}

/// Runs frames `[N × var × lat × lon]` through the stack.
pub fn srcm_frames<'t>(
    frames: Var<'t>,
    cfg: &SrcmConfig,
    w: &SrcmWeights<'t>,
) -> Result<SrcmOutput<'t>> {
    let s = frames.shape();
    if s.len() != 4 {
        return Err(Error::Dimension(format!(
            "srcm frames must be [N, var, lat, lon], got {s:?}"
        )));
    }
    cfg.map_size(s[2], s[3])?;
    let mut z = frames
        .conv2d(w.conv1.0, cfg.first_stride, cfg.first_kernel / 2)?
        .add(w.conv1.1)?;
    for &(k, b) in &w.residual {
        let branch = z.conv2d(k, 1, cfg.residual_kernel / 2)?.add(b)?;
        z = z.add(branch)?.relu();
    }
    let n = s[0];
    let zs = z.shape();
    let flat = z.reshape(&[n, zs[1] * zs[2] * zs[3]])?;
    let features = match w.projection {
        Some((pw, pb)) => flat.matmul(pw)?.add(pb)?,
        None => flat,
    };
    Ok(SrcmOutput {
        features,
        spatial: z,
    })
}

/// Single frame `[var × lat × lon]` to a feature vector.
pub fn srcm_forward<'t>(x: Var<'t>, cfg: &SrcmConfig, w: &SrcmWeights<'t>) -> Result<Var<'t>> {
    let s = x.shape();
    if s.len() != 3 {
        return Err(Error::Dimension(format!(
            "srcm frame must be [var, lat, lon], got {s:?}"
        )));
    }
    let out = srcm_frames(x.reshape(&[1, s[0], s[1], s[2]])?, cfg, w)?;
    let d = out.features.shape()[1];
    out.features.reshape(&[d])
}

/// Channel-last windows `[M × k × lat × lon × var]` to `[M × k × D_in]`.
pub fn srcm_forward_batch<'t>(
    x: Var<'t>,
    cfg: &SrcmConfig,
    w: &SrcmWeights<'t>,
) -> Result<Var<'t>> {
    let s = x.shape();
    if s.len() != 5 {
        return Err(Error::Dimension(format!(
            "srcm batch must be [M, k, lat, lon, var], got {s:?}"
        )));
    }
    let (m, k) = (s[0], s[1]);
    let frames = x
        .reshape(&[m * k, s[2], s[3], s[4]])?
        .permute(&[0, 3, 1, 2])?;
    let out = srcm_frames(frames, cfg, w)?;
    let d = out.features.shape()[1];
    out.features.reshape(&[m, k, d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Tape, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> SrcmConfig {
        SrcmConfig {
            layers: 3,
            channels: 2,
            projection_dim: 5,
            ..SrcmConfig::default()
        }
    }

    fn store(cfg: &SrcmConfig, seed: u64) -> ParamStore {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cfg.init_params(&mut s, 4, 6, 8, &mut rng).unwrap();
        s
    }

    #[test]
    fn geometry() {
        let cfg = SrcmConfig::default();
        assert_eq!(cfg.map_size(13, 144).unwrap(), (7, 72));
        assert_eq!(cfg.map_size(13, 36).unwrap(), (7, 18));
        let tiny = SrcmConfig {
            first_kernel: 9,
            first_stride: 1,
            ..cfg
        };
        assert_eq!(tiny.map_size(1, 1).unwrap(), (1, 1));
        assert!(SrcmConfig { layers: 1, ..SrcmConfig::default() }.validate().is_err());
        assert!(SrcmConfig { residual_kernel: 4, ..SrcmConfig::default() }.validate().is_err());
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let cfg = small_cfg();
        let mut s = store(&cfg, 1);
        for p in s.params_mut() {
            p.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let tape = Tape::new();
        let b = s.bind(&tape);
        let w = SrcmWeights::from_bound(&cfg, &b).unwrap();
        let x = tape.constant(Tensor::full(&[4, 6, 8], 3.0));
        let y = srcm_forward(x, &cfg, &w).unwrap();
        assert_eq!(y.shape(), vec![5]);
        assert!(y.value().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_matches_single_frames() {
        let cfg = small_cfg();
        let s = store(&cfg, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = Tensor::uniform(&[2, 3, 6, 8, 4], 1.0, &mut rng);
        let tape = Tape::new();
        let b = s.bind(&tape);
        let w = SrcmWeights::from_bound(&cfg, &b).unwrap();
        let batch = srcm_forward_batch(tape.constant(input.clone()), &cfg, &w)
            .unwrap()
            .value();
        assert_eq!(batch.shape(), &[2, 3, 5]);
        for m in 0..2 {
            for t in 0..3 {
                let frame = input.index_outer(m).index_outer(t).permute(&[2, 0, 1]).unwrap();
                let single = srcm_forward(tape.constant(frame), &cfg, &w).unwrap().value();
                for d in 0..5 {
                    assert!((single.data()[d] - batch.at(&[m, t, d])).abs() < 1e-12);
                }
            }
        }
    }
}
