use crate::error::{Error, Result};
use crate::tensor::{Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Infer,
}

/// Running statistics of the input normalization layer. The learned scale
/// and shift live in the parameter store.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormState {
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

/// Normalizes `x` per trailing channel, then scales by `gamma` and shifts
/// by `beta`.
///
/// Train mode uses batch statistics over every leading position and
/// updates the running averages (unbiased variance); infer mode uses the
/// frozen running statistics.
pub fn batchnorm_forward<'t>(
    x: Var<'t>,
    gamma: Var<'t>,
    beta: Var<'t>,
    state: &mut BatchNormState,
    mode: BnMode,
) -> Result<Var<'t>> {
    let shape = x.shape();
    let c = state.channels();
    if shape.last() != Some(&c) {
        return Err(Error::Dimension(format!(
            "batchnorm over {c} channels got input {shape:?}"
        )));
    }
    match mode {
        BnMode::Train => {
            if shape.len() < 2 || shape[0] < 2 {
                return Err(Error::Batch(format!(
                    "training batchnorm needs at least 2 samples, got {}",
                    shape.first().copied().unwrap_or(0)
                )));
            }
            let count = (shape.iter().product::<usize>() / c) as f64;
            let (y, mean, var) = x.batchnorm(gamma, beta, state.eps)?;
            let m = state.momentum;
            for j in 0..c {
                state.running_mean[j] = (1.0 - m) * state.running_mean[j] + m * mean[j];
                let unbiased = var[j] * count / (count - 1.0).max(1.0);
                state.running_var[j] = (1.0 - m) * state.running_var[j] + m * unbiased;
            }
            Ok(y)
        }
        BnMode::Infer => {
            let tape = x.tape();
            let mean = tape.constant(Tensor::from_vec(state.running_mean.clone()));
            let inv: Vec<f64> = state
                .running_var
                .iter()
                .map(|v| 1.0 / (v + state.eps).sqrt())
                .collect();
            let inv = tape.constant(Tensor::from_vec(inv));
            x.sub(mean)?.mul(inv)?.mul(gamma)?.add(beta)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tape;
    use rand::{Rng, SeedableRng};

    fn random(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-3.0..5.0)).collect()).unwrap()
    }

    fn channel_moments(t: &Tensor, c: usize) -> Vec<(f64, f64)> {
        (0..c)
            .map(|j| {
                let v: Vec<f64> = t.data().iter().skip(j).step_by(c).copied().collect();
                let m = v.iter().sum::<f64>() / v.len() as f64;
                let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
                (m, var)
            })
            .collect()
    }

    #[test]
    fn standardizes_in_train_mode() {
        let tape = Tape::new();
        let x = tape.leaf(random(&[4, 3, 2, 2, 4], 1));
        let g = tape.leaf(Tensor::full(&[4], 1.0));
        let b = tape.leaf(Tensor::zeros(&[4]));
        let mut st = BatchNormState::new(4);
        let y = batchnorm_forward(x, g, b, &mut st, BnMode::Train).unwrap();
        for (m, v) in channel_moments(&y.value(), 4) {
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-4);
        }
        assert!(st.running_var.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn affine_parameters_apply() {
        let tape = Tape::new();
        let x = tape.leaf(random(&[8, 5, 2], 2));
        let g = tape.leaf(Tensor::full(&[2], 2.0));
        let b = tape.leaf(Tensor::full(&[2], 3.0));
        let mut st = BatchNormState::new(2);
        let y = batchnorm_forward(x, g, b, &mut st, BnMode::Train).unwrap();
        for (m, v) in channel_moments(&y.value(), 2) {
            assert!((m - 3.0).abs() < 1e-12);
            assert!((v.sqrt() - 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn single_sample_rejected_in_train_mode() {
        let tape = Tape::new();
        let x = tape.leaf(random(&[1, 5, 2], 3));
        let g = tape.leaf(Tensor::full(&[2], 1.0));
        let b = tape.leaf(Tensor::zeros(&[2]));
        let mut st = BatchNormState::new(2);
        assert!(matches!(
            batchnorm_forward(x, g, b, &mut st, BnMode::Train),
            Err(Error::Batch(_))
        ));
        assert!(batchnorm_forward(x, g, b, &mut st, BnMode::Infer).is_ok());
    }

    #[test]
    fn infer_mode_uses_frozen_stats() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![3.0, 5.0]).reshape(&[1, 2]).unwrap());
        let g = tape.leaf(Tensor::full(&[2], 1.0));
        let b = tape.leaf(Tensor::zeros(&[2]));
        let mut st = BatchNormState::new(2);
        st.running_mean = vec![1.0, 5.0];
        st.running_var = vec![4.0 - st.eps, 9.0];
        let before = st.clone();
        let y = batchnorm_forward(x, g, b, &mut st, BnMode::Infer).unwrap().value();
        assert!((y.data()[0] - 1.0).abs() < 1e-12);
        assert_eq!(y.data()[1], 0.0);
        assert_eq!(st, before);
    }

    #[test]
    fn running_stats_follow_momentum() {
        let tape = Tape::new();
        let data = random(&[6, 3], 4);
        let x = tape.leaf(data.clone());
        let g = tape.leaf(Tensor::full(&[3], 1.0));
        let b = tape.leaf(Tensor::zeros(&[3]));
        let mut st = BatchNormState::new(3);
        batchnorm_forward(x, g, b, &mut st, BnMode::Train).unwrap();
        for (j, (m, v)) in channel_moments(&data, 3).into_iter().enumerate() {
            assert!((st.running_mean[j] - 0.1 * m).abs() < 1e-12);
            assert!((st.running_var[j] - (0.9 + 0.1 * v * 6.0 / 5.0)).abs() < 1e-12);
        }
    }
}
