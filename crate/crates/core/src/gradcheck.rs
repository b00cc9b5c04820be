//! Central finite-difference gradient checking.
//!
//! The numeric side only ever runs forward passes, so it is independent of
//! every backward rule it checks.

use crate::error::Result;
use crate::tensor::{Tape, Tensor, Var};

/// Magnitude below which errors are measured absolutely rather than
/// relatively.
pub const REL_FLOOR: f64 = 1e-3;

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn numeric_gradient(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, h: f64) -> Tensor {
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe);
        probe.data_mut()[i] = orig - h;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// `max_i |a_i − n_i| / max(|a_i|, |n_i|, REL_FLOOR)`.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// Compares tape gradients of a scalar function against central
/// differences, returning the worst relative error per input.
///
/// `build` receives one leaf per entry of `inputs` and must return a scalar.
pub fn check_gradients<F>(inputs: &[Tensor], h: f64, build: F) -> Result<Vec<f64>>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let leaves: Vec<Var<'_>> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&tape, &leaves)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor> = leaves.iter().map(|&v| grads.wrt(v)).collect();

    let eval = |vals: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let leaves: Vec<Var<'_>> = vals.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(build(&tape, &leaves)?.value().item())
    };

    let mut errors = Vec::with_capacity(inputs.len());
    for (k, a) in analytic.iter().enumerate() {
        let mut vals = inputs.to_vec();
        let mut failure = None;
        let numeric = numeric_gradient(
            |probe| {
                vals[k] = probe.clone();
                match eval(&vals) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            },
            &inputs[k],
            h,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        errors.push(max_relative_error(a, &numeric));
    }
    Ok(errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let x = Tensor::from_vec(vec![1.0, -2.0, 0.5]);
        let g = numeric_gradient(|t| t.data().iter().map(|v| v * v).sum(), &x, 1e-5);
        for (gi, xi) in g.data().iter().zip(x.data()) {
            assert!((gi - 2.0 * xi).abs() < 1e-9);
        }
    }
}
