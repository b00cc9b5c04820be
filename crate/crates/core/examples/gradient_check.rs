//! Finite-difference check of tape gradients for a few composite
//! functions.

use dkstn::gradcheck::check_gradients;
use dkstn::tensor::{lstm_cell, LstmWeights, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fmt(errs: &[f64]) -> String {
    errs.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(" ")
}

fn main() -> dkstn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut r = |shape: &[usize]| Tensor::uniform(shape, 1.0, &mut rng);

    let errs = check_gradients(&[r(&[3, 4]), r(&[4, 2])], 1e-5, |_, v| {
        Ok(v[0].matmul(v[1])?.tanh().sum())
    })?;
    println!("tanh(A·B):      {}", fmt(&errs));

    let errs = check_gradients(&[r(&[2, 3, 6, 6]), r(&[4, 3, 3, 3])], 1e-5, |_, v| {
        Ok(v[0].conv2d(v[1], 2, 1)?.relu().mean())
    })?;
    println!("relu(conv2d):   {}", fmt(&errs));

    let (b, d, i) = (2, 3, 4);
    let errs = check_gradients(
        &[r(&[b, i]), r(&[b, d]), r(&[b, d]), r(&[d + i, 4 * d]), r(&[4 * d])],
        1e-5,
        |_, v| {
            let w = LstmWeights { weight: v[3], bias: v[4] };
            let (h, c) = lstm_cell(v[0], v[1], v[2], &w)?;
            Ok(h.add(c)?.sum())
        },
    )?;
    println!("lstm cell:      {}", fmt(&errs));
    Ok(())
}
