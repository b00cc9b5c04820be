//! Lengthening a trained 35-day decoder to 47 days by copying its last
//! step. The first 35 leads stay bit-identical.

use dkstn::grid::GridSpec;
use dkstn::srcm::SrcmConfig;
use dkstn::taam::TaamConfig;
use dkstn::tensor::Tensor;
use dkstn::training::DkstnModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dkstn::Result<()> {
    let grid = GridSpec::desk();
    let srcm = SrcmConfig {
        layers: 3,
        channels: 4,
        projection_dim: 16,
        ..SrcmConfig::default()
    };
    let taam = TaamConfig {
        k: 7,
        n: 35,
        hidden: 16,
        tied_decoder: false,
    };
    let mut model = DkstnModel::new(&grid, srcm, taam, 9)?;
    let x = Tensor::uniform(&[3, 7, grid.lat_count, grid.lon_count, grid.channels()], 1.0, &mut ChaCha8Rng::seed_from_u64(1));
    let before = model.predict_batch(&x)?;

    model.extend(12)?;
    let after = model.predict_batch(&x)?;
    println!("leads: {} -> {}", before.shape()[1], after.shape()[1]);

    let identical = (0..3).all(|m| {
        (0..35).all(|j| (0..2).all(|c| before.at(&[m, j, c]).to_bits() == after.at(&[m, j, c]).to_bits()))
    });
    println!("first 35 leads bit-identical: {identical}");
    let copied = model.params.get("dec.step47.weight").cloned();
    let source = model.params.get("dec.step35.weight").cloned();
    println!("step 47 weights equal step 35: {}", copied == source);
    Ok(())
}
