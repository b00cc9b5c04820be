//! Save a model with its preprocessing state and reload it.

use dkstn::dkpm::{fit_harmonics, MAX_WAVE};
use dkstn::grid::{synth_generate, GridSpec, SynthParams};
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
        k: 5,
        n: 8,
        hidden: 16,
        tied_decoder: false,
    };
    let mut model = DkstnModel::new(&grid, srcm.clone(), taam.clone(), 3)?;
    let raw = synth_generate(&grid, 400, 1, &SynthParams::for_spec(&grid))?;
    model.harmonic = Some(fit_harmonics(&raw, MAX_WAVE)?);

    let path = std::env::temp_dir().join("dkstn_example.dkw");
    model.save(&path)?;
    let loaded = DkstnModel::load(&path)?;

    let x = Tensor::uniform(&[2, 5, grid.lat_count, grid.lon_count, grid.channels()], 1.0, &mut ChaCha8Rng::seed_from_u64(0));
    let same = model.predict_batch(&x)?.data() == loaded.predict_batch(&x)?.data();
    println!("{} bytes, {} parameters", std::fs::metadata(&path)?.len(), loaded.params.total_count());
    println!(
        "closed-form count {}",
        DkstnModel::expected_param_count(&grid, &srcm, &taam)?
    );
    println!("predictions identical after reload: {same}");
    println!("climatology restored: {}", loaded.harmonic.is_some());
    Ok(())
}
