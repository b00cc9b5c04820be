//! Residual convolution stack on a batch of daily frames.

use dkstn::srcm::{srcm_forward_batch, SrcmConfig, SrcmWeights};
use dkstn::tensor::{ParamStore, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dkstn::Result<()> {
    let (lat, lon, vars) = (13, 144, 4);
    let cfg = SrcmConfig::default();
    let (l, w) = cfg.map_size(lat, lon)?;
    println!(
        "{lat}x{lon} input -> {l}x{w}x{} map -> {} flattened -> {} features",
        cfg.channels,
        cfg.flat_dim(lat, lon)?,
        cfg.feature_dim(lat, lon)?
    );

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    cfg.init_params(&mut store, vars, lat, lon, &mut rng)?;
    println!("{} parameters", store.total_count());

    let tape = Tape::new();
    let bound = store.bind(&tape);
    let weights = SrcmWeights::from_bound(&cfg, &bound)?;
    let x = tape.constant(Tensor::uniform(&[2, 3, lat, lon, vars], 1.0, &mut rng));
    let z = srcm_forward_batch(x, &cfg, &weights)?;
    println!("batch [2, 3, {lat}, {lon}, {vars}] -> {:?}", z.shape());

    let flat = SrcmConfig {
        flatten_only: true,
        ..cfg
    };
    println!("without projection the encoder would see {} features", flat.feature_dim(lat, lon)?);
    Ok(())
}
