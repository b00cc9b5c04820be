//! Encoder states, self-attention weights and a decoded forecast for one
//! random feature sequence.

use dkstn::taam::{attend, decode, encode, TaamConfig, TaamWeights};
use dkstn::tensor::{ParamStore, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dkstn::Result<()> {
    let cfg = TaamConfig {
        k: 7,
        n: 5,
        hidden: 16,
        tied_decoder: false,
    };
    let d_in = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = ParamStore::new();
    cfg.init_params(&mut store, d_in, &mut rng)?;
    // Sharpen the query/key projections so the weights are visibly uneven.
    for p in store.params_mut().iter_mut().filter(|p| p.name == "attn.wq" || p.name == "attn.wk") {
        p.value = p.value.map(|v| 8.0 * v);
    }

    let tape = Tape::new();
    let bound = store.bind(&tape);
    let w = TaamWeights::from_bound(&cfg, &bound)?;
    let z = tape.constant(Tensor::uniform(&[1, cfg.k, d_in], 3.0, &mut rng));

    let (h, h_k, c_k) = encode(z, &w.encoder)?;
    let (h_star, alpha) = attend(h, &w.attention)?;
    let alpha = alpha.value();
    println!("attention weights (row = query day, column = key day):");
    for i in 0..cfg.k {
        let row: Vec<String> = (0..cfg.k).map(|j| format!("{:.3}", alpha.at(&[0, i, j]))).collect();
        let sum: f64 = (0..cfg.k).map(|j| alpha.at(&[0, i, j])).sum();
        println!("  {}  sum {sum:.12}", row.join(" "));
    }

    let y = decode(h_star, h_k, c_k, &w.decoder, cfg.n)?.value();
    for j in 0..cfg.n {
        println!("lead {}: rmm1 {:+.4} rmm2 {:+.4}", j + 1, y.at(&[0, j, 0]), y.at(&[0, j, 1]));
    }
    Ok(())
}
