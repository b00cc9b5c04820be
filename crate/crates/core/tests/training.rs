mod common;

use common::{tiny_model, tiny_samples};
use dkstn::grid::SampleSet;
use dkstn::training::{predict_samples, train, TrainConfig};

#[test]
fn overfits_a_handful_of_samples() {
    let set = tiny_samples(8, 3, 2, 11);
    let mut model = tiny_model(3, 2, 1);
    let cfg = TrainConfig {
        epochs: 200,
        learning_rate: 1e-2,
        weight_decay: 0.0,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &set, &set, &cfg).unwrap();
    let pred = predict_samples(&model, &set).unwrap();
    let mut worst: f64 = 0.0;
    for (i, s) in set.samples.iter().enumerate() {
        for c in 0..2 {
            worst = worst.max((pred.at(&[i, 0, c]) - s.label.at(&[0, c])).abs());
        }
    }
    assert!(worst < 0.05, "lead-1 error {worst}, history {:?}", report.history.last());
}

#[test]
fn zero_learning_rate_keeps_weights() {
    let set = tiny_samples(6, 2, 3, 2);
    let mut model = tiny_model(2, 3, 9);
    let before = model.params.clone();
    let cfg = TrainConfig {
        epochs: 3,
        learning_rate: 0.0,
        weight_decay: 0.0,
        batch_size: 3,
        ..TrainConfig::default()
    };
    train(&mut model, &set, &set, &cfg).unwrap();
    for (a, b) in before.params().iter().zip(model.params.params()) {
        assert_eq!(a.name, b.name);
        assert!(a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn same_seed_same_history() {
    let set = tiny_samples(10, 2, 2, 3);
    let valid = SampleSet::new(set.samples[..4].to_vec());
    let cfg = TrainConfig {
        epochs: 3,
        learning_rate: 1e-3,
        batch_size: 4,
        seed: 17,
        ..TrainConfig::default()
    };
    let run = || {
        let mut m = tiny_model(2, 2, 5);
        let r = train(&mut m, &set, &valid, &cfg).unwrap();
        (r.history, m.params)
    };
    let (h1, p1) = run();
    let (h2, p2) = run();
    assert_eq!(h1, h2);
    for (a, b) in p1.params().iter().zip(p2.params()) {
        assert!(a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
