mod common;

use common::{rng, tiny_model};
use dkstn::cli::inspect_text;
use dkstn::tensor::Tensor;
use dkstn::training::DkstnModel;
use dkstn::Error;

fn inspect_total(text: &str) -> usize {
    text.lines()
        .find_map(|l| l.strip_prefix("total_parameters = "))
        .expect("total line")
        .parse()
        .unwrap()
}

#[test]
fn reload_predicts_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.dkw");
    let model = tiny_model(3, 5, 4);
    model.save(&path).unwrap();
    let loaded = DkstnModel::load(&path).unwrap();
    let x = Tensor::uniform(&[3, 3, 4, 6, 4], 2.0, &mut rng(1));
    let a = model.predict_batch(&x).unwrap();
    let b = loaded.predict_batch(&x).unwrap();
    assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    assert_eq!(model.params.total_count(), loaded.params.total_count());
}

#[test]
fn corrupted_header_is_format_error_truncation_is_length_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.dkw");
    tiny_model(2, 3, 0).save(&path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 0xff;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(DkstnModel::load(&path), Err(Error::Format(_))));

    let good = dir.path().join("g.dkw");
    tiny_model(2, 3, 0).save(&good).unwrap();
    let bytes = std::fs::read(&good).unwrap();
    std::fs::write(&good, &bytes[..bytes.len() / 2]).unwrap();
    match DkstnModel::load(&good) {
        Err(Error::Length { expected, actual }) => {
            assert_eq!(actual as usize, bytes.len() / 2);
            assert!(expected > actual);
        }
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn closed_form_count_matches_inspect() {
    for (k, n) in [(1, 1), (3, 5), (7, 12)] {
        let model = tiny_model(k, n, 0);
        let expected = DkstnModel::expected_param_count(&model.grid, &model.srcm, &model.taam).unwrap();
        assert_eq!(inspect_total(&inspect_text(&model)), expected);
        assert_eq!(model.params.total_count(), expected);
    }
}

#[test]
fn extension_survives_reload() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.dkw");
    let mut model = tiny_model(3, 4, 2);
    let x = Tensor::uniform(&[2, 3, 4, 6, 4], 1.0, &mut rng(5));
    let before = model.predict_batch(&x).unwrap();
    model.extend(3).unwrap();
    model.save(&path).unwrap();
    let loaded = DkstnModel::load(&path).unwrap();
    let text = inspect_text(&loaded);
    assert!(text.contains("n_trained = 4"), "{text}");
    assert!(text.contains("n_extended = 7 (3 copied steps)"), "{text}");
    let after = loaded.predict_batch(&x).unwrap();
    assert_eq!(after.shape(), &[2, 7, 2]);
    for b in 0..2 {
        for j in 0..4 {
            for c in 0..2 {
                assert_eq!(before.at(&[b, j, c]).to_bits(), after.at(&[b, j, c]).to_bits());
            }
        }
    }
}

