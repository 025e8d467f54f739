mod common;

use ndarray::{concatenate, Axis};
use spml::losses::{self, LossConfig, LossKind, Targets};
use spml::model::{MlpModel, EPS};

#[test]
fn gradients_match_finite_differences_for_every_loss() {
    for kind in [LossKind::FullBce, LossKind::AssumeNegative, LossKind::EntropyMax] {
        for s in 0..20 {
            let inst = common::grad_instance(s, 8, 16, 5, 4);
            let err = common::max_tensor_rel_error(&inst.analytic(kind, 0.3), &inst.numeric(kind, 0.3, 1e-5));
            assert!(err < 1e-4, "{kind} seed {s}: {err:e}");
        }
    }
}

#[test]
fn duplicated_batch_keeps_gradients() {
    for kind in [LossKind::FullBce, LossKind::AssumeNegative, LossKind::EntropyMax] {
        let inst = common::grad_instance(77, 8, 16, 5, 2);
        let cfg = LossConfig::new(kind, 0.1).unwrap();
        let grads = |x: &ndarray::Array2<f64>, full: &ndarray::Array2<f64>, obs: &[usize]| {
            let pass = inst.model.forward(x.view()).unwrap();
            let t = match kind {
                LossKind::FullBce => Targets::Full(full.view()),
                _ => Targets::Single(obs),
            };
            let out = losses::compute(&cfg, &pass.probs, t).unwrap();
            inst.model.backward(x.view(), &pass, out.dloss_dlogits.view()).unwrap()
        };
        let g1 = grads(&inst.x, &inst.full, &inst.observed);
        // {a, b} -> {a, a, b, b}
        let rows = |m: &ndarray::Array2<f64>| {
            concatenate(Axis(0), &[m.row(0).insert_axis(Axis(0)), m.row(0).insert_axis(Axis(0)), m.row(1).insert_axis(Axis(0)), m.row(1).insert_axis(Axis(0))]).unwrap()
        };
        let obs2 = [inst.observed[0], inst.observed[0], inst.observed[1], inst.observed[1]];
        let g2 = grads(&rows(&inst.x), &rows(&inst.full), &obs2);
        for (a, b) in g1.to_vec().iter().zip(g2.to_vec()) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-3), "{kind}: {a} vs {b}");
        }
    }
}

#[test]
fn forward_backward_are_deterministic() {
    let inst = common::grad_instance(5, 8, 16, 5, 4);
    let a = inst.analytic(LossKind::EntropyMax, 0.1);
    let b = inst.analytic(LossKind::EntropyMax, 0.1);
    assert_eq!(a, b);
}

#[test]
fn checkpoint_file_roundtrip() {
    let m = MlpModel::init(8, 16, 5, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.ckpt");
    m.save(&p).unwrap();
    assert_eq!(MlpModel::load(&p).unwrap(), m);
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(&bytes[..8], b"SPMLCKPT");
    assert_eq!(bytes.len(), 8 + 4 + 24 + 8 * (8 * 16 + 16 + 16 * 5 + 5));
}

#[test]
fn extreme_inputs_stay_clamped() {
    let m = MlpModel::init(3, 4, 2, 1).unwrap();
    let x = ndarray::array![[1e6, -1e6, 1e6], [-1e6, 1e6, -1e6]];
    let p = m.predict(x.view()).unwrap();
    assert!(p.view().iter().all(|&v| (EPS..=1.0 - EPS).contains(&v)));
}
