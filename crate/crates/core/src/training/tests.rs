use super::*;
use crate::data::{AsTSRecord, SineConfig};
use crate::model::TripletformerConfig;
use crate::rng::Rng;

fn pred(mean: &[f64], std: &[f64]) -> GaussianPrediction {
    GaussianPrediction {
        mean: mean.to_vec(),
        std: std.to_vec(),
    }
}

#[test]
fn nll_reference_values() {
    assert!((gaussian_nll(0.0, 0.0, 1.0).unwrap() - 0.918939).abs() < 1e-6);
    assert!((gaussian_nll(1.0, 0.0, 1.0).unwrap() - 1.418939).abs() < 1e-6);
    assert!((gaussian_nll(2.0, 1.0, 0.5).unwrap() - 2.225792).abs() < 1e-6);
    assert!(gaussian_nll(0.0, 0.0, 0.0).is_err());
    assert!(gaussian_nll(0.0, 0.0, -1.0).is_err());
    assert!(gaussian_nll(0.0, 0.0, f64::NAN).is_err());
}

#[test]
fn loss_matches_scalar_loop() {
    let mut rng = Rng::new(11);
    for _ in 0..20 {
        let n = 1 + rng.index(9);
        let u: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let m: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.1, 2.0)).collect();
        let lambda = rng.uniform_range(0.0, 10.0);
        let mut nll = 0.0;
        let mut sq = 0.0;
        for j in 0..n {
            let var = s[j] * s[j];
            nll += 0.5 * (2.0 * std::f64::consts::PI).ln()
                + s[j].ln()
                + (u[j] - m[j]).powi(2) / (2.0 * var);
            sq += (u[j] - m[j]).powi(2);
        }
        let oracle = nll / n as f64 + lambda * sq / n as f64;
        let got = loss(&pred(&m, &s), &u, lambda).unwrap();
        assert!((got - oracle).abs() <= 1e-12, "{got} vs {oracle}");
    }
}

#[test]
fn lambda_zero_is_mean_nll_exactly() {
    let (u, m, s) = ([0.3, -1.0, 2.0], [0.1, 0.4, 1.5], [0.5, 1.0, 2.0]);
    let mut total = 0.0;
    for j in 0..3 {
        total += gaussian_nll(u[j], m[j], s[j]).unwrap();
    }
    assert_eq!(loss(&pred(&m, &s), &u, 0.0).unwrap(), total / 3.0);
}

#[test]
fn perfect_means_leave_only_log_sigma() {
    let (u, s) = ([0.3, -1.0], [0.5, 2.0]);
    let got = loss(&pred(&u, &s), &u, 7.0).unwrap();
    let want = ((HALF_LN_2PI + 0.5f64.ln()) + (HALF_LN_2PI + 2.0f64.ln())) / 2.0;
    assert!((got - want).abs() < 1e-15);
}

#[test]
fn loss_monotone_in_lambda() {
    let p = pred(&[0.0, 1.0], &[1.0, 1.0]);
    let u = [0.5, 0.0];
    let mut last = f64::NEG_INFINITY;
    for lambda in [0.0, 0.5, 1.0, 5.0, 10.0] {
        let l = loss(&p, &u, lambda).unwrap();
        assert!(l > last);
        last = l;
    }
}

#[test]
fn loss_argument_errors() {
    assert!(loss(&pred(&[], &[]), &[], 0.0).is_err());
    assert!(loss(&pred(&[0.0], &[1.0]), &[0.0, 1.0], 0.0).is_err());
}

#[test]
fn tape_loss_agrees_with_plain_loss() {
    let mut rng = Rng::new(12);
    let n = 5;
    let u: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let m: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let s: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.2, 1.5)).collect();
    for lambda in [0.0, 1.0, 5.0] {
        let mut tape = Tape::new();
        let out = OutputVars {
            mean: tape.leaf(Tensor::matrix(n, 1, m.clone()).unwrap()),
            std: tape.leaf(Tensor::matrix(n, 1, s.clone()).unwrap()),
        };
        let l = loss_var(&mut tape, out, &u, lambda).unwrap();
        let got = tape.value(l).data()[0];
        let want = loss(&pred(&m, &s), &u, lambda).unwrap();
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn adam_first_step_is_learning_rate() {
    for g in [1e-3, 0.5, 42.0] {
        let mut p = vec![Tensor::scalar(1.0)];
        let mut adam = Adam::new(0.01, &p);
        adam.step(&mut p, &[Tensor::scalar(g)]).unwrap();
        assert!((1.0 - p[0].data()[0] - 0.01).abs() < 1e-6);
    }
}

#[test]
fn adam_zero_gradient_no_change() {
    let mut p = vec![Tensor::matrix(1, 3, vec![1.0, -2.0, 3.0]).unwrap()];
    let before = p.clone();
    let mut adam = Adam::new(0.1, &p);
    for _ in 0..5 {
        adam.step(&mut p, &[Tensor::zeros(&[1, 3])]).unwrap();
    }
    assert_eq!(p, before);
}

#[test]
fn adam_minimizes_quadratic() {
    let mut p = vec![Tensor::scalar(0.0)];
    let mut adam = Adam::new(0.1, &p);
    for _ in 0..100 {
        let theta = p[0].data()[0];
        adam.step(&mut p, &[Tensor::scalar(2.0 * (theta - 3.0))])
            .unwrap();
    }
    assert!((p[0].data()[0] - 3.0).abs() < 0.1, "{}", p[0].data()[0]);
}

#[test]
fn adam_rejects_shape_mismatch() {
    let mut p = vec![Tensor::zeros(&[2, 2])];
    let mut adam = Adam::new(0.1, &p);
    assert!(adam.step(&mut p, &[Tensor::zeros(&[1, 4])]).is_err());
    assert!(adam.step(&mut p, &[]).is_err());
}

#[test]
fn full_model_gradient_check() {
    for act in [
        crate::attention::Activation::Relu,
        crate::attention::Activation::Gelu,
    ] {
        let mut cfg = TripletformerConfig::tiny(2, 8, 2);
        cfg.activation = act;
        let report = model_gradcheck(&cfg, 0, 1.0, 1e-4).unwrap();
        assert!(report.max_rel_error < 1e-4, "{act:?}: {report:?}");
        assert!(report.checked + report.kinks == 1546);
        assert!(report.kinks * 100 < report.checked, "{report:?}");
    }
}

fn sine_records(n: usize, seed: u64) -> Vec<AsTSRecord> {
    SineConfig {
        n_series: n,
        length: 20,
        channels: 2,
        noise_sd: 0.1,
        seed,
    }
    .build_asts()
    .unwrap()
    .records
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        learning_rate: 3e-3,
        batch_size: 8,
        max_epochs: 20,
        patience: 100,
        ..TrainConfig::default()
    }
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let records = sine_records(40, 1);
    let (tr, va) = records.split_at(32);
    let cfg = TripletformerConfig::tiny(2, 16, 4);
    let (m1, h1) = train(&cfg, &quick_train(), tr, va).unwrap();
    let (m2, h2) = train(&cfg, &quick_train(), tr, va).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(
        m1.to_checkpoint().to_json().unwrap(),
        m2.to_checkpoint().to_json().unwrap()
    );
    assert_eq!(h1.epochs.len(), 20);
    assert!(h1.epochs[19].train_loss < h1.epochs[0].train_loss);
    let best = h1.best_val_nll();
    assert!(h1.epochs.iter().all(|e| e.val_nll >= best));
}

#[test]
fn patience_zero_stops_one_epoch_after_best() {
    let records = sine_records(12, 2);
    let (tr, va) = records.split_at(9);
    let tc = TrainConfig {
        patience: 0,
        max_epochs: 50,
        learning_rate: 0.05,
        ..quick_train()
    };
    let (_, h) = train(&TripletformerConfig::tiny(2, 8, 2), &tc, tr, va).unwrap();
    assert_eq!(h.epochs.len(), h.best_epoch + 1);
    for e in &h.epochs[..h.best_epoch] {
        assert!(e.val_nll >= h.best_val_nll());
    }
}

#[test]
fn kept_parameters_are_the_best_epoch() {
    let records = sine_records(12, 3);
    let (tr, va) = records.split_at(9);
    let tc = TrainConfig {
        max_epochs: 6,
        ..quick_train()
    };
    let (model, h) = train(&TripletformerConfig::tiny(2, 8, 2), &tc, tr, va).unwrap();
    let val = validation_instances(va, &tc).unwrap();
    let mut p = GaussianPrediction {
        mean: vec![],
        std: vec![],
    };
    let mut u = vec![];
    for inst in &val {
        let q = model.predict_distribution(inst).unwrap();
        p.mean.extend(q.mean);
        p.std.extend(q.std);
        u.extend_from_slice(&inst.targets);
    }
    assert_eq!(mean_nll(&p, &u).unwrap(), h.best_val_nll());
}

#[test]
fn bad_train_configs_rejected() {
    let records = sine_records(4, 4);
    let cfg = TripletformerConfig::tiny(2, 8, 2);
    for tc in [
        TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            lambda: -1.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            observed_frac: 1.0,
            ..TrainConfig::default()
        },
    ] {
        assert!(matches!(
            train(&cfg, &tc, &records, &records),
            Err(Error::Config(_))
        ));
    }
    assert!(train(&cfg, &TrainConfig::default(), &[], &records).is_err());
}

#[test]
fn divergence_is_reported() {
    let records = sine_records(6, 5);
    let tc = TrainConfig {
        learning_rate: 1e300,
        max_epochs: 3,
        ..quick_train()
    };
    let err = train(&TripletformerConfig::tiny(2, 8, 2), &tc, &records, &records).unwrap_err();
    assert!(matches!(err, Error::Diverged { .. }), "{err}");
}

#[test]
fn search_returns_argmin_and_is_reproducible() {
    let records = sine_records(10, 6);
    let (tr, va) = records.split_at(8);
    let space = SearchSpace {
        depth: vec![1, 2],
        hidden: vec![4, 8],
        attention_dim: vec![4, 8],
        induced_points: vec![1, 2],
        lambda: vec![0.0, 1.0],
    };
    let base = TripletformerConfig::tiny(2, 8, 2);
    let tc = TrainConfig {
        max_epochs: 2,
        ..quick_train()
    };
    let a = random_search(&space, &base, &tc, 5, 3, tr, va).unwrap();
    let b = random_search(&space, &base, &tc, 5, 3, tr, va).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trials.len(), 5);
    assert!(a.trials.iter().all(|t| a.best_trial().val_nll <= t.val_nll));
    let one = random_search(&space, &base, &tc, 1, 3, tr, va).unwrap();
    assert_eq!(one.best, 0);
    assert_eq!(one.trials[0], a.trials[0]);
    assert!(random_search(&space, &base, &tc, 0, 3, tr, va).is_err());
}
