use std::collections::HashMap;

use super::*;
use crate::data::{SineConfig, Triplet};
use crate::training::{gaussian_nll, loss};

fn inst(
    context: Vec<Triplet>,
    queries: Vec<(f64, usize)>,
    targets: Vec<f64>,
) -> InterpolationInstance {
    InterpolationInstance::new(
        context,
        queries
            .into_iter()
            .map(|(t, c)| QueryPoint { t, c })
            .collect(),
        targets,
    )
    .unwrap()
}

#[test]
fn grid_is_log_spaced() {
    let g = sigma_grid();
    assert_eq!(g.len(), 50);
    assert!((g[0] - 0.05).abs() < 1e-12 && (g[49] - 3.0).abs() < 1e-12);
    let ratio = g[1] / g[0];
    for w in g.windows(2) {
        assert!((w[1] / w[0] - ratio).abs() < 1e-12);
    }
}

fn residual_instances(rng: &mut Rng, scales: [f64; 2], n: usize) -> Vec<InterpolationInstance> {
    (0..n)
        .map(|_| {
            let ctx = vec![Triplet::new(0.0, 1, 0.0)];
            let qs = vec![(0.5, 1), (0.5, 2)];
            let u = vec![scales[0] * rng.normal(), scales[1] * rng.normal()];
            inst(ctx, qs, u)
        })
        .collect()
}

#[test]
fn sigma_fit_is_brute_force_argmin() {
    let mut rng = Rng::new(1);
    let val = residual_instances(&mut rng, [0.3, 1.7], 60);
    let grid = sigma_grid();
    let zero = |_: &[Triplet], q: &[QueryPoint]| Ok(vec![0.0; q.len()]);
    let fitted = fit_homoscedastic_sigma(zero, &val, &grid, 2, SigmaMode::PerChannel).unwrap();
    for c in 1..=2 {
        let mut best = (f64::INFINITY, 0.0);
        for &s in &grid {
            let mut tot = 0.0;
            let mut n = 0;
            for i in &val {
                for (q, &u) in i.queries.iter().zip(&i.targets) {
                    if q.c == c {
                        tot += gaussian_nll(u, 0.0, s).unwrap();
                        n += 1;
                    }
                }
            }
            if tot / (n as f64) < best.0 {
                best = (tot / n as f64, s);
            }
        }
        assert_eq!(fitted[c - 1], best.1);
    }
    let global = fit_homoscedastic_sigma(zero, &val, &grid, 2, SigmaMode::Global).unwrap();
    assert_eq!(global[0], global[1]);
}

#[test]
fn sigma_fit_tracks_rms_residual() {
    let mut rng = Rng::new(2);
    let val = residual_instances(&mut rng, [1.0, 0.5], 2000);
    let grid = sigma_grid();
    let step = grid[1] / grid[0];
    let fitted = fit_homoscedastic_sigma(
        |_, q| Ok(vec![0.0; q.len()]),
        &val,
        &grid,
        2,
        SigmaMode::PerChannel,
    )
    .unwrap();
    for c in 0..2 {
        let r: Vec<f64> = val.iter().map(|i| i.targets[c]).collect();
        let rms = (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt();
        assert!(
            fitted[c] / rms < step && rms / fitted[c] < step,
            "{} vs {rms}",
            fitted[c]
        );
    }
    assert!((fitted[0] - 1.0).abs() < 0.1);
}

#[test]
fn sigma_fit_rejects_bad_grid() {
    let val = residual_instances(&mut Rng::new(0), [1.0, 1.0], 3);
    let f = |_: &[Triplet], q: &[QueryPoint]| Ok(vec![0.0; q.len()]);
    assert!(fit_homoscedastic_sigma(f, &val, &[], 2, SigmaMode::Global).is_err());
    assert!(fit_homoscedastic_sigma(f, &val, &[1.0, 0.0], 2, SigmaMode::Global).is_err());
}

#[test]
fn forward_value_cases() {
    let q = |t, c| QueryPoint { t, c };
    assert_eq!(forward_value(&[Triplet::new(0.5, 1, 3.0)], &q(0.2, 1)), 0.0);
    assert_eq!(forward_value(&[Triplet::new(0.3, 1, 2.5)], &q(0.9, 1)), 2.5);
    assert_eq!(forward_value(&[Triplet::new(0.3, 2, 2.5)], &q(0.9, 1)), 0.0);
    // equal time counts as "before"
    assert_eq!(forward_value(&[Triplet::new(0.9, 1, 4.0)], &q(0.9, 1)), 4.0);
}

#[test]
fn forward_tie_break_by_enumeration() {
    // every ordering of three observations, two of them at the same time
    let obs = [
        Triplet::new(0.4, 1, 1.0),
        Triplet::new(0.4, 1, 2.0),
        Triplet::new(0.1, 1, 3.0),
    ];
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for p in perms {
        let ctx: Vec<Triplet> = p.iter().map(|&i| obs[i]).collect();
        let first_tied = ctx.iter().find(|x| x.t == 0.4).unwrap().u;
        assert_eq!(
            forward_value(&ctx, &QueryPoint { t: 0.5, c: 1 }),
            first_tied
        );
        assert_eq!(forward_value(&ctx, &QueryPoint { t: 0.2, c: 1 }), 3.0);
    }
}

fn sine_prepared(n: usize, seed: u64) -> PreparedData {
    let ds = SineConfig {
        n_series: n,
        length: 20,
        channels: 2,
        noise_sd: 0.1,
        seed,
    }
    .build_asts()
    .unwrap();
    prepare(&ds, seed).unwrap()
}

#[test]
fn mean_baseline_on_standardized_data() {
    let data = sine_prepared(60, 3);
    let val = sample_instances(&data.val, Sampler::Random, 0.5, 3).unwrap();
    let m = BaselineModel::fit(
        BaselineKind::Mean,
        &data.train,
        &val,
        2,
        &sigma_grid(),
        SigmaMode::PerChannel,
    )
    .unwrap();
    assert!(m.channel_means.iter().all(|x| x.abs() < 1e-10));
    let qs: Vec<QueryPoint> = (0..5)
        .map(|k| QueryPoint {
            t: k as f64 / 5.0,
            c: 2,
        })
        .collect();
    let p = m.predict(&[], &qs).unwrap();
    assert!(p.mean.iter().all(|&x| x == p.mean[0]));
    assert!(p.std.iter().all(|&s| s == m.sigma[1] && s > 0.0));
    assert!(m.predict(&[], &[QueryPoint { t: 0.0, c: 3 }]).is_err());
}

#[test]
fn unit_residuals_give_closed_form_nll() {
    let mut rng = Rng::new(4);
    let n = 20000;
    let total: f64 = (0..n)
        .map(|_| gaussian_nll(rng.normal(), 0.0, 1.0).unwrap())
        .sum();
    assert!((total / n as f64 - (HALF_LN_2PI_TEST + 0.5)).abs() < 0.02);
}

const HALF_LN_2PI_TEST: f64 = 0.918_938_533_204_672_8;

/// Knows every observed value, keyed by (time bits, channel).
struct Oracle(HashMap<(u64, usize), f64>, f64);

impl Predictor for Oracle {
    fn predict(&self, _: &[Triplet], queries: &[QueryPoint]) -> Result<GaussianPrediction> {
        Ok(GaussianPrediction {
            mean: queries
                .iter()
                .map(|q| self.0[&(q.t.to_bits(), q.c)])
                .collect(),
            std: vec![self.1; queries.len()],
        })
    }

    fn name(&self) -> String {
        "oracle".into()
    }

    fn fingerprint(&self) -> Result<String> {
        Ok("oracle".into())
    }
}

fn unique_time_records(n: usize, seed: u64) -> Vec<AsTSRecord> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|i| {
            let obs = (0..12)
                .map(|_| Triplet::new(rng.uniform(), 1 + rng.index(2), rng.normal()))
                .collect();
            AsTSRecord::new(format!("r{i}"), obs).unwrap()
        })
        .collect()
}

#[test]
fn perfect_predictor_scores_log_sigma() {
    let recs = unique_time_records(10, 5);
    let map = recs
        .iter()
        .flat_map(|r| &r.observations)
        .map(|x| ((x.t.to_bits(), x.c), x.u))
        .collect();
    let oracle = Oracle(map, 0.1);
    for sampler in [Sampler::Random, Sampler::Burst] {
        let r = evaluate(&oracle, "u", &recs, sampler, 0.5, 0).unwrap();
        assert!((r.nll_mean - (HALF_LN_2PI_TEST + 0.1f64.ln())).abs() < 1e-12);
        assert!((r.nll_mean + 1.384).abs() < 1e-3);
        assert_eq!(r.mse_mean, 0.0);
    }
}

#[test]
fn report_nll_is_training_loss_at_lambda_zero() {
    let data = sine_prepared(40, 6);
    let val = sample_instances(&data.val, Sampler::Random, 0.5, 6).unwrap();
    let m = BaselineModel::fit(
        BaselineKind::Forward,
        &data.train,
        &val,
        2,
        &sigma_grid(),
        SigmaMode::PerChannel,
    )
    .unwrap();
    let r = evaluate(&m, "sine", &data.test, Sampler::Burst, 0.5, 9).unwrap();
    let inst = sample_instances(&data.test, Sampler::Burst, 0.5, 9).unwrap();
    let (p, u) = predict_pooled(&m, &inst).unwrap();
    assert_eq!(r.nll_mean, loss(&p, &u, 0.0).unwrap());
    assert_eq!(
        r.n_targets,
        inst.iter().map(|i| i.targets.len()).sum::<usize>()
    );
    let again = evaluate(&m, "sine", &data.test, Sampler::Burst, 0.5, 9).unwrap();
    assert_eq!(r.without_timing(), again.without_timing());
}

#[test]
fn splits_partition_records() {
    let s = split_indices(100, 1);
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (64, 16, 20));
    let mut all: Vec<usize> = [s.train.clone(), s.val.clone(), s.test.clone()].concat();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
    assert_eq!(split_indices(100, 1), s);
    assert_ne!(split_indices(100, 2), s);
}

#[test]
fn tripletformer_fingerprint_tracks_parameters() {
    let cfg = crate::model::TripletformerConfig::tiny(2, 8, 2);
    let a = Tripletformer::init(cfg.clone(), 0).unwrap();
    let b = Tripletformer::init(cfg, 1).unwrap();
    assert_eq!(a.fingerprint().unwrap(), a.clone().fingerprint().unwrap());
    assert_ne!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
    assert_eq!(a.fingerprint().unwrap().len(), 64);
}

fn manifest_json(extra: &str) -> String {
    format!(
        r#"{{"name": "sine", "dataset": {{"sine": {{"n_series": 30, "length": 12, "channels": 2, "noise_sd": 0.1, "seed": 0}}}},
            "samplers": ["random", "burst"], "observed_fracs": [0.1, 0.5, 0.9], "repetitions": 5,
            "models": [{{"kind": "mean"}}]{extra}}}"#
    )
}

#[test]
fn experiment_grid_cardinality_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, manifest_json("")).unwrap();
    let res = run_experiment(&path).unwrap();
    assert_eq!(res.reports.len(), 30);
    assert_eq!(res.aggregates.len(), 6);
    for a in &res.aggregates {
        let cell: Vec<f64> = res
            .reports
            .iter()
            .filter(|r| r.sampler == a.sampler && r.observed_frac == a.observed_frac)
            .map(|r| r.nll_mean)
            .collect();
        assert_eq!(cell.len(), 5);
        assert!((a.nll_mean - cell.iter().sum::<f64>() / 5.0).abs() <= 1e-12);
    }
    let same = vec![res.reports[0].clone(); 5];
    assert_eq!(aggregate(&same)[0].nll_sd, 0.0);
}

#[test]
fn experiment_reads_dataset_files() {
    let dir = tempfile::tempdir().unwrap();
    crate::data::save_jsonl(dir.path().join("d.jsonl"), &unique_time_records(15, 3)).unwrap();
    let json = r#"{"name": "file", "dataset": {"path": "d.jsonl"}, "samplers": ["random"],
        "observed_fracs": [0.5], "repetitions": 2, "models": [{"kind": "forward"}], "sigma_mode": "global"}"#;
    let path = dir.path().join("m.json");
    std::fs::write(&path, json).unwrap();
    let res = run_experiment(&path).unwrap();
    assert_eq!(res.reports.len(), 2);
    assert_eq!(res.reports[0].model, "forward");
}

#[test]
fn bad_manifests_name_the_field() {
    let cases = [
        (
            manifest_json("").replace("[0.1, 0.5, 0.9]", "[0.1, 1.5]"),
            "observed_fracs[1]",
        ),
        (
            manifest_json("").replace("\"repetitions\": 5", "\"repetitions\": 0"),
            "repetitions",
        ),
        (
            manifest_json("").replace("[\"random\", \"burst\"]", "[]"),
            "samplers",
        ),
        (
            manifest_json("").replace("[{\"kind\": \"mean\"}]", "[]"),
            "models",
        ),
        (manifest_json(", \"bogus\": 1"), "bogus"),
        (
            manifest_json("").replace("\"repetitions\": 5,", ""),
            "repetitions",
        ),
        (
            manifest_json("").replace("\"random\", \"burst\"", "\"random\", \"sideways\""),
            "sideways",
        ),
    ];
    for (json, field) in cases {
        let err = ExperimentManifest::from_json(&json)
            .unwrap_err()
            .to_string();
        assert!(err.contains(field), "{err} should mention {field}");
    }
}
