// Generate a small sine dataset, train a narrow Tripletformer for a few
// epochs and print predictive Gaussians for one held-out series.
//
// `cargo run --release --example quickstart`

use tripletformer::data::{Sampler, SineConfig};
use tripletformer::harness::{evaluate, prepare};
use tripletformer::model::TripletformerConfig;
use tripletformer::training::{train, TrainConfig};

pub fn run_example() -> tripletformer::Result<()> {
    let dataset = SineConfig {
        n_series: 60,
        length: 20,
        channels: 2,
        noise_sd: 0.1,
        seed: 0,
    }
    .build_asts()?;
    let data = prepare(&dataset, 0)?;

    let config = TripletformerConfig::tiny(2, 16, 4);
    let tconfig = TrainConfig {
        learning_rate: 3e-3,
        batch_size: 8,
        max_epochs: 5,
        ..TrainConfig::default()
    };
    let (model, history) = train(&config, &tconfig, &data.train, &data.val)?;
    for e in &history.epochs {
        println!(
            "epoch {:>2}  train {:.4}  val NLL {:.4}",
            e.epoch, e.train_loss, e.val_nll
        );
    }

    let instance = Sampler::Random.sample(&data.test[0], 0.5, 7)?;
    let pred = model.predict_distribution(&instance)?;
    println!(
        "{} context points, {} queries",
        instance.context.len(),
        instance.queries.len()
    );
    for ((q, u), (m, s)) in instance
        .queries
        .iter()
        .zip(&instance.targets)
        .zip(pred.mean.iter().zip(&pred.std))
        .take(5)
    {
        println!(
            "t={:.3} c={}  target {u:+.3}  predicted N({m:+.3}, {s:.3}²)",
            q.t, q.c
        );
    }

    let report = evaluate(&model, "sine", &data.test, Sampler::Random, 0.5, 0)?;
    println!(
        "test NLL {:.4}, MSE {:.4} over {} targets",
        report.nll_mean, report.mse_mean, report.n_targets
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> tripletformer::Result<()> {
    run_example()
}
