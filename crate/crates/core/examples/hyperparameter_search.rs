// Random search over depth, widths, induced points and the MSE weight,
// keeping the trial with the least validation NLL.
//
// `cargo run --release --example hyperparameter_search`

use tripletformer::data::SineConfig;
use tripletformer::harness::prepare;
use tripletformer::model::TripletformerConfig;
use tripletformer::training::{random_search, SearchSpace, TrainConfig};

pub fn run_example() -> tripletformer::Result<()> {
    let dataset = SineConfig {
        n_series: 40,
        length: 20,
        channels: 2,
        noise_sd: 0.1,
        seed: 0,
    }
    .build_asts()?;
    let data = prepare(&dataset, 0)?;
    // Narrow grids keep the example quick; SearchSpace::default() holds the full ones.
    let space = SearchSpace {
        depth: vec![1, 2],
        hidden: vec![8, 16],
        attention_dim: vec![8, 16],
        induced_points: vec![2, 4],
        lambda: vec![0.0, 1.0, 5.0, 10.0],
    };
    let tconfig = TrainConfig {
        max_epochs: 2,
        batch_size: 8,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let base = TripletformerConfig::tiny(2, 8, 2);
    let result = random_search(&space, &base, &tconfig, 3, 0, &data.train, &data.val)?;
    for (i, t) in result.trials.iter().enumerate() {
        println!(
            "trial {i}: depth {} width {} hidden {} induced {} λ {}  val NLL {:.4}",
            t.config.depth,
            t.config.self_attn_dim,
            t.config.ff_hidden,
            t.config.induced_points,
            t.train.lambda,
            t.val_nll
        );
    }
    println!("best: trial {}", result.best);
    Ok(())
}

#[allow(dead_code)]
fn main() -> tripletformer::Result<()> {
    run_example()
}
