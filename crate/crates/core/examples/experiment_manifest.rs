// An experiment grid from a JSON manifest: samplers × observed fractions ×
// repetitions, aggregated as mean ± sd.
//
// `cargo run --release --example experiment_manifest`

use tripletformer::harness::run_experiment;

const MANIFEST: &str = r#"{
  "name": "sine-small",
  "dataset": {"sine": {"n_series": 50, "length": 20, "channels": 2, "noise_sd": 0.1, "seed": 0}},
  "samplers": ["random", "burst"],
  "observed_fracs": [0.1, 0.5, 0.9],
  "repetitions": 3,
  "models": [
    {"kind": "mean"},
    {"kind": "forward"},
    {"kind": "tripletformer",
     "config": {"channels": 2, "depth": 1, "input_embed_dim": 8, "self_attn_dim": 8,
                "query_embed_dim": 8, "cross_attn_dim": 8, "ff_hidden": 8, "induced_points": 2,
                "num_heads": 1, "encoder_block": "imab", "decoder_block": "mab"},
     "train": {"max_epochs": 1, "batch_size": 8}}
  ]
}"#;

pub fn run_example() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join(format!("tripletformer-manifest-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, MANIFEST)?;
    let result = run_experiment(&path);
    std::fs::remove_dir_all(&dir).ok();
    let result = result?;

    println!("{} reports", result.reports.len());
    for a in &result.aggregates {
        println!(
            "{:>13} {:>6} {:.1}: NLL {:.3} ± {:.3}",
            a.model,
            a.sampler.name(),
            a.observed_frac,
            a.nll_mean,
            a.nll_sd
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
