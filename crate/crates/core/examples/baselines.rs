// Mean and forward-fill baselines with homoscedastic σ chosen on validation,
// scored on the test split under both samplers.
//
// `cargo run --release --example baselines`

use tripletformer::data::{Sampler, SineConfig};
use tripletformer::harness::{
    evaluate, prepare, sample_instances, sigma_grid, BaselineKind, BaselineModel, SigmaMode,
};

pub fn run_example() -> tripletformer::Result<()> {
    let dataset = SineConfig {
        n_series: 200,
        length: 40,
        channels: 2,
        noise_sd: 0.1,
        seed: 0,
    }
    .build_asts()?;
    let data = prepare(&dataset, 0)?;
    let grid = sigma_grid();
    for sampler in [Sampler::Random, Sampler::Burst] {
        for frac in [0.1, 0.5, 0.9] {
            let val = sample_instances(&data.val, sampler, frac, 0)?;
            for kind in [BaselineKind::Mean, BaselineKind::Forward] {
                let model =
                    BaselineModel::fit(kind, &data.train, &val, 2, &grid, SigmaMode::PerChannel)?;
                let r = evaluate(&model, "sine", &data.test, sampler, frac, 0)?;
                println!(
                    "{:>6} {:.1} {:>7}: NLL {:.4}  MSE {:.4}  σ = [{:.3}, {:.3}]",
                    sampler.name(),
                    frac,
                    r.model,
                    r.nll_mean,
                    r.mse_mean,
                    model.sigma[0],
                    model.sigma[1]
                );
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> tripletformer::Result<()> {
    run_example()
}
