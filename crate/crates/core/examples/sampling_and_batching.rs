// Random-missing and burst-missing instances from one asynchronous series,
// then padding instances of different sizes into a batch.
//
// `cargo run --example sampling_and_batching`

use tripletformer::data::{batch_pad, AsTSRecord, Sampler, Triplet};

pub fn run_example() -> tripletformer::Result<()> {
    // Ten time steps, one channel observed per step.
    let obs: Vec<Triplet> = (0..10)
        .map(|k| Triplet::new(k as f64 / 9.0, 1 + k % 2, (k as f64).sin()))
        .collect();
    let record = AsTSRecord::new("demo", obs)?;

    let mut instances = Vec::new();
    for sampler in [Sampler::Random, Sampler::Burst] {
        let inst = sampler.sample(&record, 0.5, 3)?;
        let times: Vec<String> = inst.queries.iter().map(|q| format!("{:.2}", q.t)).collect();
        println!(
            "{:>6}: {} context, query times [{}]",
            sampler.name(),
            inst.context.len(),
            times.join(", ")
        );
        instances.push(inst);
    }
    instances.push(Sampler::Random.sample(&record, 0.9, 4)?);

    let batch = batch_pad(&instances, 2)?;
    println!(
        "batch of {}: context padded to {}, queries padded to {}",
        batch.len(),
        batch.max_context(),
        batch.max_queries()
    );
    for b in 0..batch.len() {
        let real = batch.query_mask(b).iter().filter(|&&m| m).count();
        println!(
            "  instance {b}: {real} real queries of {}",
            batch.max_queries()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> tripletformer::Result<()> {
    run_example()
}
