// Save a model, load it back and confirm identical parameters and
// predictions; the fingerprint in evaluation reports identifies it.
//
// `cargo run --example checkpoints`

use tripletformer::data::{QueryPoint, Triplet};
use tripletformer::harness::Predictor;
use tripletformer::model::{Tripletformer, TripletformerConfig};

pub fn run_example() -> tripletformer::Result<()> {
    let model = Tripletformer::init(TripletformerConfig::desk_default(3), 42)?;
    println!("{} parameters", model.num_parameters());

    let path =
        std::env::temp_dir().join(format!("tripletformer-example-{}.json", std::process::id()));
    model.save(&path)?;
    let loaded = Tripletformer::load(&path)?;
    std::fs::remove_file(&path).ok();

    let context = [
        Triplet::new(0.1, 1, 0.4),
        Triplet::new(0.5, 3, -1.2),
        Triplet::new(0.7, 2, 0.3),
    ];
    let queries = [QueryPoint { t: 0.6, c: 1 }, QueryPoint { t: 0.9, c: 3 }];
    let a = model.predict(&context, &queries)?;
    let b = loaded.predict(&context, &queries)?;
    assert_eq!(a, b);
    assert_eq!(model.fingerprint()?, loaded.fingerprint()?);
    println!(
        "round trip exact, fingerprint {}",
        &loaded.fingerprint()?[..16]
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> tripletformer::Result<()> {
    run_example()
}
