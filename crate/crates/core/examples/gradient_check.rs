// Finite-difference check of the training-loss gradient through the whole
// model, for every encoder/decoder block choice.
//
// `cargo run --release --example gradient_check`

use tripletformer::model::{BlockKind, TripletformerConfig};
use tripletformer::training::model_gradcheck;

pub fn run_example() -> tripletformer::Result<()> {
    for (enc, dec) in [
        (BlockKind::Imab, BlockKind::Mab),
        (BlockKind::Mab, BlockKind::Mab),
        (BlockKind::Imab, BlockKind::Imab),
    ] {
        let mut config = TripletformerConfig::tiny(2, 8, 2);
        config.encoder_block = enc;
        config.decoder_block = dec;
        let r = model_gradcheck(&config, 0, 1.0, 1e-4)?;
        println!(
            "encoder {enc:?}, decoder {dec:?}: max relative error {:.2e} over {} coordinates ({} on relu kinks)",
            r.max_rel_error, r.checked, r.kinks
        );
        assert!(r.max_rel_error < 1e-4);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> tripletformer::Result<()> {
    run_example()
}
