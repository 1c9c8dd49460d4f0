// Full self-attention (MAB) against induced attention (IMAB): exact score
// multiply-add counts as the set grows, and a check that masked keys never
// reach the output.
//
// `cargo run --release --example attention_cost`

use tripletformer::attention::{
    imab_score_cost, mab_score_cost, Activation, AttentionBlock, ImabParams,
};
use tripletformer::harness::benchmark_attention;
use tripletformer::params::ParamStore;
use tripletformer::rng::Rng;
use tripletformer::tensor::{Tape, Tensor};

pub fn run_example() -> tripletformer::Result<()> {
    let (d, l) = (32, 16);
    let rows = benchmark_attention(&[64, 128, 256], &[l], d, 1, 0)?;
    println!(
        "{:>5} {:>12} {:>12} {:>7}",
        "s", "MAB scores", "IMAB scores", "ratio"
    );
    for r in &rows {
        assert_eq!(r.mab_score_madds, mab_score_cost(r.set_size, r.set_size, d));
        assert_eq!(
            r.imab_score_madds,
            imab_score_cost(r.set_size, r.set_size, l, d)
        );
        println!(
            "{:>5} {:>12} {:>12} {:>7.1}",
            r.set_size,
            r.mab_score_madds,
            r.imab_score_madds,
            r.mab_score_madds as f64 / r.imab_score_madds as f64
        );
    }

    // Padded keys: rewriting masked rows leaves the output bit-identical.
    let mut rng = Rng::new(1);
    let mut store = ParamStore::new();
    let block = AttentionBlock::Imab(ImabParams::new(
        &mut store,
        "imab",
        8,
        8,
        4,
        2,
        Activation::Relu,
        &mut rng,
    )?);
    let mask = [true, true, true, false, false];
    let mut x = Tensor::matrix(5, 8, (0..40).map(|_| rng.normal()).collect())?;
    let run = |x: &Tensor| -> tripletformer::Result<Tensor> {
        let mut tape = Tape::new();
        let bind = store.bind_constant(&mut tape);
        let xv = tape.constant(x.clone());
        let out = block.forward(&mut tape, &bind, xv, xv, Some(&mask), Some(&mask))?;
        Ok(tape.value(out).clone())
    };
    let before = run(&x)?;
    for v in &mut x.data_mut()[24..] {
        *v = 1e6;
    }
    let after = run(&x)?;
    let same = (0..3).all(|i| before.row(i) == after.row(i));
    println!("real rows unchanged after rewriting padded keys: {same}");
    assert!(same);
    Ok(())
}

#[allow(dead_code)]
fn main() -> tripletformer::Result<()> {
    run_example()
}
