use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attention::{
    imab, mab, reset_score_madd_count, score_madd_count, Activation, ImabParams, MabParams,
};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tensor::{madd_count, reset_madd_count, Tape, Tensor};
use crate::Result;

/// One row of the MAB vs IMAB self-attention sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionBenchRow {
    pub set_size: usize,
    pub induced: usize,
    pub dim: usize,
    pub mab_score_madds: u64,
    pub imab_score_madds: u64,
    /// Every matrix-product multiply-add, projections included.
    pub mab_total_madds: u64,
    pub imab_total_madds: u64,
    pub mab_seconds: f64,
    pub imab_seconds: f64,
}

impl AttentionBenchRow {
    pub const CSV_HEADER: &'static str = "set_size,induced,dim,mab_score_madds,imab_score_madds,\
        mab_total_madds,imab_total_madds,mab_seconds,imab_seconds";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{:.6}",
            self.set_size,
            self.induced,
            self.dim,
            self.mab_score_madds,
            self.imab_score_madds,
            self.mab_total_madds,
            self.imab_total_madds,
            self.mab_seconds,
            self.imab_seconds
        )
    }
}

/// Self-attention `block(X, X)` over a random `s×d` set for every `s` and
/// `l`, counting multiply-adds of one forward pass.
pub fn benchmark_attention(
    sizes: &[usize],
    induced: &[usize],
    dim: usize,
    heads: usize,
    seed: u64,
) -> Result<Vec<AttentionBenchRow>> {
    let mut rows = Vec::new();
    let mut rng = Rng::new(seed);
    let mut store = ParamStore::new();
    let mab_p = MabParams::new(
        &mut store,
        "mab",
        dim,
        dim,
        heads,
        Activation::Relu,
        &mut rng,
    )?;
    for &l in induced {
        let imab_p = ImabParams::new(
            &mut store,
            &format!("imab{l}"),
            dim,
            dim,
            l,
            heads,
            Activation::Relu,
            &mut rng,
        )?;
        for &s in sizes {
            let x = Tensor::matrix(s, dim, (0..s * dim).map(|_| rng.normal()).collect())?;

            let mut tape = Tape::new();
            let bind = store.bind_constant(&mut tape);
            let xv = tape.constant(x.clone());
            reset_madd_count();
            reset_score_madd_count();
            let start = Instant::now();
            mab(&mut tape, &bind, xv, xv, xv, &mab_p, None)?;
            let mab_seconds = start.elapsed().as_secs_f64();
            let (mab_score, mab_total) = (score_madd_count(), madd_count());

            let mut tape = Tape::new();
            let bind = store.bind_constant(&mut tape);
            let xv = tape.constant(x);
            reset_madd_count();
            reset_score_madd_count();
            let start = Instant::now();
            imab(&mut tape, &bind, xv, xv, xv, &imab_p, None, None)?;
            let imab_seconds = start.elapsed().as_secs_f64();

            rows.push(AttentionBenchRow {
                set_size: s,
                induced: l,
                dim,
                mab_score_madds: mab_score,
                imab_score_madds: score_madd_count(),
                mab_total_madds: mab_total,
                imab_total_madds: madd_count(),
                mab_seconds,
                imab_seconds,
            });
        }
    }
    Ok(rows)
}
