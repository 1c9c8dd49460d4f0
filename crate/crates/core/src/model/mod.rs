//! The Tripletformer encoder-decoder.
//!
//! ```text
//! context rows [t, onehot(c), u] ─ iFF ─ L × self-attention ─ Z_enc
//! query rows   [t', onehot(c')]  ─ tFF ─ cross-attention(Z_enc) ─ Z_dec
//! Z_dec ─ mean head ─ μ
//! Z_dec ─ scale head ─ softplus(·) + 1e-8 ─ σ
//! ```
//!
//! Self-attention blocks are IMABs by default and MABs with
//! [`BlockKind::Mab`]; the cross-attention block is a MAB by default and an
//! IMAB with [`BlockKind::Imab`]. There is no attention among queries, so
//! every query's prediction depends only on itself and the context.

mod checkpoint;

use serde::{Deserialize, Serialize};

use crate::attention::{Activation, AttentionBlock, ImabParams, MabParams};
use crate::data::{
    encode_context, encode_queries, Batch, InterpolationInstance, QueryPoint, Triplet,
};
use crate::params::{Binding, Linear, ParamStore};
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor, Var};
use crate::{Error, Result};

pub use checkpoint::Checkpoint;

/// Added to the softplus output so every predicted σ is strictly positive.
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Mab,
    Imab,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripletformerConfig {
    /// Channel count `C`.
    pub channels: usize,
    /// Number of self-attention blocks `L`.
    pub depth: usize,
    /// Output width of the input embedding (iFF).
    pub input_embed_dim: usize,
    /// Width of the encoder self-attention blocks.
    pub self_attn_dim: usize,
    /// Output width of the query embedding (tFF).
    pub query_embed_dim: usize,
    /// Width of the decoder cross-attention block.
    pub cross_attn_dim: usize,
    /// Hidden width of iFF and tFF.
    pub ff_hidden: usize,
    /// Induced points per IMAB.
    pub induced_points: usize,
    pub num_heads: usize,
    #[serde(default)]
    pub activation: Activation,
    pub encoder_block: BlockKind,
    pub decoder_block: BlockKind,
}

impl TripletformerConfig {
    /// L = 2, all widths 64, 16 induced points, 2 heads.
    pub fn desk_default(channels: usize) -> Self {
        Self {
            channels,
            depth: 2,
            input_embed_dim: 64,
            self_attn_dim: 64,
            query_embed_dim: 64,
            cross_attn_dim: 64,
            ff_hidden: 64,
            induced_points: 16,
            num_heads: 2,
            activation: Activation::Relu,
            encoder_block: BlockKind::Imab,
            decoder_block: BlockKind::Mab,
        }
    }

    /// Everything of width `width`, one block, one head.
    pub fn tiny(channels: usize, width: usize, induced_points: usize) -> Self {
        Self {
            channels,
            depth: 1,
            input_embed_dim: width,
            self_attn_dim: width,
            query_embed_dim: width,
            cross_attn_dim: width,
            ff_hidden: width,
            induced_points,
            num_heads: 1,
            activation: Activation::Relu,
            encoder_block: BlockKind::Imab,
            decoder_block: BlockKind::Mab,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.channels == 0 {
            return bad("channels must be >= 1".into());
        }
        if self.depth == 0 {
            return bad("depth must be >= 1".into());
        }
        for (name, w) in [
            ("input_embed_dim", self.input_embed_dim),
            ("self_attn_dim", self.self_attn_dim),
            ("query_embed_dim", self.query_embed_dim),
            ("cross_attn_dim", self.cross_attn_dim),
            ("ff_hidden", self.ff_hidden),
            ("num_heads", self.num_heads),
        ] {
            if w == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        let uses_imab =
            self.encoder_block == BlockKind::Imab || self.decoder_block == BlockKind::Imab;
        if uses_imab && self.induced_points == 0 {
            return bad("induced_points must be >= 1 when an IMAB is used".into());
        }
        if self.self_attn_dim % self.num_heads != 0 || self.cross_attn_dim % self.num_heads != 0 {
            return bad(format!(
                "attention widths {}/{} must be divisible by {} heads",
                self.self_attn_dim, self.cross_attn_dim, self.num_heads
            ));
        }
        // The residual q + MHA(q, k, v) needs the query width to equal the block width.
        if self.input_embed_dim != self.self_attn_dim {
            return bad(format!(
                "input_embed_dim ({}) must equal self_attn_dim ({})",
                self.input_embed_dim, self.self_attn_dim
            ));
        }
        if self.query_embed_dim != self.cross_attn_dim {
            return bad(format!(
                "query_embed_dim ({}) must equal cross_attn_dim ({})",
                self.query_embed_dim, self.cross_attn_dim
            ));
        }
        Ok(())
    }
}

/// Per-query Gaussian parameters, one entry per real (unmasked) query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrediction {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl GaussianPrediction {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Tape handles of a forward pass; `mean` and `std` are `r×1`.
#[derive(Clone, Copy, Debug)]
pub struct OutputVars {
    pub mean: Var,
    pub std: Var,
}

#[derive(Clone, Debug, PartialEq)]
struct Layout {
    iff: [Linear; 2],
    encoder: Vec<AttentionBlock>,
    tff: [Linear; 2],
    cross: AttentionBlock,
    mean_head: Linear,
    scale_head: Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tripletformer {
    config: TripletformerConfig,
    params: ParamStore,
    layout: Layout,
}

fn block(
    kind: BlockKind,
    store: &mut ParamStore,
    name: &str,
    dim: usize,
    key_dim: usize,
    cfg: &TripletformerConfig,
    rng: &mut Rng,
) -> Result<AttentionBlock> {
    Ok(match kind {
        BlockKind::Mab => AttentionBlock::Mab(MabParams::new(
            store,
            name,
            dim,
            key_dim,
            cfg.num_heads,
            cfg.activation,
            rng,
        )?),
        BlockKind::Imab => AttentionBlock::Imab(ImabParams::new(
            store,
            name,
            dim,
            key_dim,
            cfg.induced_points,
            cfg.num_heads,
            cfg.activation,
            rng,
        )?),
    })
}

impl Tripletformer {
    /// Glorot-uniform weights, zero biases, induced points ~ N(0, 1/d).
    pub fn init(config: TripletformerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        let mut store = ParamStore::new();
        let c = &config;
        let iff = [
            Linear::new(&mut store, "iff.0", c.channels + 2, c.ff_hidden, &mut rng),
            Linear::new(
                &mut store,
                "iff.1",
                c.ff_hidden,
                c.input_embed_dim,
                &mut rng,
            ),
        ];
        let encoder = (0..c.depth)
            .map(|i| {
                block(
                    c.encoder_block,
                    &mut store,
                    &format!("encoder.{i}"),
                    c.self_attn_dim,
                    c.self_attn_dim,
                    c,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let tff = [
            Linear::new(&mut store, "tff.0", c.channels + 1, c.ff_hidden, &mut rng),
            Linear::new(
                &mut store,
                "tff.1",
                c.ff_hidden,
                c.query_embed_dim,
                &mut rng,
            ),
        ];
        let cross = block(
            c.decoder_block,
            &mut store,
            "decoder.cross",
            c.cross_attn_dim,
            c.self_attn_dim,
            c,
            &mut rng,
        )?;
        let mean_head = Linear::new(&mut store, "head.mean", c.cross_attn_dim, 1, &mut rng);
        let scale_head = Linear::new(&mut store, "head.scale", c.cross_attn_dim, 1, &mut rng);
        Ok(Self {
            config,
            params: store,
            layout: Layout {
                iff,
                encoder,
                tff,
                cross,
                mean_head,
                scale_head,
            },
        })
    }

    pub fn config(&self) -> &TripletformerConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    fn pointwise(&self, tape: &mut Tape, bind: &Binding, ff: &[Linear; 2], x: Var) -> Result<Var> {
        let h = ff[0].forward(tape, bind, x)?;
        let h = self.config.activation.apply(tape, h);
        ff[1].forward(tape, bind, h)
    }

    /// `Z_enc` for a (possibly padded) `[s×(C+2)]` context matrix. Padded
    /// rows are masked as keys in every block; their own output rows are
    /// meaningless.
    pub fn encoder_forward(
        &self,
        tape: &mut Tape,
        bind: &Binding,
        context: Var,
        mask: &[bool],
    ) -> Result<Var> {
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidArgument(
                "context has no unmasked rows".into(),
            ));
        }
        let mut z = self.pointwise(tape, bind, &self.layout.iff, context)?;
        for blk in &self.layout.encoder {
            z = blk.forward(tape, bind, z, z, Some(mask), Some(mask))?;
        }
        Ok(z)
    }

    /// Gaussian parameters for the unmasked rows of a `[r×(C+1)]` query
    /// matrix, in row order.
    pub fn decoder_forward(
        &self,
        tape: &mut Tape,
        bind: &Binding,
        encoded: Var,
        context_mask: &[bool],
        queries: Var,
        query_mask: &[bool],
    ) -> Result<OutputVars> {
        let keep: Vec<usize> = (0..query_mask.len()).filter(|&i| query_mask[i]).collect();
        if keep.is_empty() {
            return Err(Error::InvalidArgument("no unmasked queries".into()));
        }
        let y = self.pointwise(tape, bind, &self.layout.tff, queries)?;
        let z = self.layout.cross.forward(
            tape,
            bind,
            y,
            encoded,
            Some(query_mask),
            Some(context_mask),
        )?;
        let z = if keep.len() == query_mask.len() {
            z
        } else {
            tape.select_rows(z, &keep)?
        };
        let mean = self.layout.mean_head.forward(tape, bind, z)?;
        let pre = self.layout.scale_head.forward(tape, bind, z)?;
        let std = tape.softplus(pre);
        let std = tape.add_scalar(std, SIGMA_FLOOR);
        Ok(OutputVars { mean, std })
    }

    /// Full pipeline on encoded matrices.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bind: &Binding,
        context: &Tensor,
        context_mask: &[bool],
        queries: &Tensor,
        query_mask: &[bool],
    ) -> Result<OutputVars> {
        if context.rows() != context_mask.len() || queries.rows() != query_mask.len() {
            return Err(Error::InvalidArgument(
                "mask length does not match rows".into(),
            ));
        }
        let ctx = tape.constant(context.clone());
        let z = self.encoder_forward(tape, bind, ctx, context_mask)?;
        let q = tape.constant(queries.clone());
        self.decoder_forward(tape, bind, z, context_mask, q, query_mask)
    }

    /// Forward pass for instance `b` of a padded batch.
    pub fn forward_batch_item(
        &self,
        tape: &mut Tape,
        bind: &Binding,
        batch: &Batch,
        b: usize,
    ) -> Result<OutputVars> {
        self.forward(
            tape,
            bind,
            &batch.context_matrix(b),
            batch.context_mask(b),
            &batch.query_matrix(b),
            batch.query_mask(b),
        )
    }

    fn read(tape: &Tape, out: OutputVars) -> GaussianPrediction {
        GaussianPrediction {
            mean: tape.value(out.mean).data().to_vec(),
            std: tape.value(out.std).data().to_vec(),
        }
    }

    /// Predicts `N(μ, σ)` for each query given the context set.
    pub fn predict(
        &self,
        context: &[Triplet],
        queries: &[QueryPoint],
    ) -> Result<GaussianPrediction> {
        let c = self.config.channels;
        let ctx = encode_context(context, c)?;
        let q = encode_queries(queries, c)?;
        let mut tape = Tape::new();
        let bind = self.params.bind_constant(&mut tape);
        let out = self.forward(
            &mut tape,
            &bind,
            &ctx,
            &vec![true; ctx.rows()],
            &q,
            &vec![true; q.rows()],
        )?;
        Ok(Self::read(&tape, out))
    }

    pub fn predict_distribution(
        &self,
        instance: &InterpolationInstance,
    ) -> Result<GaussianPrediction> {
        self.predict(&instance.context, &instance.queries)
    }

    /// One prediction per batch item, padded queries dropped.
    pub fn predict_batch(&self, batch: &Batch) -> Result<Vec<GaussianPrediction>> {
        let mut tape = Tape::new();
        let bind = self.params.bind_constant(&mut tape);
        (0..batch.len())
            .map(|b| {
                let out = self.forward_batch_item(&mut tape, &bind, batch, b)?;
                Ok(Self::read(&tape, out))
            })
            .collect()
    }
}
