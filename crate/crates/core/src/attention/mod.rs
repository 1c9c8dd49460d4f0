//! Attention blocks over sets.
//!
//! * [`scaled_dot_attention`]: `softmax(QKᵀ/√d, key_mask)·V`
//! * [`multi_head_attention`]: per-head projections, concatenation, output
//!   projection
//! * [`mab`]: `H = α(q + MHA(q, k, v))`, `out = α(H + MLP(H))`
//! * [`imab`]: `MAB(q, H, H)` with `H = MAB(h, k, v)` for learnable induced
//!   points `h`
//!
//! Masking follows one rule: a key can be masked, a query cannot be masked
//! inside attention. Masked keys get exactly zero weight, so their values
//! never reach any output. Rows computed for padded queries exist but carry
//! no meaning; callers drop them downstream.
//!
//! Attention score products (`QKᵀ`) are tallied separately from all other
//! matrix products, see [`score_madd_count`].

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::params::{Binding, Linear, ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor, Var};
use crate::{Error, Result};


thread_local! {
    static SCORE_MADDS: Cell<u64> = const { Cell::new(0) };
}

/// Multiply-adds spent on `QKᵀ` score products on this thread.
pub fn score_madd_count() -> u64 {
    SCORE_MADDS.with(Cell::get)
}

pub fn reset_score_madd_count() {
    SCORE_MADDS.with(|c| c.set(0));
}

/// Score multiply-adds of one multihead attention call.
pub fn mab_score_cost(queries: usize, keys: usize, dim: usize) -> u64 {
    (queries * keys * dim) as u64
}

/// Score multiply-adds of one IMAB call with `induced` induced points.
pub fn imab_score_cost(queries: usize, keys: usize, induced: usize, dim: usize) -> u64 {
    ((queries * induced + induced * keys) * dim) as u64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Gelu,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Gelu => tape.gelu(x),
        }
    }
}

fn check_mask(mask: Option<&[bool]>, len: usize, what: &str) -> Result<()> {
    match mask {
        Some(m) if m.len() != len => Err(Error::InvalidArgument(format!(
            "{what} mask has length {} but there are {len} rows",
            m.len()
        ))),
        Some(m) if what == "key" && !m.iter().any(|&b| b) => Err(Error::EmptyAttentionSupport),
        _ => Ok(()),
    }
}

/// `softmax(QKᵀ/√d', key_mask)·V` for `Q: L_q×d'`, `K: L_k×d'`, `V: L_k×d_v`.
pub fn scaled_dot_attention(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    key_mask: Option<&[bool]>,
) -> Result<Var> {
    let (qs, ks, vs) = (tape.shape(q), tape.shape(k), tape.shape(v));
    if qs.len() != 2 || ks.len() != 2 || vs.len() != 2 || qs[1] != ks[1] || ks[0] != vs[0] {
        return Err(Error::Shape {
            op: "scaled_dot_attention",
            lhs: qs.to_vec(),
            rhs: [ks, vs].concat(),
        });
    }
    let (lq, lk, dk) = (qs[0], ks[0], ks[1]);
    if lk == 0 {
        return Err(Error::EmptyAttentionSupport);
    }
    check_mask(key_mask, lk, "key")?;
    SCORE_MADDS.with(|c| c.set(c.get() + mab_score_cost(lq, lk, dk)));
    let scores = tape.matmul_t(q, k)?;
    let scores = tape.scale(scores, 1.0 / (dk as f64).sqrt());
    let weights = tape.softmax_rows(scores, key_mask)?;
    tape.matmul(weights, v)
}

/// Multihead attention parameters.
///
/// Each projection is one `in×d` matrix whose column block
/// `h·head_dim..(h+1)·head_dim` is head `h`'s projection.
#[derive(Clone, Debug, PartialEq)]
pub struct MhaParams {
    pub w_q: Linear,
    pub w_k: Linear,
    pub w_v: Linear,
    pub w_o: Linear,
    pub num_heads: usize,
    pub dim: usize,
}

impl MhaParams {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        key_dim: usize,
        num_heads: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if num_heads == 0 || dim == 0 || dim % num_heads != 0 {
            return Err(Error::Config(format!(
                "{name}: model dim {dim} not divisible by {num_heads} heads"
            )));
        }
        Ok(Self {
            w_q: Linear::new(store, &format!("{name}.w_q"), dim, dim, rng),
            w_k: Linear::new(store, &format!("{name}.w_k"), key_dim, dim, rng),
            w_v: Linear::new(store, &format!("{name}.w_v"), key_dim, dim, rng),
            w_o: Linear::new(store, &format!("{name}.w_o"), dim, dim, rng),
            num_heads,
            dim,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.num_heads
    }

    pub fn key_dim(&self) -> usize {
        self.w_k.in_dim
    }
}

pub fn multi_head_attention(
    tape: &mut Tape,
    bind: &Binding,
    q: Var,
    k: Var,
    v: Var,
    p: &MhaParams,
    key_mask: Option<&[bool]>,
) -> Result<Var> {
    let qp = p.w_q.forward(tape, bind, q)?;
    let kp = p.w_k.forward(tape, bind, k)?;
    let vp = p.w_v.forward(tape, bind, v)?;
    let hd = p.head_dim();
    let mut heads = Vec::with_capacity(p.num_heads);
    for h in 0..p.num_heads {
        let qh = tape.slice_cols(qp, h * hd, hd)?;
        let kh = tape.slice_cols(kp, h * hd, hd)?;
        let vh = tape.slice_cols(vp, h * hd, hd)?;
        heads.push(scaled_dot_attention(tape, qh, kh, vh, key_mask)?);
    }
    let cat = tape.concat_cols(&heads)?;
    p.w_o.forward(tape, bind, cat)
}

/// Multihead attention block parameters. The pointwise MLP has one hidden
/// layer of width `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct MabParams {
    pub mha: MhaParams,
    pub ff_in: Linear,
    pub ff_out: Linear,
    pub activation: Activation,
}

impl MabParams {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        key_dim: usize,
        num_heads: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mha = MhaParams::new(store, &format!("{name}.mha"), dim, key_dim, num_heads, rng)?;
        Ok(Self {
            mha,
            ff_in: Linear::new(store, &format!("{name}.ff_in"), dim, dim, rng),
            ff_out: Linear::new(store, &format!("{name}.ff_out"), dim, dim, rng),
            activation,
        })
    }

    pub fn dim(&self) -> usize {
        self.mha.dim
    }
}

/// The pointwise half of a MAB: `α(H + MLP(H))`.
pub fn mab_feed_forward(tape: &mut Tape, bind: &Binding, h: Var, p: &MabParams) -> Result<Var> {
    let hidden = p.ff_in.forward(tape, bind, h)?;
    let hidden = p.activation.apply(tape, hidden);
    let mlp = p.ff_out.forward(tape, bind, hidden)?;
    let sum = tape.add(h, mlp)?;
    Ok(p.activation.apply(tape, sum))
}

pub fn mab(
    tape: &mut Tape,
    bind: &Binding,
    q: Var,
    k: Var,
    v: Var,
    p: &MabParams,
    key_mask: Option<&[bool]>,
) -> Result<Var> {
    if tape.shape(q).get(1) != Some(&p.dim()) {
        return Err(Error::Shape {
            op: "mab",
            lhs: tape.shape(q).to_vec(),
            rhs: vec![p.dim()],
        });
    }
    let att = multi_head_attention(tape, bind, q, k, v, &p.mha, key_mask)?;
    let h = tape.add(q, att)?;
    let h = p.activation.apply(tape, h);
    mab_feed_forward(tape, bind, h, p)
}

/// Induced multihead attention block: two MABs routed through `l` learnable
/// induced points of width `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImabParams {
    /// Induced points attend to the keys.
    pub inner: MabParams,
    /// Queries attend to the transformed induced points.
    pub outer: MabParams,
    pub induced: ParamId,
    pub num_induced: usize,
}

impl ImabParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        key_dim: usize,
        num_induced: usize,
        num_heads: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if num_induced == 0 {
            return Err(Error::Config(format!(
                "{name}: need at least one induced point"
            )));
        }
        let inner = MabParams::new(
            store,
            &format!("{name}.inner"),
            dim,
            key_dim,
            num_heads,
            activation,
            rng,
        )?;
        let outer = MabParams::new(
            store,
            &format!("{name}.outer"),
            dim,
            dim,
            num_heads,
            activation,
            rng,
        )?;
        let sd = 1.0 / (dim as f64).sqrt();
        let h: Vec<f64> = (0..num_induced * dim).map(|_| sd * rng.normal()).collect();
        let induced = store.add(
            format!("{name}.induced"),
            Tensor::matrix(num_induced, dim, h)?,
        );
        Ok(Self {
            inner,
            outer,
            induced,
            num_induced,
        })
    }

    pub fn dim(&self) -> usize {
        self.outer.dim()
    }
}

/// `IMAB(q, k, v) = MAB(q, H, H)` where `H = MAB(h, k, v)`.
///
/// `key_mask` applies to the inner block; every induced point is a valid
/// key of the outer block. `query_mask` is only validated: padded query rows
/// are computed like any other row and must be dropped by the caller.
#[allow(clippy::too_many_arguments)]
pub fn imab(
    tape: &mut Tape,
    bind: &Binding,
    q: Var,
    k: Var,
    v: Var,
    p: &ImabParams,
    query_mask: Option<&[bool]>,
    key_mask: Option<&[bool]>,
) -> Result<Var> {
    check_mask(query_mask, tape.shape(q)[0], "query")?;
    let h = bind[p.induced];
    let reference = mab(tape, bind, h, k, v, &p.inner, key_mask)?;
    mab(tape, bind, q, reference, reference, &p.outer, None)
}

/// Either attention block, selected at configuration time.
#[derive(Clone, Debug, PartialEq)]
pub enum AttentionBlock {
    Mab(MabParams),
    Imab(ImabParams),
}

impl AttentionBlock {
    pub fn forward(
        &self,
        tape: &mut Tape,
        bind: &Binding,
        q: Var,
        kv: Var,
        query_mask: Option<&[bool]>,
        key_mask: Option<&[bool]>,
    ) -> Result<Var> {
        match self {
            AttentionBlock::Mab(p) => {
                check_mask(query_mask, tape.shape(q)[0], "query")?;
                mab(tape, bind, q, kv, kv, p, key_mask)
            }
            AttentionBlock::Imab(p) => imab(tape, bind, q, kv, kv, p, query_mask, key_mask),
        }
    }
}
