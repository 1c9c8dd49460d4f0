//! Accumulating row-major kernels. Every product kernel adds into `out`.

use crate::{Error, Result};

/// `out[m×n] += a[m×k] · b[k×n]`
pub(crate) fn matmul_nn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        let arow = &a[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[n×k]ᵀ`
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] += dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · b[m×n]`
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for r in 0..m {
        let arow = &a[r * k..(r + 1) * k];
        let brow = &b[r * n..(r + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub(crate) fn softmax_row(x: &[f64], mask: Option<&[bool]>, out: &mut [f64]) -> Result<()> {
    let keep = |j: usize| mask.map_or(true, |m| m[j]);
    let mut max = f64::NEG_INFINITY;
    let mut any = false;
    for (j, &v) in x.iter().enumerate() {
        if keep(j) {
            any = true;
            if v > max {
                max = v;
            }
        }
    }
    if !any {
        return Err(Error::EmptyAttentionSupport);
    }
    let mut total = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        if keep(j) {
            let e = (x[j] - max).exp();
            *o = e;
            total += e;
        } else {
            *o = 0.0;
        }
    }
    let inv = 1.0 / total;
    for (j, o) in out.iter_mut().enumerate() {
        if keep(j) {
            *o *= inv;
        }
    }
    Ok(())
}
