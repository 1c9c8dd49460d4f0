//! Vector encodings of triplets and queries, and zero-padded batches.

use super::{InterpolationInstance, QueryPoint, Triplet};
use crate::tensor::Tensor;
use crate::{Error, Result};

fn check_channel(c: usize, num_channels: usize) -> Result<()> {
    if c == 0 || c > num_channels {
        return Err(Error::InvalidArgument(format!(
            "channel {c} outside 1..={num_channels}"
        )));
    }
    Ok(())
}

fn one_hot_channel(row: &[f64], num_channels: usize) -> Result<usize> {
    let block = &row[1..1 + num_channels];
    let mut hit = None;
    for (i, &v) in block.iter().enumerate() {
        if v == 1.0 && hit.is_none() {
            hit = Some(i + 1);
        } else if v != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "not a one-hot block: {block:?}"
            )));
        }
    }
    hit.ok_or_else(|| Error::InvalidArgument("empty one-hot block".into()))
}

/// Rows `[t, onehot(c; C), u]`, width `C + 2`.
pub fn encode_context(triplets: &[Triplet], num_channels: usize) -> Result<Tensor> {
    let w = num_channels + 2;
    let mut data = vec![0.0; triplets.len() * w];
    for (i, x) in triplets.iter().enumerate() {
        check_channel(x.c, num_channels)?;
        let row = &mut data[i * w..(i + 1) * w];
        row[0] = x.t;
        row[x.c] = 1.0;
        row[w - 1] = x.u;
    }
    Tensor::matrix(triplets.len(), w, data)
}

pub fn decode_context_row(row: &[f64], num_channels: usize) -> Result<Triplet> {
    if row.len() != num_channels + 2 {
        return Err(Error::InvalidArgument(format!(
            "row width {} != C + 2",
            row.len()
        )));
    }
    Ok(Triplet::new(
        row[0],
        one_hot_channel(row, num_channels)?,
        row[num_channels + 1],
    ))
}

/// Rows `[t', onehot(c'; C)]`, width `C + 1`.
pub fn encode_queries(queries: &[QueryPoint], num_channels: usize) -> Result<Tensor> {
    let w = num_channels + 1;
    let mut data = vec![0.0; queries.len() * w];
    for (i, q) in queries.iter().enumerate() {
        check_channel(q.c, num_channels)?;
        data[i * w] = q.t;
        data[i * w + q.c] = 1.0;
    }
    Tensor::matrix(queries.len(), w, data)
}

pub fn decode_query_row(row: &[f64], num_channels: usize) -> Result<QueryPoint> {
    if row.len() != num_channels + 1 {
        return Err(Error::InvalidArgument(format!(
            "row width {} != C + 1",
            row.len()
        )));
    }
    Ok(QueryPoint {
        t: row[0],
        c: one_hot_channel(row, num_channels)?,
    })
}

/// Instances padded to common context/query lengths.
///
/// Padded rows are zero vectors with a `false` mask entry; padded targets
/// are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// `[B × s_max × (C+2)]`
    pub context: Tensor,
    /// `[B × s_max]`, row-major
    pub context_mask: Vec<bool>,
    /// `[B × r_max × (C+1)]`
    pub queries: Tensor,
    /// `[B × r_max]`
    pub query_mask: Vec<bool>,
    /// `[B × r_max]`
    pub targets: Vec<f64>,
    pub num_channels: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.context.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_context(&self) -> usize {
        self.context.shape()[1]
    }

    pub fn max_queries(&self) -> usize {
        self.queries.shape()[1]
    }

    fn slab(t: &Tensor, b: usize) -> Tensor {
        let (rows, cols) = (t.shape()[1], t.shape()[2]);
        let n = rows * cols;
        Tensor::matrix(rows, cols, t.data()[b * n..(b + 1) * n].to_vec()).expect("slab shape")
    }

    /// Padded `[s_max × (C+2)]` context matrix of instance `b`.
    pub fn context_matrix(&self, b: usize) -> Tensor {
        Self::slab(&self.context, b)
    }

    pub fn context_mask(&self, b: usize) -> &[bool] {
        let s = self.max_context();
        &self.context_mask[b * s..(b + 1) * s]
    }

    pub fn query_matrix(&self, b: usize) -> Tensor {
        Self::slab(&self.queries, b)
    }

    pub fn query_mask(&self, b: usize) -> &[bool] {
        let r = self.max_queries();
        &self.query_mask[b * r..(b + 1) * r]
    }

    pub fn targets(&self, b: usize) -> &[f64] {
        let r = self.max_queries();
        &self.targets[b * r..(b + 1) * r]
    }
}

pub fn batch_pad(instances: &[InterpolationInstance], num_channels: usize) -> Result<Batch> {
    if instances.is_empty() {
        return Err(Error::InvalidArgument("cannot batch zero instances".into()));
    }
    let b = instances.len();
    let s_max = instances.iter().map(|i| i.context.len()).max().unwrap_or(0);
    let r_max = instances.iter().map(|i| i.queries.len()).max().unwrap_or(0);
    let (cw, qw) = (num_channels + 2, num_channels + 1);

    let mut context = vec![0.0; b * s_max * cw];
    let mut context_mask = vec![false; b * s_max];
    let mut queries = vec![0.0; b * r_max * qw];
    let mut query_mask = vec![false; b * r_max];
    let mut targets = vec![0.0; b * r_max];
    for (k, inst) in instances.iter().enumerate() {
        let ctx = encode_context(&inst.context, num_channels)?;
        let off = k * s_max * cw;
        context[off..off + ctx.len()].copy_from_slice(ctx.data());
        context_mask[k * s_max..k * s_max + inst.context.len()].fill(true);

        let q = encode_queries(&inst.queries, num_channels)?;
        let off = k * r_max * qw;
        queries[off..off + q.len()].copy_from_slice(q.data());
        query_mask[k * r_max..k * r_max + inst.queries.len()].fill(true);
        targets[k * r_max..k * r_max + inst.targets.len()].copy_from_slice(&inst.targets);
    }
    Ok(Batch {
        context: Tensor::new(&[b, s_max, cw], context)?,
        context_mask,
        queries: Tensor::new(&[b, r_max, qw], queries)?,
        query_mask,
        targets,
        num_channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn context_row_layout() {
        let m = encode_context(&[Triplet::new(0.5, 2, 1.3)], 3).unwrap();
        assert_eq!(m.data(), &[0.5, 0.0, 1.0, 0.0, 1.3]);
        let m = encode_context(&[Triplet::new(0.2, 1, -4.0)], 1).unwrap();
        assert_eq!(m.data(), &[0.2, 1.0, -4.0]);
    }

    #[test]
    fn query_row_layout() {
        let m = encode_queries(&[QueryPoint { t: 0.25, c: 1 }], 2).unwrap();
        assert_eq!(m.data(), &[0.25, 1.0, 0.0]);
        for c in 1..5 {
            assert_eq!(
                encode_queries(&[QueryPoint { t: 0.0, c: 1 }], c)
                    .unwrap()
                    .cols(),
                c + 1
            );
        }
    }

    #[test]
    fn out_of_range_channel() {
        assert!(encode_context(&[Triplet::new(0.0, 4, 0.0)], 3).is_err());
        assert!(encode_queries(&[QueryPoint { t: 0.0, c: 0 }], 3).is_err());
    }

    #[test]
    fn round_trips() {
        let mut rng = Rng::new(0);
        let c = 5;
        let trips: Vec<Triplet> = (0..1000)
            .map(|_| Triplet::new(rng.uniform(), 1 + rng.index(c), rng.normal()))
            .collect();
        let m = encode_context(&trips, c).unwrap();
        for (i, x) in trips.iter().enumerate() {
            assert_eq!(decode_context_row(m.row(i), c).unwrap(), *x);
        }
        let qs: Vec<QueryPoint> = trips.iter().map(Triplet::query).collect();
        let m = encode_queries(&qs, c).unwrap();
        for (i, q) in qs.iter().enumerate() {
            assert_eq!(decode_query_row(m.row(i), c).unwrap(), *q);
        }
    }

    fn instance(s: usize, r: usize) -> InterpolationInstance {
        InterpolationInstance::new(
            (0..s)
                .map(|k| Triplet::new(k as f64 / 10.0, 1 + k % 2, k as f64))
                .collect(),
            (0..r)
                .map(|k| QueryPoint {
                    t: 0.05 + k as f64 / 10.0,
                    c: 2,
                })
                .collect(),
            (0..r).map(|k| -(k as f64)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_instance_has_no_padding() {
        let b = batch_pad(&[instance(3, 2)], 2).unwrap();
        assert!(b.context_mask.iter().all(|&m| m));
        assert!(b.query_mask.iter().all(|&m| m));
        assert_eq!(b.context.shape(), &[1, 3, 4]);
    }

    #[test]
    fn shorter_instance_is_padded() {
        let insts = [instance(3, 1), instance(5, 4)];
        let b = batch_pad(&insts, 2).unwrap();
        assert_eq!(b.max_context(), 5);
        assert_eq!(b.context_mask(0), &[true, true, true, false, false]);
        assert_eq!(b.query_mask(0), &[true, false, false, false]);
        let m = b.context_matrix(0);
        for i in 3..5 {
            assert!(m.row(i).iter().all(|&v| v == 0.0));
        }
        for (k, inst) in insts.iter().enumerate() {
            let m = b.context_matrix(k);
            for (i, x) in inst.context.iter().enumerate() {
                assert_eq!(decode_context_row(m.row(i), 2).unwrap(), *x);
            }
            let q = b.query_matrix(k);
            for (i, x) in inst.queries.iter().enumerate() {
                assert_eq!(decode_query_row(q.row(i), 2).unwrap(), *x);
                assert_eq!(b.targets(k)[i], inst.targets[i]);
            }
        }
        assert_eq!(b.targets(0)[1..], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(batch_pad(&[], 2).is_err());
    }
}
