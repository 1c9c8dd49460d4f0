//! Outlier removal, time rescaling and per-channel standardisation, all
//! fitted on the training split only.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{AsTSRecord, Triplet};
use crate::{Error, Result};

/// Quantile of the training observations above which values are dropped.
pub const OUTLIER_QUANTILE: f64 = 0.999;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub upper_bound: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub time_min: f64,
    pub time_max: f64,
    /// Indexed by 0-based channel.
    pub channels: Vec<ChannelStats>,
}

/// Linearly interpolated quantile of an ascending slice (`q` in `[0, 1]`).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

impl Preprocessor {
    pub fn fit(train: &[AsTSRecord], num_channels: usize) -> Result<Self> {
        let mut per_channel: Vec<Vec<f64>> = vec![Vec::new(); num_channels];
        for x in train.iter().flat_map(|r| &r.observations) {
            if x.c > num_channels {
                return Err(Error::Validation(format!(
                    "channel {} exceeds channel count {num_channels}",
                    x.c
                )));
            }
            per_channel[x.c - 1].push(x.u);
        }
        let mut bounds = Vec::with_capacity(num_channels);
        for (c, vals) in per_channel.iter_mut().enumerate() {
            if vals.is_empty() {
                return Err(Error::Validation(format!(
                    "channel {} has no training observations",
                    c + 1
                )));
            }
            vals.sort_by(f64::total_cmp);
            bounds.push(percentile(vals, OUTLIER_QUANTILE));
        }

        let kept: Vec<&Triplet> = train
            .iter()
            .flat_map(|r| &r.observations)
            .filter(|x| x.u <= bounds[x.c - 1])
            .collect();
        let time_min = kept.iter().map(|x| x.t).fold(f64::INFINITY, f64::min);
        let time_max = kept.iter().map(|x| x.t).fold(f64::NEG_INFINITY, f64::max);

        let mut sums = vec![(0usize, 0.0f64); num_channels];
        for x in &kept {
            let s = &mut sums[x.c - 1];
            s.0 += 1;
            s.1 += x.u;
        }
        let means: Vec<f64> = sums
            .iter()
            .map(|&(n, s)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        let mut sq = vec![0.0f64; num_channels];
        for x in &kept {
            sq[x.c - 1] += (x.u - means[x.c - 1]).powi(2);
        }

        let channels = (0..num_channels)
            .map(|c| {
                let n = sums[c].0;
                let mut sd = if n > 0 {
                    (sq[c] / n as f64).sqrt()
                } else {
                    0.0
                };
                if !(sd > 0.0) {
                    warn!("channel {} has zero variance on train; using sd = 1", c + 1);
                    sd = 1.0;
                }
                ChannelStats {
                    upper_bound: bounds[c],
                    mean: means[c],
                    sd,
                }
            })
            .collect();
        Ok(Self {
            time_min,
            time_max,
            channels,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn scale_time(&self, t: f64) -> f64 {
        let span = self.time_max - self.time_min;
        if span > 0.0 {
            (t - self.time_min) / span
        } else {
            0.0
        }
    }

    pub fn standardize(&self, c: usize, u: f64) -> f64 {
        let s = &self.channels[c - 1];
        (u - s.mean) / s.sd
    }

    pub fn unstandardize(&self, c: usize, z: f64) -> f64 {
        let s = &self.channels[c - 1];
        z * s.sd + s.mean
    }

    /// Drops outliers, rescales time and standardises values.
    pub fn apply(&self, record: &AsTSRecord) -> Result<AsTSRecord> {
        let mut obs = Vec::with_capacity(record.len());
        for x in &record.observations {
            let stats = self.channels.get(x.c - 1).ok_or_else(|| {
                Error::Validation(format!("record {}: unknown channel {}", record.id, x.c))
            })?;
            if x.u > stats.upper_bound {
                continue;
            }
            obs.push(Triplet::new(
                self.scale_time(x.t),
                x.c,
                self.standardize(x.c, x.u),
            ));
        }
        AsTSRecord::new(record.id.clone(), obs)
    }
}

/// Fits on `records[train_idx]` and applies to every record.
pub fn preprocess(
    records: &[AsTSRecord],
    train_idx: &[usize],
    num_channels: usize,
) -> Result<(Vec<AsTSRecord>, Preprocessor)> {
    let train: Vec<AsTSRecord> = train_idx
        .iter()
        .map(|&i| {
            records
                .get(i)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("train index {i} out of range")))
        })
        .collect::<Result<_>>()?;
    let pre = Preprocessor::fit(&train, num_channels)?;
    let out = records
        .iter()
        .map(|r| pre.apply(r))
        .collect::<Result<Vec<_>>>()?;
    Ok((out, pre))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn record(id: &str, obs: Vec<(f64, usize, f64)>) -> AsTSRecord {
        AsTSRecord::new(
            id,
            obs.into_iter()
                .map(|(t, c, u)| Triplet::new(t, c, u))
                .collect(),
        )
        .unwrap()
    }

    fn train_moments(recs: &[AsTSRecord], c: usize) -> (f64, f64) {
        let v: Vec<f64> = recs
            .iter()
            .flat_map(|r| &r.observations)
            .filter(|x| x.c == c)
            .map(|x| x.u)
            .collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        (m, sd)
    }

    #[test]
    fn output_is_standardized_on_train() {
        let mut rng = Rng::new(0);
        let recs: Vec<AsTSRecord> = (0..20)
            .map(|i| {
                record(
                    &format!("r{i}"),
                    (0..30).map(|k| (k as f64, 1, rng.normal())).collect(),
                )
            })
            .collect();
        let train: Vec<usize> = (0..15).collect();
        let (out, _) = preprocess(&recs, &train, 1).unwrap();
        let (m, sd) = train_moments(&out[..15], 1);
        assert!(m.abs() < 1e-10);
        assert!((sd - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gross_outlier_removed() {
        let mut obs: Vec<(f64, usize, f64)> =
            (0..1000).map(|k| (k as f64, 1, (k % 15) as f64)).collect();
        obs.push((1000.0, 1, 700.0));
        let recs = vec![record("ph", obs)];
        let (out, pre) = preprocess(&recs, &[0], 1).unwrap();
        assert!(pre.channels[0].upper_bound < 700.0);
        assert_eq!(out[0].len(), 1000);
        let max = out[0]
            .observations
            .iter()
            .map(|x| pre.unstandardize(1, x.u))
            .fold(f64::MIN, f64::max);
        assert!(max <= 14.0 + 1e-9);
    }

    #[test]
    fn time_rescaling() {
        // equal values so the outlier bound keeps every observation
        let recs = vec![record(
            "a",
            vec![(2.0, 1, 1.0), (4.0, 1, 1.0), (6.0, 1, 1.0)],
        )];
        let (out, _) = preprocess(&recs, &[0], 1).unwrap();
        let ts: Vec<f64> = out[0].observations.iter().map(|x| x.t).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn channel_without_train_data_fails() {
        let recs = vec![
            record("a", vec![(0.0, 1, 1.0)]),
            record("b", vec![(0.0, 2, 1.0)]),
        ];
        assert!(preprocess(&recs, &[0], 2).is_err());
    }

    #[test]
    fn constant_channel_gets_unit_sd() {
        let recs = vec![record("a", vec![(0.0, 1, 3.0), (1.0, 1, 3.0)])];
        let (out, pre) = preprocess(&recs, &[0], 1).unwrap();
        assert_eq!(pre.channels[0].sd, 1.0);
        assert!(out[0].observations.iter().all(|x| x.u == 0.0));
    }

    #[test]
    fn percentile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(percentile(&v, 0.0), 0.0);
        assert_eq!(percentile(&v, 1.0), 3.0);
        assert!((percentile(&v, 0.5) - 1.5).abs() < 1e-15);
    }
}
