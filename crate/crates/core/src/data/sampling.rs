//! The two ways a record is split into conditioning and target time points.

use serde::{Deserialize, Serialize};

use super::{AsTSRecord, InterpolationInstance, Triplet};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Targets are a uniformly random subset of the time points.
    Random,
    /// Targets are a contiguous window of sorted time points.
    Burst,
}

impl Sampler {
    pub fn name(self) -> &'static str {
        match self {
            Sampler::Random => "random",
            Sampler::Burst => "burst",
        }
    }

    pub fn sample(
        self,
        record: &AsTSRecord,
        observed_frac: f64,
        seed: u64,
    ) -> Result<InterpolationInstance> {
        match self {
            Sampler::Random => sample_random_missing(record, observed_frac, seed),
            Sampler::Burst => sample_burst_missing(record, observed_frac, seed),
        }
    }
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Sampler::Random),
            "burst" => Ok(Sampler::Burst),
            other => Err(Error::InvalidArgument(format!("unknown sampler {other:?}"))),
        }
    }
}

/// `⌈observed_frac · n⌉`, ignoring float noise below `1e-9` (so
/// `0.1 · 30` gives 3, not 4).
pub fn conditioning_count(n_times: usize, observed_frac: f64) -> usize {
    (observed_frac * n_times as f64 - 1e-9).ceil().max(0.0) as usize
}

fn check(record: &AsTSRecord, observed_frac: f64) -> Result<Vec<f64>> {
    if !(observed_frac > 0.0 && observed_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "observed_frac must be in (0, 1), got {observed_frac}"
        )));
    }
    let times = record.times();
    if times.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "record {} has {} time points, need at least 2",
            record.id,
            times.len()
        )));
    }
    Ok(times)
}

/// Splits observations by whether their time is flagged as a target time.
fn split(record: &AsTSRecord, times: &[f64], is_target: &[bool]) -> Result<InterpolationInstance> {
    let target_at = |t: f64| {
        let i = times
            .binary_search_by(|x| x.total_cmp(&t))
            .expect("observation time is in the record's time set");
        is_target[i]
    };
    let mut context: Vec<Triplet> = Vec::new();
    let mut queries = Vec::new();
    let mut targets = Vec::new();
    for x in &record.observations {
        if target_at(x.t) {
            queries.push(x.query());
            targets.push(x.u);
        } else {
            context.push(*x);
        }
    }
    InterpolationInstance::new(context, queries, targets)
}

/// Conditions on `⌈observed_frac·|T|⌉` uniformly chosen time points and
/// targets every observation at the remaining ones.
pub fn sample_random_missing(
    record: &AsTSRecord,
    observed_frac: f64,
    seed: u64,
) -> Result<InterpolationInstance> {
    let times = check(record, observed_frac)?;
    let n = times.len();
    let n_cond = conditioning_count(n, observed_frac);
    if n_cond >= n {
        return Err(Error::InvalidArgument(format!(
            "record {}: no target time left ({n_cond} of {n} conditioning)",
            record.id
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let mut is_target = vec![true; n];
    for &i in &order[..n_cond] {
        is_target[i] = false;
    }
    split(record, &times, &is_target)
}

/// Targets `p = |T| − ⌈observed_frac·|T|⌉` consecutive sorted time points
/// starting at a uniformly drawn feasible index.
pub fn sample_burst_missing(
    record: &AsTSRecord,
    observed_frac: f64,
    seed: u64,
) -> Result<InterpolationInstance> {
    let times = check(record, observed_frac)?;
    let n = times.len();
    let p = n - conditioning_count(n, observed_frac).min(n);
    if p == 0 {
        return Err(Error::InvalidArgument(format!(
            "record {}: burst window is empty",
            record.id
        )));
    }
    let start = Rng::new(seed).index(n - p + 1);
    let is_target: Vec<bool> = (0..n).map(|i| i >= start && i < start + p).collect();
    split(record, &times, &is_target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn record(n: usize, channels: usize) -> AsTSRecord {
        let mut obs = Vec::new();
        for k in 0..n {
            for c in 1..=channels {
                if (k + c) % 2 == 0 || c == 1 {
                    obs.push(Triplet::new(k as f64 / n as f64, c, (k * c) as f64));
                }
            }
        }
        AsTSRecord::new("r", obs).unwrap()
    }

    fn time_sets(inst: &InterpolationInstance) -> (BTreeSet<u64>, BTreeSet<u64>) {
        let ctx = inst.context.iter().map(|x| x.t.to_bits()).collect();
        let tgt = inst.queries.iter().map(|q| q.t.to_bits()).collect();
        (ctx, tgt)
    }

    #[test]
    fn random_half_partitions_times() {
        let r = record(10, 2);
        let inst = sample_random_missing(&r, 0.5, 1).unwrap();
        let (ctx, tgt) = time_sets(&inst);
        assert_eq!(ctx.len(), 5);
        assert_eq!(tgt.len(), 5);
        assert!(ctx.is_disjoint(&tgt));
        let all: BTreeSet<u64> = r.times().iter().map(|t| t.to_bits()).collect();
        assert_eq!(ctx.union(&tgt).cloned().collect::<BTreeSet<_>>(), all);
        assert_eq!(inst.context.len() + inst.queries.len(), r.len());
    }

    #[test]
    fn ninety_percent_leaves_one_target_time() {
        let inst = sample_random_missing(&record(10, 1), 0.9, 3).unwrap();
        let (ctx, tgt) = time_sets(&inst);
        assert_eq!((ctx.len(), tgt.len()), (9, 1));
    }

    #[test]
    fn rounding_ignores_float_noise() {
        assert_eq!(conditioning_count(30, 0.1), 3);
        assert_eq!(conditioning_count(10, 0.9), 9);
        assert_eq!(conditioning_count(7, 0.5), 4);
        assert_eq!(conditioning_count(40, 0.5), 20);
    }

    #[test]
    fn samplers_are_deterministic() {
        let r = record(25, 3);
        for s in [Sampler::Random, Sampler::Burst] {
            let a = serde_json::to_string(&s.sample(&r, 0.5, 42).unwrap()).unwrap();
            let b = serde_json::to_string(&s.sample(&r, 0.5, 42).unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn burst_window_is_contiguous() {
        let r = record(10, 2);
        let times = r.times();
        for seed in 0..100 {
            let inst = sample_burst_missing(&r, 0.5, seed).unwrap();
            let (ctx, tgt) = time_sets(&inst);
            assert!(ctx.is_disjoint(&tgt));
            assert_eq!(ctx.len() + tgt.len(), times.len());
            let idx: Vec<usize> = times
                .iter()
                .enumerate()
                .filter(|(_, t)| tgt.contains(&t.to_bits()))
                .map(|(i, _)| i)
                .collect();
            assert_eq!(idx.len(), 5);
            assert!(
                idx.windows(2).all(|w| w[1] == w[0] + 1),
                "seed {seed}: {idx:?}"
            );
        }
    }

    #[test]
    fn burst_and_random_coincide_when_window_is_forced() {
        // Two time points at 50%: one conditioning, one target. Burst has two
        // windows, random has two subsets; each burst draw is some random draw.
        let r = record(2, 1);
        let random: Vec<_> = (0..20)
            .map(|s| sample_random_missing(&r, 0.5, s).unwrap())
            .collect();
        for s in 0..20 {
            let b = sample_burst_missing(&r, 0.5, s).unwrap();
            assert!(random.contains(&b));
        }
    }

    #[test]
    fn errors() {
        let r = record(10, 1);
        assert!(sample_random_missing(&r, 0.0, 0).is_err());
        assert!(sample_random_missing(&r, 1.0, 0).is_err());
        assert!(sample_random_missing(&record(1, 1), 0.5, 0).is_err());
        // ⌈0.95·10⌉ = 10 leaves nothing to predict
        assert!(sample_random_missing(&r, 0.95, 0).is_err());
        assert!(sample_burst_missing(&r, 0.95, 0).is_err());
    }
}
