//! Asynchronous time series as sets of `(time, channel, value)` triplets.
//!
//! Channels are 1-based everywhere outside the one-hot encoders.

mod batch;
mod io;
mod preprocess;
mod sampling;
mod synthetic;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use batch::{
    batch_pad, decode_context_row, decode_query_row, encode_context, encode_queries, Batch,
};
pub use io::{load_jsonl, save_jsonl};
pub use preprocess::{percentile, preprocess, ChannelStats, Preprocessor};
pub use sampling::{conditioning_count, sample_burst_missing, sample_random_missing, Sampler};
pub use synthetic::{
    generate_sine_mts, make_synthetic_asts, sine_series, DenseSeries, SineComponent, SineConfig,
};

/// One observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "(f64, usize, f64)", try_from = "(f64, i64, f64)")]
pub struct Triplet {
    pub t: f64,
    pub c: usize,
    pub u: f64,
}

impl Triplet {
    pub fn new(t: f64, c: usize, u: f64) -> Self {
        Self { t, c, u }
    }

    pub fn query(&self) -> QueryPoint {
        QueryPoint {
            t: self.t,
            c: self.c,
        }
    }
}

impl From<Triplet> for (f64, usize, f64) {
    fn from(x: Triplet) -> Self {
        (x.t, x.c, x.u)
    }
}

impl TryFrom<(f64, i64, f64)> for Triplet {
    type Error = String;

    fn try_from((t, c, u): (f64, i64, f64)) -> Result<Self, String> {
        if c < 1 {
            return Err(format!("channel index must be >= 1, got {c}"));
        }
        Ok(Triplet {
            t,
            c: c as usize,
            u,
        })
    }
}

/// A `(time, channel)` pair whose value is to be predicted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryPoint {
    pub t: f64,
    pub c: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsTSRecord {
    pub id: String,
    pub observations: Vec<Triplet>,
}

impl AsTSRecord {
    pub fn new(id: impl Into<String>, observations: Vec<Triplet>) -> Result<Self> {
        let r = Self {
            id: id.into(),
            observations,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.observations.len());
        for x in &self.observations {
            if x.c < 1 {
                return Err(Error::Validation(format!(
                    "record {}: channel index must be >= 1",
                    self.id
                )));
            }
            if !x.t.is_finite() || !x.u.is_finite() {
                return Err(Error::Validation(format!(
                    "record {}: non-finite observation {x:?}",
                    self.id
                )));
            }
            if !seen.insert((x.t.to_bits(), x.c)) {
                return Err(Error::Validation(format!(
                    "record {}: duplicate observation at t={} c={}",
                    self.id, x.t, x.c
                )));
            }
        }
        Ok(())
    }

    /// Distinct observation times, ascending.
    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.observations.iter().map(|x| x.t).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    pub fn max_channel(&self) -> usize {
        self.observations.iter().map(|x| x.c).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Conditioning set, queries and the ground truth at those queries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationInstance {
    pub context: Vec<Triplet>,
    pub queries: Vec<QueryPoint>,
    pub targets: Vec<f64>,
}

impl InterpolationInstance {
    pub fn new(context: Vec<Triplet>, queries: Vec<QueryPoint>, targets: Vec<f64>) -> Result<Self> {
        if context.is_empty() {
            return Err(Error::Validation("instance has an empty context".into()));
        }
        if queries.is_empty() || queries.len() != targets.len() {
            return Err(Error::Validation(format!(
                "instance needs matching non-empty queries/targets, got {}/{}",
                queries.len(),
                targets.len()
            )));
        }
        Ok(Self {
            context,
            queries,
            targets,
        })
    }
}

/// Records plus the channel count `C` they live in.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<AsTSRecord>,
    pub num_channels: usize,
}

impl Dataset {
    pub fn new(records: Vec<AsTSRecord>) -> Self {
        let num_channels = records
            .iter()
            .map(AsTSRecord::max_channel)
            .max()
            .unwrap_or(0);
        Self {
            records,
            num_channels,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_time_channel_rejected() {
        let obs = vec![Triplet::new(0.1, 1, 0.0), Triplet::new(0.1, 1, 2.0)];
        assert!(matches!(
            AsTSRecord::new("a", obs),
            Err(Error::Validation(_))
        ));
        let obs = vec![Triplet::new(0.1, 1, 0.0), Triplet::new(0.1, 2, 2.0)];
        assert!(AsTSRecord::new("a", obs).is_ok());
    }

    #[test]
    fn times_are_sorted_and_distinct() {
        let r = AsTSRecord::new(
            "a",
            vec![
                Triplet::new(0.5, 1, 0.0),
                Triplet::new(0.1, 2, 0.0),
                Triplet::new(0.5, 2, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(r.times(), vec![0.1, 0.5]);
    }

    #[test]
    fn triplet_json_is_a_tuple() {
        let s = serde_json::to_string(&Triplet::new(0.5, 2, 1.25)).unwrap();
        assert_eq!(s, "[0.5,2,1.25]");
        assert!(serde_json::from_str::<Triplet>("[0.5,0,1.0]").is_err());
    }
}
