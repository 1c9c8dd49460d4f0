use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::data::{AsTSRecord, InterpolationInstance, QueryPoint, Triplet};
use crate::model::GaussianPrediction;
use crate::training::gaussian_nll;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    /// Training mean of the query's channel.
    Mean,
    /// Last context value of the query's channel at or before the query time.
    Forward,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Mean => "mean",
            BaselineKind::Forward => "forward",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(BaselineKind::Mean),
            "forward" => Ok(BaselineKind::Forward),
            _ => Err(Error::InvalidArgument(format!(
                "unknown baseline `{s}` (mean|forward)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    #[default]
    PerChannel,
    /// One σ shared by all channels.
    Global,
}

/// 50 log-spaced values from 0.05 to 3.0.
pub fn sigma_grid() -> Vec<f64> {
    let (lo, hi, n) = (0.05f64.ln(), 3.0f64.ln(), 50);
    (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Grid value with the least mean NLL of `residuals`; the first one wins ties.
fn best_sigma(residuals: &[f64], grid: &[f64]) -> Result<f64> {
    let mut best = (f64::INFINITY, grid[0]);
    for &s in grid {
        let mut total = 0.0;
        for &r in residuals {
            total += gaussian_nll(r, 0.0, s)?;
        }
        let nll = total / residuals.len() as f64;
        if nll < best.0 {
            best = (nll, s);
        }
    }
    Ok(best.1)
}

/// Homoscedastic σ per channel minimizing the mean validation NLL of the
/// means produced by `predict_mean`, which sees only context and queries.
/// A channel without validation targets gets the σ fitted on all channels.
pub fn fit_homoscedastic_sigma<F>(
    predict_mean: F,
    val: &[InterpolationInstance],
    grid: &[f64],
    num_channels: usize,
    mode: SigmaMode,
) -> Result<Vec<f64>>
where
    F: Fn(&[Triplet], &[QueryPoint]) -> Result<Vec<f64>>,
{
    if grid.is_empty() || grid.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument(
            "sigma grid must be nonempty and positive".into(),
        ));
    }
    let mut per_channel: Vec<Vec<f64>> = vec![Vec::new(); num_channels];
    let mut all = Vec::new();
    for inst in val {
        let means = predict_mean(&inst.context, &inst.queries)?;
        for ((q, &u), m) in inst.queries.iter().zip(&inst.targets).zip(means) {
            let ch = per_channel
                .get_mut(q.c.wrapping_sub(1))
                .ok_or_else(|| Error::InvalidArgument(format!("channel {} out of range", q.c)))?;
            ch.push(u - m);
            all.push(u - m);
        }
    }
    if all.is_empty() {
        return Err(Error::InvalidArgument(
            "no validation targets to fit sigma".into(),
        ));
    }
    let global = best_sigma(&all, grid)?;
    match mode {
        SigmaMode::Global => Ok(vec![global; num_channels]),
        SigmaMode::PerChannel => per_channel
            .iter()
            .map(|r| {
                if r.is_empty() {
                    Ok(global)
                } else {
                    best_sigma(r, grid)
                }
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    /// Training mean of each channel (0 for channels never observed).
    pub channel_means: Vec<f64>,
    pub sigma: Vec<f64>,
}

fn channel(c: usize, n: usize) -> Result<usize> {
    if c == 0 || c > n {
        return Err(Error::InvalidArgument(format!(
            "unknown channel {c} (have {n})"
        )));
    }
    Ok(c - 1)
}

impl BaselineModel {
    /// Channel means from `train`, σ fitted on `val` over `grid`.
    pub fn fit(
        kind: BaselineKind,
        train: &[AsTSRecord],
        val: &[InterpolationInstance],
        num_channels: usize,
        grid: &[f64],
        mode: SigmaMode,
    ) -> Result<Self> {
        let mut sums = vec![(0.0, 0usize); num_channels];
        for x in train.iter().flat_map(|r| &r.observations) {
            let s = &mut sums[channel(x.c, num_channels)?];
            s.0 += x.u;
            s.1 += 1;
        }
        let mut model = Self {
            kind,
            channel_means: sums
                .iter()
                .map(|&(s, n)| if n > 0 { s / n as f64 } else { 0.0 })
                .collect(),
            sigma: vec![1.0; num_channels],
        };
        model.sigma = fit_homoscedastic_sigma(
            |c, q| model.predict_means(c, q),
            val,
            grid,
            num_channels,
            mode,
        )?;
        Ok(model)
    }

    pub fn num_channels(&self) -> usize {
        self.channel_means.len()
    }

    pub fn predict_means(&self, context: &[Triplet], queries: &[QueryPoint]) -> Result<Vec<f64>> {
        let n = self.num_channels();
        queries
            .iter()
            .map(|q| {
                let c = channel(q.c, n)?;
                Ok(match self.kind {
                    BaselineKind::Mean => self.channel_means[c],
                    BaselineKind::Forward => forward_value(context, q),
                })
            })
            .collect()
    }
}

/// Value of the latest context triplet of the query's channel with time at or
/// before the query time; the earliest-listed triplet wins equal times. Zero
/// when there is none.
pub fn forward_value(context: &[Triplet], query: &QueryPoint) -> f64 {
    let mut best: Option<&Triplet> = None;
    for x in context.iter().filter(|x| x.c == query.c && x.t <= query.t) {
        if best.is_none_or(|b| x.t > b.t) {
            best = Some(x);
        }
    }
    best.map_or(0.0, |x| x.u)
}

impl Predictor for BaselineModel {
    fn predict(&self, context: &[Triplet], queries: &[QueryPoint]) -> Result<GaussianPrediction> {
        let mean = self.predict_means(context, queries)?;
        let std = queries.iter().map(|q| self.sigma[q.c - 1]).collect();
        Ok(GaussianPrediction { mean, std })
    }

    fn name(&self) -> String {
        self.kind.name().into()
    }

    fn fingerprint(&self) -> Result<String> {
        Ok(super::sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }
}
