//! Baselines, evaluation reports, data splits and experiment manifests.

mod baseline;
mod bench;
mod experiment;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    preprocess, AsTSRecord, Dataset, InterpolationInstance, Preprocessor, QueryPoint, Sampler,
    Triplet,
};
use crate::model::{GaussianPrediction, Tripletformer, TripletformerConfig};
use crate::rng::{derive_seed, record_seed, Rng};
use crate::training::{mean_nll, mean_squared_error, TrainConfig};
use crate::{Error, Result};

pub use baseline::{
    fit_homoscedastic_sigma, forward_value, sigma_grid, BaselineKind, BaselineModel, SigmaMode,
};
pub use bench::{benchmark_attention, AttentionBenchRow};
pub use experiment::{
    aggregate, run_experiment, run_manifest, Aggregate, DatasetSource, ExperimentManifest,
    ExperimentResult, ModelSpec,
};

/// Anything that turns a context set and query points into Gaussians.
/// Target values are never passed in.
pub trait Predictor {
    fn predict(&self, context: &[Triplet], queries: &[QueryPoint]) -> Result<GaussianPrediction>;

    fn name(&self) -> String;

    /// Hex SHA-256 of the predictor's full serialized state.
    fn fingerprint(&self) -> Result<String>;
}

impl Predictor for Tripletformer {
    fn predict(&self, context: &[Triplet], queries: &[QueryPoint]) -> Result<GaussianPrediction> {
        Tripletformer::predict(self, context, queries)
    }

    fn name(&self) -> String {
        "tripletformer".into()
    }

    fn fingerprint(&self) -> Result<String> {
        Ok(sha256_hex(self.to_checkpoint().to_json()?.as_bytes()))
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub model: String,
    pub sampler: Sampler,
    pub observed_frac: f64,
    pub seed: u64,
    pub nll_mean: f64,
    pub mse_mean: f64,
    pub n_targets: usize,
    pub wall_seconds: f64,
    pub config_fingerprint: String,
}

impl EvalReport {
    /// The report with `wall_seconds` zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// One instance per record with at least two distinct times, each sampled
/// with its record-derived seed.
pub fn sample_instances(
    records: &[AsTSRecord],
    sampler: Sampler,
    observed_frac: f64,
    seed: u64,
) -> Result<Vec<InterpolationInstance>> {
    records
        .iter()
        .filter(|r| r.times().len() >= 2)
        .map(|r| sampler.sample(r, observed_frac, record_seed(seed, &r.id)))
        .collect()
}

/// Pooled predictions and targets over `instances`.
pub fn predict_pooled(
    predictor: &dyn Predictor,
    instances: &[InterpolationInstance],
) -> Result<(GaussianPrediction, Vec<f64>)> {
    let mut pred = GaussianPrediction {
        mean: Vec::new(),
        std: Vec::new(),
    };
    let mut targets = Vec::new();
    for inst in instances {
        let p = predictor.predict(&inst.context, &inst.queries)?;
        if p.len() != inst.targets.len() {
            return Err(Error::Validation(format!(
                "{} returned {} predictions for {} queries",
                predictor.name(),
                p.len(),
                inst.targets.len()
            )));
        }
        pred.mean.extend(p.mean);
        pred.std.extend(p.std);
        targets.extend_from_slice(&inst.targets);
    }
    Ok((pred, targets))
}

/// Mean NLL and MSE over every target of the test records.
pub fn evaluate(
    predictor: &dyn Predictor,
    dataset: &str,
    test: &[AsTSRecord],
    sampler: Sampler,
    observed_frac: f64,
    seed: u64,
) -> Result<EvalReport> {
    let start = Instant::now();
    let instances = sample_instances(test, sampler, observed_frac, seed)?;
    let (pred, targets) = predict_pooled(predictor, &instances)?;
    Ok(EvalReport {
        dataset: dataset.into(),
        model: predictor.name(),
        sampler,
        observed_frac,
        seed,
        nll_mean: mean_nll(&pred, &targets)?,
        mse_mean: mean_squared_error(&pred, &targets)?,
        n_targets: targets.len(),
        wall_seconds: start.elapsed().as_secs_f64(),
        config_fingerprint: predictor.fingerprint()?,
    })
}

/// Contents of a `--config` file: an optional model configuration (desk
/// default when absent) and training settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<TripletformerConfig>,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn model_config(&self, num_channels: usize) -> TripletformerConfig {
        self.model
            .clone()
            .unwrap_or_else(|| TripletformerConfig::desk_default(num_channels))
    }
}

/// Record indices of a train/validation/test split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles record order with the seeded PRNG, then takes the first 20% as
/// test and the first 20% of the remainder as validation (rounded to
/// nearest). Each split is returned in ascending index order.
pub fn split_indices(n: usize, seed: u64) -> Splits {
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(derive_seed(seed, 0x5b117)).shuffle(&mut order);
    let n_test = (0.2 * n as f64).round() as usize;
    let n_val = (0.2 * (n - n_test) as f64).round() as usize;
    let mut test = order[..n_test].to_vec();
    let mut val = order[n_test..n_test + n_val].to_vec();
    let mut train = order[n_test + n_val..].to_vec();
    test.sort_unstable();
    val.sort_unstable();
    train.sort_unstable();
    Splits { train, val, test }
}

/// A dataset split and preprocessed with statistics from its training part.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: Vec<AsTSRecord>,
    pub val: Vec<AsTSRecord>,
    pub test: Vec<AsTSRecord>,
    pub preprocessor: Preprocessor,
    pub num_channels: usize,
}

pub fn prepare(dataset: &Dataset, seed: u64) -> Result<PreparedData> {
    let splits = split_indices(dataset.len(), seed);
    if splits.train.is_empty() || splits.val.is_empty() || splits.test.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} records are too few for train/validation/test splits",
            dataset.len()
        )));
    }
    let (records, preprocessor) =
        preprocess(&dataset.records, &splits.train, dataset.num_channels)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok(PreparedData {
        train: pick(&splits.train),
        val: pick(&splits.val),
        test: pick(&splits.test),
        preprocessor,
        num_channels: dataset.num_channels,
    })
}

#[cfg(test)]
mod tests;
