use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::{
    evaluate, prepare, sample_instances, sigma_grid, BaselineKind, BaselineModel, EvalReport,
    SigmaMode,
};
use crate::data::{load_jsonl, Dataset, Sampler, SineConfig};
use crate::model::TripletformerConfig;
use crate::training::{train, TrainConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    /// JSON Lines file, relative paths resolved against the manifest.
    Path(PathBuf),
    /// Generated on the fly.
    Sine(SineConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Mean,
    Forward,
    Tripletformer {
        /// Desk default for the dataset's channel count when omitted.
        #[serde(default)]
        config: Option<TripletformerConfig>,
        /// `sampler`, `observed_frac` and `seed` are overridden per cell.
        #[serde(default)]
        train: TrainConfig,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub name: String,
    pub dataset: DatasetSource,
    pub samplers: Vec<Sampler>,
    pub observed_fracs: Vec<f64>,
    /// Repetition `i` uses seed `seed + i` for splitting, training and
    /// sampling.
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub sigma_mode: SigmaMode,
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Validation(format!("manifest field `{field}`: {msg}"))
}

impl ExperimentManifest {
    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self =
            serde_json::from_str(s).map_err(|e| Error::Validation(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samplers.is_empty() {
            return Err(field_error("samplers", "must list at least one sampler"));
        }
        if self.observed_fracs.is_empty() {
            return Err(field_error(
                "observed_fracs",
                "must list at least one fraction",
            ));
        }
        for (i, &f) in self.observed_fracs.iter().enumerate() {
            if !(f > 0.0 && f < 1.0) {
                return Err(field_error(
                    &format!("observed_fracs[{i}]"),
                    format!("{f} is not in (0, 1)"),
                ));
            }
        }
        if self.repetitions == 0 {
            return Err(field_error("repetitions", "must be >= 1"));
        }
        if self.models.is_empty() {
            return Err(field_error("models", "must list at least one model"));
        }
        for (i, m) in self.models.iter().enumerate() {
            if let ModelSpec::Tripletformer { config, train } = m {
                if let Some(c) = config {
                    c.validate()
                        .map_err(|e| field_error(&format!("models[{i}].config"), e))?;
                }
                let probe = TrainConfig {
                    observed_frac: 0.5,
                    ..train.clone()
                };
                probe
                    .validate()
                    .map_err(|e| field_error(&format!("models[{i}].train"), e))?;
            }
        }
        if let DatasetSource::Sine(cfg) = &self.dataset {
            cfg.validate().map_err(|e| field_error("dataset.sine", e))?;
        }
        Ok(())
    }

    fn load_dataset(&self, base: &Path) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::Path(p) => load_jsonl(base.join(p)),
            DatasetSource::Sine(cfg) => cfg.build_asts(),
        }
    }
}

/// Mean ± sample standard deviation of one grid cell over repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: String,
    pub sampler: Sampler,
    pub observed_frac: f64,
    pub repetitions: usize,
    pub nll_mean: f64,
    pub nll_sd: f64,
    pub mse_mean: f64,
    pub mse_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub reports: Vec<EvalReport>,
    pub aggregates: Vec<Aggregate>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups reports by (model, sampler, fraction) in first-seen order.
pub fn aggregate(reports: &[EvalReport]) -> Vec<Aggregate> {
    let mut keys: Vec<(String, Sampler, f64)> = Vec::new();
    for r in reports {
        let k = (r.model.clone(), r.sampler, r.observed_frac);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(model, sampler, observed_frac)| {
            let cell: Vec<&EvalReport> = reports
                .iter()
                .filter(|r| {
                    r.model == model && r.sampler == sampler && r.observed_frac == observed_frac
                })
                .collect();
            let (nll_mean, nll_sd) = mean_sd(&cell.iter().map(|r| r.nll_mean).collect::<Vec<_>>());
            let (mse_mean, mse_sd) = mean_sd(&cell.iter().map(|r| r.mse_mean).collect::<Vec<_>>());
            Aggregate {
                model,
                sampler,
                observed_frac,
                repetitions: cell.len(),
                nll_mean,
                nll_sd,
                mse_mean,
                mse_sd,
            }
        })
        .collect()
}

/// Runs every repetition × sampler × fraction × model cell of the manifest
/// at `path`.
pub fn run_experiment(path: impl AsRef<Path>) -> Result<ExperimentResult> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = ExperimentManifest::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_manifest(&manifest, base)
}

/// [`run_experiment`] on an already parsed manifest; dataset paths are
/// resolved against `base`.
pub fn run_manifest(m: &ExperimentManifest, base: &Path) -> Result<ExperimentResult> {
    m.validate()?;
    let dataset = m.load_dataset(base)?;
    let grid = sigma_grid();
    let mut reports = Vec::new();
    for rep in 0..m.repetitions {
        let seed = m.seed + rep as u64;
        let data = prepare(&dataset, seed)?;
        for &sampler in &m.samplers {
            for &frac in &m.observed_fracs {
                for spec in &m.models {
                    let report = match spec {
                        ModelSpec::Mean | ModelSpec::Forward => {
                            let kind = if matches!(spec, ModelSpec::Mean) {
                                BaselineKind::Mean
                            } else {
                                BaselineKind::Forward
                            };
                            let val = sample_instances(&data.val, sampler, frac, seed)?;
                            let model = BaselineModel::fit(
                                kind,
                                &data.train,
                                &val,
                                data.num_channels,
                                &grid,
                                m.sigma_mode,
                            )?;
                            evaluate(&model, &m.name, &data.test, sampler, frac, seed)?
                        }
                        ModelSpec::Tripletformer { config, train: tc } => {
                            let config = config.clone().unwrap_or_else(|| {
                                TripletformerConfig::desk_default(data.num_channels)
                            });
                            let tc = TrainConfig {
                                sampler,
                                observed_frac: frac,
                                seed,
                                ..tc.clone()
                            };
                            let (model, _) = train(&config, &tc, &data.train, &data.val)?;
                            evaluate(&model, &m.name, &data.test, sampler, frac, seed)?
                        }
                    };
                    info!(
                        "{} {} {:.2} seed {}: NLL {:.4}",
                        report.model,
                        sampler.name(),
                        frac,
                        seed,
                        report.nll_mean
                    );
                    reports.push(report);
                }
            }
        }
    }
    let aggregates = aggregate(&reports);
    Ok(ExperimentResult {
        name: m.name.clone(),
        reports,
        aggregates,
    })
}
