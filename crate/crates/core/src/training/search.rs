use log::info;
use serde::{Deserialize, Serialize};

use super::{train, TrainConfig};
use crate::data::AsTSRecord;
use crate::model::TripletformerConfig;
use crate::rng::{derive_seed, Rng};
use crate::{Error, Result};

/// Grids sampled by [`random_search`]. `attention_dim` sets every embedding
/// and attention width at once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub depth: Vec<usize>,
    pub hidden: Vec<usize>,
    pub attention_dim: Vec<usize>,
    pub induced_points: Vec<usize>,
    pub lambda: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            depth: vec![1, 2, 3, 4],
            hidden: vec![64, 128, 256],
            attention_dim: vec![64, 128, 256],
            induced_points: vec![16, 32, 64, 128],
            lambda: vec![0.0, 1.0, 5.0, 10.0],
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("depth", self.depth.is_empty()),
            ("hidden", self.hidden.is_empty()),
            ("attention_dim", self.attention_dim.is_empty()),
            ("induced_points", self.induced_points.is_empty()),
            ("lambda", self.lambda.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("search grid `{name}` is empty")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: TripletformerConfig,
    pub train: TrainConfig,
    pub val_nll: f64,
    pub best_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub trials: Vec<Trial>,
    /// Index into `trials` of the lowest validation NLL (first on ties).
    pub best: usize,
}

impl SearchResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

fn pick<T: Copy>(rng: &mut Rng, grid: &[T]) -> T {
    grid[rng.index(grid.len())]
}

/// Trains `k` configurations drawn from `space` around the `base`
/// configurations and keeps the one with the least validation NLL.
/// Every trial trains with the base training seed.
pub fn random_search(
    space: &SearchSpace,
    base: &TripletformerConfig,
    base_train: &TrainConfig,
    k: usize,
    seed: u64,
    train_set: &[AsTSRecord],
    val_set: &[AsTSRecord],
) -> Result<SearchResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("random search needs k >= 1".into()));
    }
    space.validate()?;
    let mut rng = Rng::new(derive_seed(seed, 0x5ea7c4));
    let mut trials = Vec::with_capacity(k);
    for i in 0..k {
        let mut config = base.clone();
        config.depth = pick(&mut rng, &space.depth);
        config.ff_hidden = pick(&mut rng, &space.hidden);
        let d = pick(&mut rng, &space.attention_dim);
        config.input_embed_dim = d;
        config.self_attn_dim = d;
        config.query_embed_dim = d;
        config.cross_attn_dim = d;
        config.induced_points = pick(&mut rng, &space.induced_points);
        let mut tconfig = base_train.clone();
        tconfig.lambda = pick(&mut rng, &space.lambda);

        let (_, history) = train(&config, &tconfig, train_set, val_set)?;
        let val_nll = history.best_val_nll();
        info!("trial {}/{k}: val NLL {val_nll:.5}", i + 1);
        trials.push(Trial {
            config,
            train: tconfig,
            val_nll,
            best_epoch: history.best_epoch,
        });
    }
    let best = (0..trials.len())
        .min_by(|&a, &b| trials[a].val_nll.total_cmp(&trials[b].val_nll))
        .unwrap_or(0);
    Ok(SearchResult { trials, best })
}
