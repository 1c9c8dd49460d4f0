use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::{loss_var, mean_nll, Adam};
use crate::data::{encode_context, encode_queries, AsTSRecord, InterpolationInstance, Sampler};
use crate::model::{GaussianPrediction, Tripletformer, TripletformerConfig};
use crate::params::Binding;
use crate::rng::{derive_seed, record_seed, Rng};
use crate::tensor::{grad_check, GradCheck, Tape, Tensor};
use crate::{Error, Result};

const INIT_LABEL: u64 = 0x1;
const VAL_LABEL: u64 = 0x2;
const SHUFFLE_LABEL: u64 = 0x3;
const EPOCH_LABEL: u64 = 0x100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the MSE term.
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub sampler: Sampler,
    pub observed_frac: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            learning_rate: 1e-3,
            batch_size: 8,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            sampler: Sampler::Random,
            observed_frac: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be a finite value >= 0");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        if !(self.observed_frac > 0.0 && self.observed_frac < 1.0) {
            return bad("observed_frac must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_nll: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_val_nll(&self) -> f64 {
        self.epochs
            .get(self.best_epoch.wrapping_sub(1))
            .map_or(f64::INFINITY, |e| e.val_nll)
    }
}

fn usable(records: &[AsTSRecord]) -> Vec<&AsTSRecord> {
    records.iter().filter(|r| r.times().len() >= 2).collect()
}

fn sample_all(
    records: &[&AsTSRecord],
    sampler: Sampler,
    observed_frac: f64,
    seed: u64,
) -> Result<Vec<InterpolationInstance>> {
    records
        .iter()
        .map(|r| sampler.sample(r, observed_frac, record_seed(seed, &r.id)))
        .collect()
}

/// The fixed validation instances of a run: one per usable record.
pub fn validation_instances(
    val_set: &[AsTSRecord],
    tconfig: &TrainConfig,
) -> Result<Vec<InterpolationInstance>> {
    sample_all(
        &usable(val_set),
        tconfig.sampler,
        tconfig.observed_frac,
        derive_seed(tconfig.seed, VAL_LABEL),
    )
}

fn pooled_nll(model: &Tripletformer, instances: &[InterpolationInstance]) -> Result<f64> {
    let mut pred = GaussianPrediction {
        mean: Vec::new(),
        std: Vec::new(),
    };
    let mut targets = Vec::new();
    for inst in instances {
        let p = model.predict_distribution(inst)?;
        pred.mean.extend(p.mean);
        pred.std.extend(p.std);
        targets.extend_from_slice(&inst.targets);
    }
    mean_nll(&pred, &targets)
}

struct Encoded {
    context: Tensor,
    queries: Tensor,
    targets: Vec<f64>,
}

fn encode(inst: &InterpolationInstance, channels: usize) -> Result<Encoded> {
    Ok(Encoded {
        context: encode_context(&inst.context, channels)?,
        queries: encode_queries(&inst.queries, channels)?,
        targets: inst.targets.clone(),
    })
}

/// Mean loss over `batch`, accumulated on one tape; returns the loss and the
/// gradients aligned with the model's parameter store.
fn batch_step(
    model: &Tripletformer,
    batch: &[&Encoded],
    lambda: f64,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let bind = model.params().bind(&mut tape);
    let mut total = None;
    for e in batch {
        let out = model.forward(
            &mut tape,
            &bind,
            &e.context,
            &vec![true; e.context.rows()],
            &e.queries,
            &vec![true; e.queries.rows()],
        )?;
        let l = loss_var(&mut tape, out, &e.targets, lambda)?;
        total = Some(match total {
            None => l,
            Some(t) => tape.add(t, l)?,
        });
    }
    let total = total.ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    let mean = tape.scale(total, 1.0 / batch.len() as f64);
    let value = tape.value(mean).data()[0];
    let grads = tape.backward(mean)?;
    Ok((value, bind.collect(model.params(), grads)))
}

/// Mini-batch Adam on the augmented loss with early stopping on validation
/// NLL. Training instances are resampled from the training records every
/// epoch; validation instances are fixed for the whole run. Returns the
/// model at the best validation epoch.
pub fn train(
    config: &TripletformerConfig,
    tconfig: &TrainConfig,
    train_set: &[AsTSRecord],
    val_set: &[AsTSRecord],
) -> Result<(Tripletformer, TrainHistory)> {
    tconfig.validate()?;
    let train_records = usable(train_set);
    if train_records.is_empty() {
        return Err(Error::InvalidArgument("no usable training records".into()));
    }
    let val = validation_instances(val_set, tconfig)?;
    if val.is_empty() {
        return Err(Error::InvalidArgument(
            "no usable validation records".into(),
        ));
    }
    let mut model = Tripletformer::init(config.clone(), derive_seed(tconfig.seed, INIT_LABEL))?;
    let mut adam = Adam::new(tconfig.learning_rate, model.params().tensors());
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, Vec<Tensor>)> = None;
    let mut since_best = 0;

    for epoch in 1..=tconfig.max_epochs {
        let epoch_seed = derive_seed(tconfig.seed, EPOCH_LABEL + epoch as u64);
        let instances = sample_all(
            &train_records,
            tconfig.sampler,
            tconfig.observed_frac,
            epoch_seed,
        )?;
        let encoded = instances
            .iter()
            .map(|i| encode(i, config.channels))
            .collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        Rng::new(derive_seed(epoch_seed, SHUFFLE_LABEL)).shuffle(&mut order);

        let mut loss_sum = 0.0;
        for chunk in order.chunks(tconfig.batch_size) {
            let batch: Vec<&Encoded> = chunk.iter().map(|&i| &encoded[i]).collect();
            let (value, grads) = batch_step(&model, &batch, tconfig.lambda)?;
            if !value.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    msg: format!("batch loss {value} after {} optimizer steps", adam.steps()),
                });
            }
            loss_sum += value * chunk.len() as f64;
            adam.step(model.params_mut().tensors_mut(), &grads)?;
        }
        let train_loss = loss_sum / encoded.len() as f64;
        let val_nll = pooled_nll(&model, &val)?;
        if !val_nll.is_finite() {
            return Err(Error::Diverged {
                epoch,
                msg: format!("validation NLL {val_nll}"),
            });
        }
        debug!("epoch {epoch}: train loss {train_loss:.5}, val NLL {val_nll:.5}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_nll,
        });
        if best.as_ref().is_none_or(|(b, _)| val_nll < *b) {
            best = Some((val_nll, model.params().tensors().to_vec()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > tconfig.patience {
                break;
            }
        }
    }
    if let Some((v, params)) = best {
        info!("best epoch {} with val NLL {v:.5}", history.best_epoch);
        model.params_mut().set_tensors(params)?;
    }
    Ok((model, history))
}

/// Compares the tape gradient of the training loss with central differences
/// over every parameter of a freshly initialized model, on a random instance
/// with 6 context points and 3 queries.
///
/// Biases are drawn from N(0, 0.1²) instead of zero: with zero biases a row
/// that relu clamps to all zeros feeds an exact zero into the next layer,
/// which puts the check on a kink where no derivative exists.
pub fn model_gradcheck(
    config: &TripletformerConfig,
    seed: u64,
    lambda: f64,
    eps: f64,
) -> Result<GradCheck> {
    let mut model = Tripletformer::init(config.clone(), seed)?;
    let mut rng = Rng::new(derive_seed(seed, VAL_LABEL));
    let biases: Vec<_> = model
        .params()
        .ids()
        .filter(|&id| model.params().name(id).ends_with(".bias"))
        .collect();
    for id in biases {
        for b in model.params_mut().get_mut(id).data_mut() {
            *b = 0.1 * rng.normal();
        }
    }
    let c = config.channels;
    let rows = |n: usize, width: usize, rng: &mut Rng| -> Result<Tensor> {
        let mut data = Vec::with_capacity(n * width);
        for _ in 0..n {
            let ch = rng.index(c);
            data.push(rng.uniform());
            data.extend((0..c).map(|k| if k == ch { 1.0 } else { 0.0 }));
            if width == c + 2 {
                data.push(rng.normal());
            }
        }
        Tensor::matrix(n, width, data)
    };
    let context = rows(6, c + 2, &mut rng)?;
    let queries = rows(3, c + 1, &mut rng)?;
    let targets: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
    grad_check(
        |tape, vars| {
            let bind = Binding::from_vars(vars.to_vec());
            let out = model.forward(tape, &bind, &context, &[true; 6], &queries, &[true; 3])?;
            loss_var(tape, out, &targets, lambda)
        },
        model.params().tensors(),
        eps,
    )
}
