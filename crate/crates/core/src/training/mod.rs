//! Objective, optimizer, training loop and random hyperparameter search.
//!
//! The loss of one instance is the mean Gaussian NLL over its targets plus
//! `λ` times their mean squared error. A batch loss is the mean of its
//! instance losses.

mod adam;
mod search;
mod trainer;

use crate::model::{GaussianPrediction, OutputVars};
use crate::tensor::{Tape, Tensor, Var};
use crate::{Error, Result};

pub use adam::Adam;
pub use search::{random_search, SearchResult, SearchSpace, Trial};
pub use trainer::{
    model_gradcheck, train, validation_instances, EpochRecord, TrainConfig, TrainHistory,
};

/// `½·ln(2π)`
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `-ln N(u; μ, σ)`.
pub fn gaussian_nll(u: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let z = (u - mu) / sigma;
    Ok(HALF_LN_2PI + sigma.ln() + 0.5 * z * z)
}

fn check_lengths(pred: &GaussianPrediction, targets: &[f64]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("empty target set".into()));
    }
    if pred.mean.len() != targets.len() || pred.std.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} targets",
            pred.mean.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// Mean NLL over all targets.
pub fn mean_nll(pred: &GaussianPrediction, targets: &[f64]) -> Result<f64> {
    check_lengths(pred, targets)?;
    let mut total = 0.0;
    for ((&u, &m), &s) in targets.iter().zip(&pred.mean).zip(&pred.std) {
        total += gaussian_nll(u, m, s)?;
    }
    Ok(total / targets.len() as f64)
}

/// Mean squared error of the predicted means.
pub fn mean_squared_error(pred: &GaussianPrediction, targets: &[f64]) -> Result<f64> {
    check_lengths(pred, targets)?;
    let total: f64 = targets
        .iter()
        .zip(&pred.mean)
        .map(|(u, m)| (u - m) * (u - m))
        .sum();
    Ok(total / targets.len() as f64)
}

/// Mean NLL plus `λ`·MSE of one instance.
pub fn loss(pred: &GaussianPrediction, targets: &[f64], lambda: f64) -> Result<f64> {
    let nll = mean_nll(pred, targets)?;
    if lambda == 0.0 {
        return Ok(nll);
    }
    Ok(nll + lambda * mean_squared_error(pred, targets)?)
}

/// [`loss`] on the tape, for the `r×1` outputs of a forward pass.
pub fn loss_var(tape: &mut Tape, out: OutputVars, targets: &[f64], lambda: f64) -> Result<Var> {
    let r = targets.len();
    if r == 0 {
        return Err(Error::InvalidArgument("empty target set".into()));
    }
    if tape.shape(out.mean) != [r, 1] {
        return Err(Error::Shape {
            op: "loss",
            lhs: tape.shape(out.mean).to_vec(),
            rhs: vec![r, 1],
        });
    }
    let u = tape.constant(Tensor::matrix(r, 1, targets.to_vec())?);
    let resid = tape.sub(u, out.mean)?;
    let z = tape.div(resid, out.std)?;
    let z2 = tape.mul(z, z)?;
    let half_z2 = tape.scale(z2, 0.5);
    let ln_sigma = tape.ln(out.std);
    let per_target = tape.add(ln_sigma, half_z2)?;
    let nll = tape.mean(per_target);
    let nll = tape.add_scalar(nll, HALF_LN_2PI);
    if lambda == 0.0 {
        return Ok(nll);
    }
    let sq = tape.mul(resid, resid)?;
    let mse = tape.mean(sq);
    let mse = tape.scale(mse, lambda);
    tape.add(nll, mse)
}

#[cfg(test)]
mod tests;
