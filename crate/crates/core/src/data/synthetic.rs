//! Sine-wave multivariate series and their single-sensor asynchronous
//! versions.

use serde::{Deserialize, Serialize};

use super::{AsTSRecord, Dataset, Triplet};
use crate::rng::{derive_seed, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineComponent {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl SineComponent {
    /// amplitude ~ U[0.5, 1.5), frequency ~ U[0.5, 2.5) cycles per unit
    /// time, phase ~ U[0, 2π).
    pub fn sample(rng: &mut Rng) -> Self {
        Self {
            amplitude: rng.uniform_range(0.5, 1.5),
            frequency: rng.uniform_range(0.5, 2.5),
            phase: rng.uniform_range(0.0, std::f64::consts::TAU),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * self.frequency * t + self.phase).sin()
    }
}

/// A fully observed multivariate series on a shared time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseSeries {
    pub times: Vec<f64>,
    /// `values[channel][step]`, channel 0-based.
    pub values: Vec<Vec<f64>>,
}

impl DenseSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn num_channels(&self) -> usize {
        self.values.len()
    }
}

/// Parameters of a generated dataset; serialised as its manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineConfig {
    pub n_series: usize,
    pub length: usize,
    pub channels: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_series == 0 || self.length == 0 || self.channels == 0 {
            return Err(Error::Config(format!("all sizes must be >= 1: {self:?}")));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sd must be >= 0, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }

    /// Dense series turned into single-sensor records `series-<i>`.
    pub fn build_asts(&self) -> Result<Dataset> {
        let mts = generate_sine_mts(
            self.n_series,
            self.length,
            self.channels,
            self.noise_sd,
            self.seed,
        )?;
        let mut rng = Rng::new(derive_seed(self.seed, 0x5e1ec7));
        let records = mts
            .iter()
            .enumerate()
            .map(|(i, s)| make_synthetic_asts(s, format!("series-{i}"), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut ds = Dataset::new(records);
        ds.num_channels = self.channels;
        Ok(ds)
    }
}

/// `values[j][k] = a_j sin(2π f_j t_k + φ_j) + N(0, noise_sd²)`.
pub fn sine_series(
    times: &[f64],
    components: &[SineComponent],
    noise_sd: f64,
    rng: &mut Rng,
) -> DenseSeries {
    let values = components
        .iter()
        .map(|comp| {
            times
                .iter()
                .map(|&t| {
                    let clean = comp.eval(t);
                    if noise_sd > 0.0 {
                        clean + noise_sd * rng.normal()
                    } else {
                        clean
                    }
                })
                .collect()
        })
        .collect();
    DenseSeries {
        times: times.to_vec(),
        values,
    }
}

/// `n_series` series of `length` evenly spaced steps on `[0, 1]`, each
/// channel a sine with its own amplitude, frequency and phase.
pub fn generate_sine_mts(
    n_series: usize,
    length: usize,
    channels: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Vec<DenseSeries>> {
    SineConfig {
        n_series,
        length,
        channels,
        noise_sd,
        seed,
    }
    .validate()?;
    let times: Vec<f64> = if length == 1 {
        vec![0.0]
    } else {
        (0..length)
            .map(|k| k as f64 / (length - 1) as f64)
            .collect()
    };
    let mut rng = Rng::new(seed);
    Ok((0..n_series)
        .map(|_| {
            let comps: Vec<SineComponent> = (0..channels)
                .map(|_| SineComponent::sample(&mut rng))
                .collect();
            sine_series(&times, &comps, noise_sd, &mut rng)
        })
        .collect())
}

/// Keeps one uniformly chosen channel per time step.
pub fn make_synthetic_asts(
    mts: &DenseSeries,
    id: impl Into<String>,
    rng: &mut Rng,
) -> Result<AsTSRecord> {
    if mts.is_empty() || mts.num_channels() == 0 {
        return Err(Error::InvalidArgument("source series is empty".into()));
    }
    let obs = mts
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let c = rng.index(mts.num_channels());
            Triplet::new(t, c + 1, mts.values[c][k])
        })
        .collect();
    AsTSRecord::new(id, obs)
}
