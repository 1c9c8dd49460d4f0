//! Self-describing JSON checkpoints: config plus named, shaped parameter
//! arrays. Floats are written in shortest round-trip form, so save/load is
//! bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Tripletformer, TripletformerConfig};
use crate::tensor::Tensor;
use crate::{Error, Result};

const FORMAT: &str = "tripletformer-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TripletformerConfig,
    pub params: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        Ok(ck)
    }
}

impl Tripletformer {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            config: self.config.clone(),
            params: self
                .params
                .iter()
                .map(|(name, t)| NamedArray {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds the model from a checkpoint; every name and shape must match
    /// the layout implied by its config.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut model = Tripletformer::init(ck.config.clone(), 0)?;
        if ck.params.len() != model.params.len() {
            return Err(Error::Validation(format!(
                "checkpoint has {} tensors, config implies {}",
                ck.params.len(),
                model.params.len()
            )));
        }
        let mut tensors = Vec::with_capacity(ck.params.len());
        for (id, arr) in model.params.ids().zip(&ck.params) {
            if model.params.name(id) != arr.name {
                return Err(Error::Validation(format!(
                    "expected parameter {}, found {}",
                    model.params.name(id),
                    arr.name
                )));
            }
            tensors.push(Tensor::new(&arr.shape, arr.data.clone())?);
        }
        model.params.set_tensors(tensors)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_checkpoint().to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&Checkpoint::from_json(&s)?)
    }
}
