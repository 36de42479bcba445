//! Named parameter storage and its versioned on-disk form.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PARAM_FORMAT: &str = "pcb-params";
pub const PARAM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Option<Tensor>,
    /// Frozen parameters enter graphs as constants and are skipped by the optimizer.
    pub trainable: bool,
}

/// Parameters keyed by a slash/dot path such as `encoder.embedding`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "ParamFile", try_from = "ParamFile")]
pub struct ParamStore {
    params: BTreeMap<String, Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, value: Tensor) -> Result<()> {
        let path = path.into();
        if self.params.contains_key(&path) {
            return Err(Error::Config(format!("duplicate parameter path `{path}`")));
        }
        self.params.insert(
            path,
            Parameter {
                value,
                grad: None,
                trainable: true,
            },
        );
        Ok(())
    }

    pub fn get(&self, path: &str) -> Result<&Parameter> {
        self.params
            .get(path)
            .ok_or_else(|| Error::Lookup(format!("no parameter `{path}`")))
    }

    pub fn get_mut(&mut self, path: &str) -> Result<&mut Parameter> {
        self.params
            .get_mut(path)
            .ok_or_else(|| Error::Lookup(format!("no parameter `{path}`")))
    }

    pub fn value(&self, path: &str) -> Result<&Tensor> {
        Ok(&self.get(path)?.value)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.params.contains_key(path)
    }

    pub fn set_trainable(&mut self, path: &str, trainable: bool) -> Result<()> {
        self.get_mut(path)?.trainable = trainable;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Parameter)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Parameter)> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad = None;
        }
    }

    /// Adds `grad` into the stored gradient of `path`.
    pub fn accumulate_grad(&mut self, path: &str, grad: &Tensor) -> Result<()> {
        let p = self.get_mut(path)?;
        if p.value.shape() != grad.shape() {
            return Err(Error::Dimension(format!(
                "gradient shape {:?} does not match parameter `{path}` shape {:?}",
                grad.shape(),
                p.value.shape()
            )));
        }
        match &mut p.grad {
            Some(g) => g.add_assign(grad),
            None => p.grad = Some(grad.clone()),
        }
        Ok(())
    }

    pub fn norms(&self) -> Vec<(String, f64)> {
        self.params
            .iter()
            .map(|(k, p)| (k.clone(), p.value.l2_norm()))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Fan-in scaled uniform initialization: `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
pub fn kaiming_uniform(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    uniform(shape, bound, rng)
}

pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = rng.random_range(-bound..=bound);
    }
    t
}

#[derive(Serialize, Deserialize)]
struct ParamFile {
    format: String,
    version: u32,
    params: BTreeMap<String, SerializedParam>,
}

#[derive(Serialize, Deserialize)]
struct SerializedParam {
    shape: Vec<usize>,
    values: Vec<f64>,
    #[serde(default = "default_true")]
    trainable: bool,
}

fn default_true() -> bool {
    true
}

impl From<ParamStore> for ParamFile {
    fn from(store: ParamStore) -> Self {
        let params = store
            .params
            .into_iter()
            .map(|(k, p)| {
                let shape = p.value.shape().to_vec();
                (
                    k,
                    SerializedParam {
                        shape,
                        values: p.value.into_data(),
                        trainable: p.trainable,
                    },
                )
            })
            .collect();
        ParamFile {
            format: PARAM_FORMAT.to_string(),
            version: PARAM_FORMAT_VERSION,
            params,
        }
    }
}

impl TryFrom<ParamFile> for ParamStore {
    type Error = Error;

    fn try_from(file: ParamFile) -> Result<Self> {
        if file.format != PARAM_FORMAT {
            return Err(Error::Serde(format!(
                "unexpected parameter format `{}`",
                file.format
            )));
        }
        if file.version != PARAM_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported parameter format version {}",
                file.version
            )));
        }
        let mut params = BTreeMap::new();
        for (k, p) in file.params {
            let value = Tensor::new(p.shape, p.values)?;
            params.insert(
                k,
                Parameter {
                    value,
                    grad: None,
                    trainable: p.trainable,
                },
            );
        }
        Ok(ParamStore { params })
    }
}
