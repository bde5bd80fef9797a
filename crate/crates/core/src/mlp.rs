//! Feed-forward neural policies loaded from JSON weight files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pendulum::Policy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    #[serde(alias = "identity")]
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// Row-major `out × in` weights.
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub act: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.w.len()
    }
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpPolicy {
    pub layers: Vec<Layer>,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

pub const INPUT_DIM: usize = 3;

impl MlpPolicy {
    /// Checks shapes and values. Layers are numbered from 1 in errors.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Weights("no layers".into()));
        }
        if !self.scale.is_finite() {
            return Err(Error::Weights("scale must be finite".into()));
        }
        let mut width = INPUT_DIM;
        for (i, layer) in self.layers.iter().enumerate() {
            let n = i + 1;
            if layer.w.is_empty() {
                return Err(Error::DimensionMismatch {
                    layer: n,
                    detail: "weight matrix has no rows".into(),
                });
            }
            if let Some(row) = layer.w.iter().find(|r| r.len() != width) {
                return Err(Error::DimensionMismatch {
                    layer: n,
                    detail: format!("expects {} inputs but receives {width}", row.len()),
                });
            }
            if layer.b.len() != layer.outputs() {
                return Err(Error::DimensionMismatch {
                    layer: n,
                    detail: format!("{} weight rows but {} biases", layer.outputs(), layer.b.len()),
                });
            }
            if layer.w.iter().flatten().chain(&layer.b).any(|x| !x.is_finite()) {
                return Err(Error::Weights(format!("layer {n} has a non-finite value")));
            }
            width = layer.outputs();
        }
        if width != 1 {
            return Err(Error::DimensionMismatch {
                layer: self.layers.len(),
                detail: format!("final layer has {width} outputs, expected 1"),
            });
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<MlpPolicy> {
        let p: MlpPolicy = serde_json::from_str(text).map_err(|e| Error::Weights(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weights serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MlpPolicy> {
        MlpPolicy::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> f64 {
        let mut x = obs.to_vec();
        for layer in &self.layers {
            x = layer
                .w
                .iter()
                .zip(&layer.b)
                .map(|(row, b)| {
                    let z = row.iter().zip(&x).fold(*b, |acc, (w, v)| acc + w * v);
                    layer.act.apply(z)
                })
                .collect();
        }
        self.scale * x[0]
    }

    /// Product of the layers' Frobenius norms times `|scale|`: a Lipschitz
    /// bound for the network, since every activation is 1-Lipschitz.
    pub fn lipschitz_bound(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.w.iter().flatten().map(|w| w * w).sum::<f64>().sqrt())
            .product::<f64>()
            * self.scale.abs()
    }
}

impl Policy for MlpPolicy {
    fn act(&self, obs: &[f64]) -> f64 {
        self.forward(obs)
    }
}

/// A 3→24→24→1 network fit offline to the handcrafted expert.
pub fn distilled_expert() -> MlpPolicy {
    MlpPolicy::from_json(include_str!("../fixtures/distilled_expert.json")).expect("bundled weights")
}
