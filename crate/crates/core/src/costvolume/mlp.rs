//! Small dense networks mapping per-source metadata to `(score, weight)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MvsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

/// One affine layer `y = act(W x + b)` with `W` stored row-major
/// (`out_dim` rows of `in_dim` entries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    #[serde(rename = "in")]
    pub in_dim: usize,
    #[serde(rename = "out")]
    pub out_dim: usize,
    #[serde(rename = "w")]
    pub weights: Vec<f64>,
    #[serde(rename = "b")]
    pub bias: Vec<f64>,
    #[serde(rename = "act")]
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub layers: Vec<DenseLayer>,
}

impl MlpWeights {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let w = MlpWeights { layers };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(MvsError::Config("MLP has no layers".into()));
        };
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(MvsError::Config(format!("layer {i}: zero dimension")));
            }
            if l.weights.len() != l.in_dim * l.out_dim {
                return Err(MvsError::Config(format!(
                    "layer {i}: weight matrix has {} entries, expected {}x{}",
                    l.weights.len(),
                    l.out_dim,
                    l.in_dim
                )));
            }
            if l.bias.len() != l.out_dim {
                return Err(MvsError::Config(format!(
                    "layer {i}: bias has {} entries, expected {}",
                    l.bias.len(),
                    l.out_dim
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|x| !x.is_finite()) {
                return Err(MvsError::Config(format!("layer {i}: non-finite parameter")));
            }
            if i > 0 && self.layers[i - 1].out_dim != l.in_dim {
                return Err(MvsError::Config(format!(
                    "layer {i}: input dim {} does not match previous output dim {}",
                    l.in_dim,
                    self.layers[i - 1].out_dim
                )));
            }
        }
        if last.out_dim != 2 {
            return Err(MvsError::Config(format!(
                "aggregation head must output (score, weight), final layer has {} outputs",
                last.out_dim
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: MlpWeights = serde_json::from_str(text).map_err(|e| {
            MvsError::format(
                offset_of(text, e.line(), e.column()),
                format!("invalid MLP weight JSON: {e}"),
            )
        })?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("MLP weights always serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| MvsError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| MvsError::io(path, e))
    }

    /// Forward pass into caller-provided scratch buffers.
    pub(crate) fn forward_with(&self, x: &[f64], a: &mut Vec<f64>, b: &mut Vec<f64>) {
        a.clear();
        a.extend_from_slice(x);
        for layer in &self.layers {
            b.clear();
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut acc = layer.bias[o];
                for (w, xi) in row.iter().zip(a.iter()) {
                    acc += w * xi;
                }
                if layer.activation == Activation::Relu && acc < 0.0 {
                    acc = 0.0;
                }
                b.push(acc);
            }
            std::mem::swap(a, b);
        }
    }
}

/// Byte offset of a 1-based (line, column) position.
fn offset_of(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    start + column.saturating_sub(1)
}

/// Runs the network on one input vector.
pub fn mlp_forward(weights: &MlpWeights, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != weights.input_dim() {
        return Err(MvsError::Argument(format!(
            "MLP expects {} inputs, got {}",
            weights.input_dim(),
            x.len()
        )));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    weights.forward_with(x, &mut a, &mut b);
    Ok(a)
}
