//! Multi-domain synthetic data and MNIST ingestion.

mod export;
mod idx;
pub(crate) mod mixture;
mod mnist;
mod two_bit;

pub use export::{read_cache, read_csv, write_cache, write_csv, CACHE_TAG};
pub use idx::{load_idx, parse_idx, write_idx, IdxData};
pub use mixture::{gen_linear_mixture, ClassConditional, Family, MixtureSample};
pub use mnist::{colorize_mnist, ColorSpec};
pub use two_bit::{
    bayes_accuracy, cell_probabilities, gen_two_bit, gen_two_bit_covariate, joint_rule, rule_accuracy, Rule,
};

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Labeled samples from one domain, with the parameters that generated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
    pub env_id: String,
    /// Named generator constants (`label_noise`, `color_flip`, `a`, `b`, `n`, ...).
    pub gen_params: BTreeMap<String, f64>,
    /// Exact seed; `gen_params["seed"]` holds the same value as a float.
    pub seed: u64,
    pub classes: usize,
}

impl Environment {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>, classes: usize, env_id: impl Into<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("environment needs at least one sample".into()));
        }
        if inputs.nrows() != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "environment",
                left: inputs.dim(),
                right: (labels.len(), 1),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::LabelOutOfRange { label: bad, classes });
        }
        Ok(Self { inputs, labels, env_id: env_id.into(), gen_params: BTreeMap::new(), seed: 0, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.gen_params.get(name).copied()
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize], env_id: impl Into<String>) -> Environment {
        Environment {
            inputs: self.inputs.select(ndarray::Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            env_id: env_id.into(),
            gen_params: self.gen_params.clone(),
            seed: self.seed,
            classes: self.classes,
        }
    }

    /// Rebuild from `gen_params` and `seed`. Only the two-bit generators are
    /// self-contained; other kinds return `None`.
    pub fn regenerate(&self) -> Option<Result<Environment>> {
        let n = self.param("n")? as usize;
        let noise = self.param("label_noise")?;
        let flip = self.param("color_flip")?;
        match self.param("kind")? as u32 {
            two_bit::KIND_ANTI_CAUSAL => Some(gen_two_bit(n, noise, flip, self.seed)),
            two_bit::KIND_COVARIATE => Some(gen_two_bit_covariate(n, noise, flip, self.seed)),
            _ => None,
        }
    }

    /// Empirical label frequencies.
    pub fn label_frequencies(&self) -> Vec<f64> {
        label_frequencies(&self.labels, self.classes)
    }
}

pub fn label_frequencies(labels: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; classes];
    for &y in labels {
        counts[y] += 1.0;
    }
    let n = labels.len().max(1) as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    counts
}

pub(crate) fn check_prob(name: &str, p: f64, max: f64) -> Result<()> {
    if !(0.0..=max).contains(&p) {
        return Err(Error::InvalidArgument(format!("{name} must lie in [0, {max}], got {p}")));
    }
    Ok(())
}
