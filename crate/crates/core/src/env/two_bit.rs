//! Two binary features: a noisy invariant "shape" bit and an environment-dependent "color" bit.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_prob, Environment};
use crate::seeds::derive_seed;
use crate::{Error, Result};

pub(super) const KIND_ANTI_CAUSAL: u32 = 1;
pub(super) const KIND_COVARIATE: u32 = 2;

/// Anti-causal two-bit domain: `shape ~ Bern(1/2)`, `label = shape ⊕ Bern(label_noise)`,
/// `color = label ⊕ Bern(color_flip)`. Inputs are `[shape, color]`.
pub fn gen_two_bit(n: usize, label_noise: f64, color_flip: f64, seed: u64) -> Result<Environment> {
    generate(n, label_noise, color_flip, seed, KIND_ANTI_CAUSAL)
}

/// Covariate-shift variant (not part of the anti-causal benchmark): color follows the
/// shape, `color = shape ⊕ Bern(color_flip)`, so it carries no label information
/// beyond what the shape already does. Only `P(color | shape)` moves across domains.
pub fn gen_two_bit_covariate(n: usize, label_noise: f64, color_flip: f64, seed: u64) -> Result<Environment> {
    generate(n, label_noise, color_flip, seed, KIND_COVARIATE)
}

fn generate(n: usize, label_noise: f64, color_flip: f64, seed: u64, kind: u32) -> Result<Environment> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    check_prob("label_noise", label_noise, 0.5)?;
    check_prob("color_flip", color_flip, 1.0)?;
    let tag = if kind == KIND_ANTI_CAUSAL { "two_bit" } else { "two_bit_covariate" };
    let env_id = format!("{tag}(noise={label_noise},flip={color_flip})");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &env_id));

    let mut inputs = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let shape = rng.random_bool(0.5) as usize;
        let label = shape ^ rng.random_bool(label_noise) as usize;
        let anchor = if kind == KIND_ANTI_CAUSAL { label } else { shape };
        let color = anchor ^ rng.random_bool(color_flip) as usize;
        inputs[[i, 0]] = shape as f64;
        inputs[[i, 1]] = color as f64;
        labels.push(label);
    }
    let mut env = Environment::new(inputs, labels, 2, env_id)?;
    env.seed = seed;
    for (k, v) in [
        ("kind", kind as f64),
        ("n", n as f64),
        ("label_noise", label_noise),
        ("color_flip", color_flip),
        ("seed", seed as f64),
    ] {
        env.gen_params.insert(k.into(), v);
    }
    Ok(env)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Predict `label = shape`.
    ShapeOnly,
    /// Predict `label = color`.
    ColorOnly,
    /// Per-cell majority vote of the stated distribution.
    Joint,
}

/// `p[shape][color][label]` under the anti-causal law.
pub fn cell_probabilities(label_noise: f64, color_flip: f64) -> [[[f64; 2]; 2]; 2] {
    let mut p = [[[0.0; 2]; 2]; 2];
    for s in 0..2 {
        for c in 0..2 {
            for y in 0..2 {
                let py = if y == s { 1.0 - label_noise } else { label_noise };
                let pc = if c == y { 1.0 - color_flip } else { color_flip };
                p[s][c][y] = 0.5 * py * pc;
            }
        }
    }
    p
}

/// Bayes-optimal lookup table `rule[shape][color]`; ties go to label 0.
pub fn joint_rule(label_noise: f64, color_flip: f64) -> [[usize; 2]; 2] {
    let p = cell_probabilities(label_noise, color_flip);
    let mut rule = [[0; 2]; 2];
    for s in 0..2 {
        for c in 0..2 {
            rule[s][c] = usize::from(p[s][c][1] > p[s][c][0]);
        }
    }
    rule
}

/// Accuracy of a fixed lookup table under the anti-causal law.
pub fn rule_accuracy(rule: [[usize; 2]; 2], label_noise: f64, color_flip: f64) -> f64 {
    let p = cell_probabilities(label_noise, color_flip);
    let mut acc = 0.0;
    for s in 0..2 {
        for c in 0..2 {
            acc += p[s][c][rule[s][c]];
        }
    }
    acc
}

/// Exact accuracy of `rule` on the anti-causal two-bit law with the given constants.
pub fn bayes_accuracy(rule: Rule, label_noise: f64, color_flip: f64) -> f64 {
    let table = match rule {
        Rule::ShapeOnly => [[0, 0], [1, 1]],
        Rule::ColorOnly => [[0, 1], [0, 1]],
        Rule::Joint => joint_rule(label_noise, color_flip),
    };
    rule_accuracy(table, label_noise, color_flip)
}
