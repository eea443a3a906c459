//! Risk, the IRM dummy-classifier penalty, and the CE-IRM objective
//! `Σ_e [R_e + α·P_e] + β·H(Z|Y)`.

use serde::{Deserialize, Serialize};

use crate::entropy::{batch_entropy_proxy, ce_surrogate, label_entropy, noise_matrix, variational_cond_entropy};
use crate::env::Environment;
use crate::grad::{BoundClassifier, Classifier, Graph, Mlp, Tensor, Var};
use crate::seeds::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    /// `H(Z|Y)` through [`ce_surrogate`].
    CeSurrogate,
    /// `H(Z)` proxy only (the IB-IRM baseline).
    HZOnly,
    /// No entropy term.
    None,
}

impl EntropyMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ce_surrogate" => Some(Self::CeSurrogate),
            "h_z_only" => Some(Self::HZOnly),
            "none" => Some(Self::None),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::CeSurrogate => "ce_surrogate",
            Self::HZOnly => "h_z_only",
            Self::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    /// IRM penalty weight.
    pub alpha: f64,
    /// Entropy term weight.
    pub beta: f64,
    pub noise_std: f64,
    pub entropy_mode: EntropyMode,
    pub seed: u64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self { alpha: 0.0, beta: 0.0, noise_std: 0.1, entropy_mode: EntropyMode::CeSurrogate, seed: 0 }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("noise_std", self.noise_std)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Short method label: ERM, IRM, IB-ERM, IB-IRM, CE-ERM or CE-IRM.
    pub fn method(&self) -> &'static str {
        let irm = self.alpha > 0.0;
        match (self.entropy_mode, self.beta > 0.0, irm) {
            (EntropyMode::CeSurrogate, true, true) => "CE-IRM",
            (EntropyMode::CeSurrogate, true, false) => "CE-ERM",
            (EntropyMode::HZOnly, true, true) => "IB-IRM",
            (EntropyMode::HZOnly, true, false) => "IB-ERM",
            (_, _, true) => "IRM",
            _ => "ERM",
        }
    }

    /// Whether the representation is perturbed with noise before the head.
    fn noisy(&self) -> bool {
        self.entropy_mode == EntropyMode::CeSurrogate && self.beta > 0.0 && self.noise_std > 0.0
    }
}

/// Inputs and labels of one environment (or a minibatch of it).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvBatch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl From<&Environment> for EnvBatch {
    fn from(env: &Environment) -> Self {
        Self { inputs: env.inputs.clone(), labels: env.labels.clone() }
    }
}

/// Mean cross-entropy of the model's logits on one batch.
pub fn erm_risk(g: &mut Graph, model: &Classifier, bound: &BoundClassifier, batch: &EnvBatch) -> Result<Var> {
    if batch.labels.is_empty() {
        return Err(Error::InvalidArgument("empty environment".into()));
    }
    let x = g.constant(batch.inputs.clone());
    let z = model.features.forward_bound(g, &bound.features, x)?;
    let logits = model.head.forward_bound(g, &bound.head, z)?;
    g.cross_entropy(logits, &batch.labels)
}

/// Squared slope of the mean cross-entropy along a scalar multiplier on the logits, at 1.
pub fn irm_penalty(g: &mut Graph, logits: Var, labels: &[usize]) -> Result<Var> {
    g.irm_penalty(logits, labels)
}

/// Handles to the pieces of one objective evaluation.
#[derive(Debug, Clone)]
pub struct ObjectiveTerms {
    pub total: Var,
    pub risks: Vec<Var>,
    pub penalties: Vec<Var>,
    pub entropy: Option<Var>,
    /// Pooled representation fed to the entropy term (noisy when noise is active).
    pub representation: Var,
}

impl ObjectiveTerms {
    pub fn risk_values(&self, g: &Graph) -> Vec<f64> {
        self.risks.iter().map(|&v| g.scalar(v)).collect()
    }

    pub fn penalty_value(&self, g: &Graph) -> f64 {
        self.penalties.iter().map(|&v| g.scalar(v)).sum()
    }

    pub fn entropy_value(&self, g: &Graph) -> f64 {
        self.entropy.map_or(0.0, |v| g.scalar(v))
    }
}

/// `Σ_e [R_e + α·P_e] + β·E` with `E` chosen by `cfg.entropy_mode` and computed on the
/// representation pooled over all batches.
///
/// In `ce_surrogate` mode with `β > 0` the head sees `Z + noise_std·η` everywhere
/// (risk, penalty and entropy term share one draw of `η` per call).
pub fn ce_irm_objective(
    g: &mut Graph,
    model: &Classifier,
    bound: &BoundClassifier,
    envs: &[EnvBatch],
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveTerms> {
    cfg.validate()?;
    if envs.is_empty() {
        return Err(Error::InvalidArgument("need at least one environment".into()));
    }
    let mut reps = Vec::with_capacity(envs.len());
    let mut risks = Vec::with_capacity(envs.len());
    let mut penalties = Vec::with_capacity(envs.len());
    let mut total: Option<Var> = None;
    for (e, batch) in envs.iter().enumerate() {
        let x = g.constant(batch.inputs.clone());
        let mut z = model.features.forward_bound(g, &bound.features, x)?;
        if cfg.noisy() {
            let (n, d) = g.value(z).dim();
            let eta = g.constant(noise_matrix(n, d, cfg.noise_std, derive_seed(cfg.seed, &format!("env{e}"))));
            z = g.add(z, eta)?;
        }
        let logits = model.head.forward_bound(g, &bound.head, z)?;
        let risk = g.cross_entropy(logits, &batch.labels)?;
        let pen = irm_penalty(g, logits, &batch.labels)?;
        let mut term = risk;
        if cfg.alpha != 0.0 {
            let weighted = g.scale(pen, cfg.alpha);
            term = g.add(term, weighted)?;
        }
        total = Some(match total {
            None => term,
            Some(t) => g.add(t, term)?,
        });
        reps.push(z);
        risks.push(risk);
        penalties.push(pen);
    }
    let mut total = total.expect("at least one environment");
    let representation = if reps.len() == 1 { reps[0] } else { g.concat_rows(&reps)? };

    let entropy = match cfg.entropy_mode {
        EntropyMode::None => None,
        EntropyMode::HZOnly => Some(batch_entropy_proxy(g, representation)?),
        EntropyMode::CeSurrogate => {
            let labels: Vec<usize> = envs.iter().flat_map(|b| b.labels.iter().copied()).collect();
            // Noise is already in `representation`.
            Some(ce_surrogate(g, representation, &labels, &model.head, &bound.head, 0.0, cfg.seed)?)
        }
    };
    if let (Some(h), true) = (entropy, cfg.beta != 0.0) {
        let weighted = g.scale(h, cfg.beta);
        total = g.add(total, weighted)?;
    }
    Ok(ObjectiveTerms { total, risks, penalties, entropy, representation })
}

/// `proxy(Z) − θ·(Ĥ(Y) − variational_cond_entropy(Z))`; at `θ = 1` this is [`ce_surrogate`].
#[allow(clippy::too_many_arguments)]
pub fn dib_loss(
    g: &mut Graph,
    z: Var,
    labels: &[usize],
    head: &Mlp,
    head_params: &[Var],
    theta: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Var> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be ≥ 0, got {theta}")));
    }
    let hz = batch_entropy_proxy(g, z)?;
    let vce = variational_cond_entropy(g, z, labels, head, head_params, noise_std, seed)?;
    let hy = label_entropy(labels, head.out_width());
    let neg_mi = g.offset(vce, -hy);
    let weighted = g.scale(neg_mi, theta);
    g.add(hz, weighted)
}
