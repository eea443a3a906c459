//! The training loop.

use std::time::Instant;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::data::{load_data, DataSplit};
use super::optim::Optimizer;
use crate::env::Environment;
use crate::grad::{Activation, Classifier, Graph, MlpSpec, Tensor};
use crate::objectives::{ce_irm_objective, EnvBatch, ObjectiveConfig};
use crate::seeds::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// Mean risk of each training environment over the epoch's steps.
    pub train_risk: Vec<f64>,
    /// Mean over steps of the summed IRM penalties.
    pub penalty: f64,
    /// Mean over steps of the entropy term (0 when disabled).
    pub entropy: f64,
    pub val_accuracy: f64,
    /// Only recorded when validation tracking is on.
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub method: String,
    pub per_epoch: Vec<EpochMetrics>,
    pub final_test_accuracy: f64,
    /// Validation accuracy of the selected model.
    pub val_accuracy: f64,
    pub train_accuracy: f64,
    /// Index into `per_epoch` of the reported model (0 when no epoch ran).
    pub selected_epoch: usize,
    pub config: RunConfig,
    pub wall_seconds: Option<f64>,
}

impl TrainReport {
    pub fn alpha(&self) -> f64 {
        self.config.objective.alpha
    }

    pub fn beta(&self) -> f64 {
        self.config.objective.beta
    }
}

/// A finished run with the model and data it used.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: Classifier,
    pub data: DataSplit,
}

pub fn train(cfg: &RunConfig) -> Result<TrainReport> {
    Ok(train_full(cfg)?.report)
}

pub fn train_full(cfg: &RunConfig) -> Result<TrainOutcome> {
    let data = load_data(cfg)?;
    train_on(cfg, data)
}

/// Network widths `[input, hidden..., classes]`; the last hidden layer is `Z`.
pub fn build_model(cfg: &RunConfig, input: usize, classes: usize) -> Result<Classifier> {
    let mut widths = vec![input];
    widths.extend(&cfg.hidden);
    widths.push(classes);
    Classifier::build(&MlpSpec::new(widths, Activation::Relu, derive_seed(cfg.seed, "init")), true)
}

fn pooled(envs: &[Environment]) -> (Tensor, Vec<usize>) {
    let views: Vec<_> = envs.iter().map(|e| e.inputs.view()).collect();
    let x = concatenate(Axis(0), &views).expect("environments share a width");
    (x, envs.iter().flat_map(|e| e.labels.iter().copied()).collect())
}

/// Weights in effect at `epoch`: α capped at 1 during the penalty anneal, β off during warm-up.
pub fn scheduled_objective(cfg: &RunConfig, epoch: usize, step_seed: u64) -> ObjectiveConfig {
    let mut obj = cfg.objective;
    if epoch < cfg.penalty_anneal_epochs {
        obj.alpha = obj.alpha.min(1.0);
    }
    if epoch < cfg.entropy_warmup_epochs {
        obj.beta = 0.0;
    }
    obj.seed = step_seed;
    obj
}

pub fn train_on(cfg: &RunConfig, data: DataSplit) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let classes = data.train.iter().map(|e| e.classes).chain([data.test.classes]).max().unwrap_or(2);
    let mut model = build_model(cfg, data.test.width(), classes)?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr);
    let (val_x, val_y) = pooled(&data.val);
    let min_len = data.train.iter().map(Environment::len).min().unwrap_or(0);
    let full_batch = cfg.batch_size == 0 || cfg.batch_size >= min_len;
    let steps = if full_batch { 1 } else { min_len.div_ceil(cfg.batch_size) };
    let full: Vec<EnvBatch> = if full_batch { data.train.iter().map(EnvBatch::from).collect() } else { Vec::new() };

    let mut per_epoch = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Classifier)> = None;
    for epoch in 0..cfg.epochs {
        let orders: Vec<Vec<usize>> = if full_batch {
            Vec::new()
        } else {
            data.train
                .iter()
                .enumerate()
                .map(|(e, env)| {
                    let mut idx: Vec<usize> = (0..env.len()).collect();
                    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("epoch{epoch}/env{e}"))));
                    idx
                })
                .collect()
        };
        let mut risk_sum = vec![0.0; data.train.len()];
        let (mut pen_sum, mut ent_sum) = (0.0, 0.0);
        for step in 0..steps {
            let minibatches: Vec<EnvBatch>;
            let batches = if full_batch {
                &full
            } else {
                minibatches = data
                    .train
                    .iter()
                    .zip(&orders)
                    .map(|(env, order)| {
                        let idx: Vec<usize> =
                            (step * cfg.batch_size..(step + 1) * cfg.batch_size).map(|i| order[i % order.len()]).collect();
                        EnvBatch {
                            inputs: env.inputs.select(Axis(0), &idx),
                            labels: idx.iter().map(|&i| env.labels[i]).collect(),
                        }
                    })
                    .collect();
                &minibatches
            };
            let obj = scheduled_objective(cfg, epoch, derive_seed(cfg.seed ^ cfg.objective.seed, &format!("{epoch}/{step}")));
            let mut g = Graph::new();
            let bound = model.bind(&mut g);
            let terms = ce_irm_objective(&mut g, &model, &bound, batches, &obj)?;
            let total = g.scalar(terms.total);
            if !total.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            g.backward(terms.total)?;
            let grads: Vec<Tensor> = bound.all().iter().map(|&p| g.grad(p).clone()).collect();
            opt.step(&mut model, &grads);
            for (s, r) in risk_sum.iter_mut().zip(terms.risk_values(&g)) {
                *s += r;
            }
            pen_sum += terms.penalty_value(&g);
            ent_sum += terms.entropy_value(&g);
        }
        let val_accuracy = model.accuracy(&val_x, &val_y)?;
        let test_accuracy = if cfg.track_validation {
            Some(model.accuracy(&data.test.inputs, &data.test.labels)?)
        } else {
            None
        };
        if cfg.track_validation && best.as_ref().is_none_or(|b| val_accuracy > b.0) {
            best = Some((val_accuracy, epoch, model.clone()));
        }
        let k = steps as f64;
        per_epoch.push(EpochMetrics {
            train_risk: risk_sum.iter().map(|s| s / k).collect(),
            penalty: pen_sum / k,
            entropy: ent_sum / k,
            val_accuracy,
            test_accuracy,
        });
    }

    let (selected_epoch, chosen) = match best {
        Some((_, epoch, m)) => (epoch, m),
        None => (cfg.epochs.saturating_sub(1), model),
    };
    let (train_x, train_y) = pooled(&data.train);
    let report = TrainReport {
        method: cfg.objective.method().to_string(),
        final_test_accuracy: chosen.accuracy(&data.test.inputs, &data.test.labels)?,
        val_accuracy: chosen.accuracy(&val_x, &val_y)?,
        train_accuracy: chosen.accuracy(&train_x, &train_y)?,
        per_epoch,
        selected_epoch,
        config: cfg.clone(),
        wall_seconds: cfg.timing.then(|| start.elapsed().as_secs_f64()),
    };
    Ok(TrainOutcome { report, model: chosen, data })
}

/// Representation of every training sample, pooled across environments.
pub fn training_representation(outcome: &TrainOutcome) -> Result<(Array2<f64>, Vec<usize>)> {
    let (x, y) = pooled(&outcome.data.train);
    Ok((outcome.model.predict_features(&x)?, y))
}
