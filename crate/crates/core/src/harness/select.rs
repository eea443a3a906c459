//! Model selection and hyperparameter grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Selection};
use super::train::{train, TrainReport};
use crate::seeds::grid_seed;
use crate::{Error, Result};

/// The metric a selection mode maximizes.
pub fn selection_metric(report: &TrainReport, mode: Selection) -> f64 {
    match mode {
        Selection::TrainDomain => report.val_accuracy,
        Selection::TestDomain => report.final_test_accuracy,
    }
}

/// Best report under `mode`; ties go to smaller β, then smaller α, then earlier position.
///
/// Every report must carry the same configured selection mode.
pub fn model_select(reports: &[TrainReport], mode: Selection) -> Result<TrainReport> {
    let first = reports.first().ok_or_else(|| Error::InvalidArgument("no reports to select from".into()))?;
    if reports.iter().any(|r| r.config.selection != first.config.selection) {
        return Err(Error::MixedSelectionModes);
    }
    let mut best = 0;
    for (i, r) in reports.iter().enumerate().skip(1) {
        let b = &reports[best];
        let (m, mb) = (selection_metric(r, mode), selection_metric(b, mode));
        let better = m > mb || (m == mb && (r.beta(), r.alpha()) < (b.beta(), b.alpha()));
        if better {
            best = i;
        }
    }
    Ok(reports[best].clone())
}

/// A grid point that did not produce a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub alpha: f64,
    pub beta: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Successful runs in α-major grid order.
    pub reports: Vec<TrainReport>,
    pub failures: Vec<GridFailure>,
}

/// Config for one grid point: weights set, run seed `seed ⊕ hash(α, β)`, data seed shared.
pub fn grid_point(base: &RunConfig, alpha: f64, beta: f64) -> RunConfig {
    let mut cfg = base.clone();
    cfg.objective.alpha = alpha;
    cfg.objective.beta = beta;
    cfg.data_seed = Some(base.data_seed());
    cfg.seed = grid_seed(base.seed, alpha, beta);
    cfg.objective.seed = cfg.seed;
    cfg
}

/// Train every `(α, β)` pair, up to `base.workers` at a time; failures are recorded
/// and the grid continues.
pub fn grid_run(base: &RunConfig, alphas: &[f64], betas: &[f64]) -> Result<GridResult> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::InvalidArgument("alpha and beta grids must be non-empty".into()));
    }
    let points: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
    let run = || -> Vec<(f64, f64, Result<TrainReport>)> {
        points.par_iter().map(|&(a, b)| (a, b, train(&grid_point(base, a, b)))).collect()
    };
    let outcomes = if base.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(base.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)
    };
    let mut result = GridResult { reports: Vec::new(), failures: Vec::new() };
    for (alpha, beta, out) in outcomes {
        match out {
            Ok(r) => result.reports.push(r),
            Err(e) => result.failures.push(GridFailure { alpha, beta, error: e.to_string() }),
        }
    }
    Ok(result)
}
