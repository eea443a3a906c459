//! Differential and discrete entropy: closed forms, nonparametric estimates and
//! differentiable surrogates for `H(Z|Y)`.

mod knn;
mod surrogate;

pub use knn::{conditional_knn_entropy, conditional_knn_entropy_nd, knn_entropy, knn_entropy_nd, JACKKNIFE_GROUPS};
pub use surrogate::{
    batch_entropy_proxy, ce_surrogate, noise_matrix, variational_cond_entropy, VARIANCE_FLOOR,
};

use serde::{Deserialize, Serialize};

use crate::env::label_frequencies;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Knn,
    Histogram,
    GaussianProxy,
    Variational,
}

/// An entropy value in nats with its provenance and uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub nats: f64,
    pub method: Method,
    pub n: usize,
    /// 0 when the method has no neighbor parameter.
    pub k_neighbors: usize,
    pub stderr: f64,
}

impl EntropyEstimate {
    pub fn closed_form(nats: f64) -> Self {
        Self { nats, method: Method::ClosedForm, n: 0, k_neighbors: 0, stderr: 0.0 }
    }

    /// `true` when `value` lies within `sigmas` standard errors of the estimate.
    pub fn brackets(&self, value: f64, sigmas: f64) -> bool {
        (self.nats - value).abs() <= sigmas * self.stderr
    }
}

/// `½ ln(2πe·variance)`.
pub fn gaussian_entropy(variance: f64) -> Result<EntropyEstimate> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidArgument(format!("variance must be positive and finite, got {variance}")));
    }
    Ok(EntropyEstimate::closed_form(
        0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * variance).ln(),
    ))
}

/// `ln(width)` for a uniform density of that width.
pub fn uniform_entropy(width: f64) -> Result<EntropyEstimate> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidArgument(format!("width must be positive and finite, got {width}")));
    }
    Ok(EntropyEstimate::closed_form(width.ln()))
}

/// Plug-in (maximum-likelihood) label entropy in nats.
pub fn label_entropy(labels: &[usize], classes: usize) -> f64 {
    label_frequencies(labels, classes).iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

/// Plug-in `H(Y|Z)` after cutting 1-d `z` into `bins` equal-width cells.
///
/// The stderr is a delete-a-group jackknife over the same groups the kNN
/// estimator uses.
pub fn histogram_cond_label_entropy(z: &[f64], labels: &[usize], classes: usize, bins: usize) -> Result<EntropyEstimate> {
    if z.len() != labels.len() || z.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("need matching non-empty z and labels, bins ≥ 1".into()));
    }
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let cell: Vec<usize> = z.iter().map(|&v| (((v - lo) / width) as usize).min(bins - 1)).collect();

    let estimate = |skip: Option<usize>| -> f64 {
        let mut counts = vec![0.0; bins * classes];
        let mut total = 0.0;
        for (i, (&c, &y)) in cell.iter().zip(labels).enumerate() {
            if skip == Some(i % JACKKNIFE_GROUPS) {
                continue;
            }
            counts[c * classes + y] += 1.0;
            total += 1.0;
        }
        let mut h = 0.0;
        for row in counts.chunks(classes) {
            let m: f64 = row.iter().sum();
            for &c in row.iter().filter(|&&c| c > 0.0) {
                h -= c / total * (c / m).ln();
            }
        }
        h
    };
    let nats = estimate(None);
    let stderr = if z.len() >= JACKKNIFE_GROUPS {
        let reps: Vec<f64> = (0..JACKKNIFE_GROUPS).map(|g| estimate(Some(g))).collect();
        jackknife_stderr(&reps)
    } else {
        0.0
    };
    Ok(EntropyEstimate { nats, method: Method::Histogram, n: z.len(), k_neighbors: 0, stderr })
}

/// `sqrt((G-1)/G · Σ (θ_g - θ̄)²)` over delete-a-group replicates.
pub(crate) fn jackknife_stderr(reps: &[f64]) -> f64 {
    let g = reps.len() as f64;
    let mean = reps.iter().sum::<f64>() / g;
    ((g - 1.0) / g * reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>()).sqrt()
}
