//! Central finite-difference gradient checking.

use ndarray::Array2;

use super::graph::{Graph, Tensor, Var};
use super::mlp::Model;
use crate::{Error, Result};

/// Outcome of [`check_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// `max |analytic - numeric| / max(1, |numeric|)` over every parameter entry.
    pub max_rel_error: f64,
    /// Parameter tensor and flat entry index where the maximum occurred.
    pub worst: (usize, usize),
    pub entries_checked: usize,
}

/// Compare analytic gradients of a scalar loss against central differences.
///
/// `loss` receives the model, a fresh graph, and the bound parameter handles (in
/// [`Model::params`] order) and must return a scalar node. It is called once for
/// the analytic pass and twice per parameter entry.
pub fn check_gradient<M, F>(model: &mut M, step: f64, mut loss: F) -> Result<GradCheck>
where
    M: Model,
    F: FnMut(&M, &mut Graph, &[Var]) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be > 0, got {step}")));
    }
    let analytic: Vec<Tensor> = {
        let mut g = Graph::new();
        let params = model.bind(&mut g);
        let out = loss(model, &mut g, &params)?;
        g.backward(out)?;
        params.iter().map(|&p| g.grad(p).clone()).collect()
    };

    let mut eval = |model: &M| -> Result<f64> {
        let mut g = Graph::new();
        let params = model.bind(&mut g);
        let out = loss(model, &mut g, &params)?;
        Ok(g.scalar(out))
    };

    let mut report = GradCheck { max_rel_error: 0.0, worst: (0, 0), entries_checked: 0 };
    let count = model.params().len();
    for t in 0..count {
        let len = model.params()[t].len();
        for e in 0..len {
            let original = flat_get(model.params()[t], e);
            flat_set(model.params_mut()[t], e, original + step);
            let plus = eval(model)?;
            flat_set(model.params_mut()[t], e, original - step);
            let minus = eval(model)?;
            flat_set(model.params_mut()[t], e, original);

            let numeric = (plus - minus) / (2.0 * step);
            let err = (flat_get(&analytic[t], e) - numeric).abs() / numeric.abs().max(1.0);
            if err > report.max_rel_error || !err.is_finite() {
                report.max_rel_error = err;
                report.worst = (t, e);
            }
            report.entries_checked += 1;
        }
    }
    Ok(report)
}

fn flat_get(t: &Array2<f64>, i: usize) -> f64 {
    let cols = t.ncols();
    t[[i / cols, i % cols]]
}

fn flat_set(t: &mut Array2<f64>, i: usize, v: f64) {
    let cols = t.ncols();
    t[[i / cols, i % cols]] = v;
}

/// Losses with a name, for quick checks of a model against a labelled batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedLoss {
    /// Half the mean squared output, `0.5 · mean(out²)`.
    Quadratic,
    /// Mean softmax cross-entropy against integer labels.
    CrossEntropy,
}

/// [`check_gradient`] for an [`super::mlp::Mlp`]-like model whose output is the logits.
pub fn check_named_gradient<M>(
    model: &mut M,
    loss: NamedLoss,
    forward: impl Fn(&M, &mut Graph, &[Var], Var) -> Result<Var>,
    batch: &Tensor,
    labels: &[usize],
    step: f64,
) -> Result<GradCheck>
where
    M: Model,
{
    check_gradient(model, step, |m, g, params| {
        let x = g.constant(batch.clone());
        let out = forward(m, g, params, x)?;
        match loss {
            NamedLoss::Quadratic => {
                let sq = g.square(out);
                let mean = g.mean(sq);
                Ok(g.scale(mean, 0.5))
            }
            NamedLoss::CrossEntropy => g.cross_entropy(out, labels),
        }
    })
}
