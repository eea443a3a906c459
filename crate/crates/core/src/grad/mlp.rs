//! Dense feed-forward networks on top of [`Graph`].

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Tensor, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Relu => g.relu(x),
            Activation::Identity => x,
        }
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, seed: u64) -> Self {
        Self { layer_widths, activation, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 || self.layer_widths.contains(&0) {
            return Err(Error::InvalidWidths(self.layer_widths.clone()));
        }
        Ok(())
    }
}

/// Anything with an ordered list of trainable tensors.
pub trait Model {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    /// Register every parameter as a graph leaf, in `params()` order.
    fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.params().into_iter().map(|p| g.param(p.clone())).collect()
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// `x · weight + bias`, weight stored `in × out`, bias `1 × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn in_width(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_width(&self) -> usize {
        self.weight.ncols()
    }

    /// Glorot-uniform weights, zero bias.
    fn glorot(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..=limit));
        Self { weight, bias: Tensor::zeros((1, fan_out)) }
    }
}

/// Stack of [`Linear`] layers with an activation between consecutive layers.
///
/// When `activate_output` is set the activation is also applied after the last
/// layer (used for feature extractors whose output feeds another layer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
    pub activate_output: bool,
}

pub fn build_mlp(spec: &MlpSpec) -> Result<Mlp> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layers = spec
        .layer_widths
        .windows(2)
        .map(|w| Linear::glorot(w[0], w[1], &mut rng))
        .collect();
    Ok(Mlp { layers, activation: spec.activation, activate_output: false })
}

impl Mlp {
    pub fn from_layers(layers: Vec<Linear>, activation: Activation, activate_output: bool) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidWidths(Vec::new()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_width() != pair[1].in_width() {
                return Err(Error::ShapeMismatch {
                    op: "mlp layers",
                    left: pair[0].weight.dim(),
                    right: pair[1].weight.dim(),
                });
            }
        }
        Ok(Self { layers, activation, activate_output })
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn out_width(&self) -> usize {
        self.layers[self.layers.len() - 1].out_width()
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.in_width()];
        w.extend(self.layers.iter().map(Linear::out_width));
        w
    }

    /// Forward pass using parameters already bound with [`Model::bind`].
    pub fn forward_bound(&self, g: &mut Graph, params: &[Var], x: Var) -> Result<Var> {
        debug_assert_eq!(params.len(), 2 * self.layers.len());
        let got = g.value(x).dim();
        if got.1 != self.in_width() {
            return Err(Error::ShapeMismatch {
                op: "mlp input",
                left: got,
                right: (got.0, self.in_width()),
            });
        }
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, pair) in params.chunks(2).enumerate() {
            h = g.matmul(h, pair[0])?;
            h = g.add_row(h, pair[1])?;
            if i < last || self.activate_output {
                h = self.activation.apply(g, h);
            }
        }
        Ok(h)
    }

    /// Bind parameters and run the batch through; returns `(output, params)`.
    pub fn forward(&self, g: &mut Graph, batch: &Tensor) -> Result<(Var, Vec<Var>)> {
        let params = self.bind(g);
        let x = g.constant(batch.clone());
        let out = self.forward_bound(g, &params, x)?;
        Ok((out, params))
    }

    /// Graph-free evaluation.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        if batch.ncols() != self.in_width() {
            return Err(Error::ShapeMismatch {
                op: "mlp input",
                left: batch.dim(),
                right: (batch.nrows(), self.in_width()),
            });
        }
        let last = self.layers.len() - 1;
        let mut h = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weight) + &layer.bias;
            if i < last || self.activate_output {
                h.mapv_inplace(|v| self.activation.eval(v));
            }
        }
        Ok(h)
    }
}

impl Model for Mlp {
    fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }
}

/// Representation network `f` followed by a linear classifier head `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub features: Mlp,
    pub head: Mlp,
}

/// Parameter handles of a [`Classifier`] inside one graph.
#[derive(Debug, Clone)]
pub struct BoundClassifier {
    pub features: Vec<Var>,
    pub head: Vec<Var>,
}

impl BoundClassifier {
    pub fn all(&self) -> Vec<Var> {
        self.features.iter().chain(&self.head).copied().collect()
    }
}

impl Classifier {
    /// Split an MLP into everything-but-the-last-layer and the last layer.
    ///
    /// The representation `Z` is the penultimate layer's output; `post_activation`
    /// decides whether the activation is applied to it.
    pub fn from_mlp(mlp: Mlp, post_activation: bool) -> Result<Self> {
        let mut layers = mlp.layers;
        if layers.len() < 2 {
            return Err(Error::InvalidWidths(vec![layers[0].in_width(), layers[0].out_width()]));
        }
        let head = layers.pop().expect("at least two layers");
        Ok(Self {
            features: Mlp::from_layers(layers, mlp.activation, post_activation)?,
            head: Mlp::from_layers(vec![head], Activation::Identity, false)?,
        })
    }

    pub fn build(spec: &MlpSpec, post_activation: bool) -> Result<Self> {
        Self::from_mlp(build_mlp(spec)?, post_activation)
    }

    pub fn bind(&self, g: &mut Graph) -> BoundClassifier {
        BoundClassifier { features: self.features.bind(g), head: self.head.bind(g) }
    }

    pub fn representation_width(&self) -> usize {
        self.features.out_width()
    }

    pub fn classes(&self) -> usize {
        self.head.out_width()
    }

    pub fn predict_features(&self, batch: &Tensor) -> Result<Tensor> {
        self.features.predict(batch)
    }

    pub fn predict_logits(&self, batch: &Tensor) -> Result<Tensor> {
        self.head.predict(&self.features.predict(batch)?)
    }

    /// Fraction of rows whose arg-max logit equals the label.
    pub fn accuracy(&self, batch: &Tensor, labels: &[usize]) -> Result<f64> {
        let logits = self.predict_logits(batch)?;
        Ok(accuracy(&logits, labels))
    }
}

impl Model for Classifier {
    fn params(&self) -> Vec<&Tensor> {
        let mut p = self.features.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.features.params_mut();
        p.extend(self.head.params_mut());
        p
    }

    fn bind(&self, g: &mut Graph) -> Vec<Var> {
        Classifier::bind(self, g).all()
    }
}

/// Arg-max accuracy; ties resolve to the lowest class index.
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = logits
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &y)| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best == y
        })
        .count();
    hits as f64 / labels.len() as f64
}
