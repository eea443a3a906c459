//! Reverse-mode differentiation over dense 2-D arrays.

pub mod check;
pub mod graph;
pub mod mlp;

pub use check::{check_gradient, check_named_gradient, GradCheck, NamedLoss};
pub use graph::{softmax_rows, Graph, GraphNode, Op, Tensor, Var};
pub use mlp::{accuracy, build_mlp, Activation, BoundClassifier, Classifier, Linear, Mlp, MlpSpec, Model};
