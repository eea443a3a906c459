//! Conditional-entropy invariant risk minimization at desk scale.
//!
//! * [`grad`]: a small reverse-mode autodiff engine and dense MLPs.
//! * [`env`]: synthetic multi-domain generators, Bayes oracles and MNIST IDX ingestion.
//! * [`entropy`]: closed forms, the Kozachenko–Leonenko estimator and differentiable surrogates.
//! * [`objectives`]: ERM, the IRM dummy-classifier penalty and the combined CE-IRM loss.
//! * [`lemma`]: numerical checks of the mixture-entropy inequalities.
//! * [`harness`]: training, model selection, grids and report output.

// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod env;
pub mod grad;
pub mod harness;
pub mod lemma;
pub mod objectives;
pub mod seeds;

use std::path::PathBuf;

pub use grad::{Graph, Tensor, Var};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("backward needs a scalar output, got shape {0:?}")]
    NonScalarOutput((usize, usize)),
    #[error("invalid layer widths {0:?}: need at least two, all positive")]
    InvalidWidths(Vec<usize>),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("{0}")]
    InvalidArgument(String),

    #[error("idx: bad magic {found:#010x} at byte 0 (expected {expected:#010x})")]
    BadMagic { found: u32, expected: u32 },
    #[error("idx: truncated at byte {offset}: expected {expected} bytes, got {actual}")]
    Truncated { offset: usize, expected: usize, actual: usize },
    #[error("idx: dimension product overflows at byte {offset}")]
    DimensionOverflow { offset: usize },
    #[error("idx: unsupported element type {code:#04x} at byte 2")]
    UnsupportedType { code: u8 },
    #[error("need {needed} images, only {available} available")]
    InsufficientImages { needed: usize, available: usize },

    #[error("degenerate samples: {0}")]
    Degenerate(String),
    #[error("class {label} has {count} samples, need more than k = {k}")]
    ClassTooSmall { label: usize, count: usize, k: usize },
    #[error("mixing weights ({a}, {b}) are not on the unit circle")]
    NotUnitCircle { a: f64, b: f64 },
    #[error("entropy ordering violated: H(Z_i|Y) = {h_i:.6} is not below H(Z_s|Y) = {h_s:.6}")]
    OrderingViolation { h_i: f64, h_s: f64 },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("missing data file {path}")]
    MissingData { path: PathBuf },
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed file {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("reports mix selection modes")]
    MixedSelectionModes,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
