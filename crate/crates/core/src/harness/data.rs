//! Build the training, validation and test environments a run config describes.

use std::path::PathBuf;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Dataset, RunConfig};
use crate::env::{colorize_mnist, gen_two_bit, load_idx, ClassConditional, ColorSpec, Environment, Family};
use crate::seeds::derive_seed;
use crate::{Error, Result};

pub const DATA_DIR_VAR: &str = "CEIRM_DATA_DIR";
pub const MNIST_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_LABELS: &str = "train-labels-idx1-ubyte";

/// Shift of the invariant feature's class means in the linear-mixture dataset.
const MIXTURE_INVARIANT_SHIFT: f64 = 0.5;
/// Shift of the spurious feature's class means in the linear-mixture dataset.
const MIXTURE_SPURIOUS_SHIFT: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    /// Training part of each seen environment.
    pub train: Vec<Environment>,
    /// Held-out part of each seen environment.
    pub val: Vec<Environment>,
    pub test: Environment,
}

impl DataSplit {
    pub fn train_len(&self) -> usize {
        self.train.iter().map(Environment::len).sum()
    }

    pub fn val_len(&self) -> usize {
        self.val.iter().map(Environment::len).sum()
    }
}

/// Directory holding the MNIST IDX files: the config's `data_dir`, else `CEIRM_DATA_DIR`.
pub fn data_dir(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.data_dir.clone().or_else(|| std::env::var_os(DATA_DIR_VAR).map(PathBuf::from))
}

pub fn load_data(cfg: &RunConfig) -> Result<DataSplit> {
    cfg.validate()?;
    let seed = cfg.data_seed();
    let mut envs: Vec<Environment> = match cfg.dataset {
        Dataset::TwoBit => {
            let mut v = Vec::new();
            for (e, (&n, &flip)) in cfg.train_sizes.iter().zip(&cfg.train_color_flips).enumerate() {
                v.push(gen_two_bit(n, cfg.label_noise, flip, derive_seed(seed, &format!("train{e}")))?);
            }
            v.push(gen_two_bit(cfg.test_size, cfg.label_noise, cfg.test_color_flip, derive_seed(seed, "test"))?);
            v
        }
        Dataset::LinearMixture => {
            let mut v = Vec::new();
            for (e, (&n, &flip)) in cfg.train_sizes.iter().zip(&cfg.train_color_flips).enumerate() {
                v.push(two_feature_mixture(n, cfg.label_noise, flip, derive_seed(seed, &format!("train{e}")))?);
            }
            v.push(two_feature_mixture(cfg.test_size, cfg.label_noise, cfg.test_color_flip, derive_seed(seed, "test"))?);
            v
        }
        Dataset::AcCmnist => {
            let dir = data_dir(cfg).ok_or_else(|| Error::MissingData { path: PathBuf::from(format!("${DATA_DIR_VAR}")) })?;
            let images = load_idx(dir.join(MNIST_IMAGES))?;
            let labels = load_idx(dir.join(MNIST_LABELS))?;
            let mut specs: Vec<ColorSpec> = cfg
                .train_sizes
                .iter()
                .zip(&cfg.train_color_flips)
                .map(|(&n, &f)| ColorSpec::new(n, cfg.label_noise, f))
                .collect();
            specs.push(ColorSpec::new(cfg.test_size, cfg.label_noise, cfg.test_color_flip));
            colorize_mnist(&images, &labels, &specs, seed, cfg.downscale)?
        }
    };
    let test = envs.pop().expect("test environment appended last");
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (e, env) in envs.iter().enumerate() {
        let mut idx: Vec<usize> = (0..env.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("split{e}"))));
        let n_val = ((env.len() as f64) * cfg.val_fraction).round() as usize;
        let n_val = n_val.min(env.len() - 1);
        val.push(env.subset(&idx[..n_val], format!("{}/val", env.env_id)));
        train.push(env.subset(&idx[n_val..], format!("{}/train", env.env_id)));
    }
    Ok(DataSplit { train, val, test })
}

/// Two continuous features: an invariant uniform one whose class mean follows the
/// label, and a spurious Gaussian one whose class mean follows a copy of the label
/// flipped with probability `flip`. Labels get `label_noise` flips relative to the
/// invariant feature's class.
fn two_feature_mixture(n: usize, label_noise: f64, flip: f64, seed: u64) -> Result<Environment> {
    use rand::Rng;
    let env_id = format!("linear_mixture(noise={label_noise},flip={flip})");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &env_id));
    let inv = ClassConditional::new(Family::UniformUnit, vec![-MIXTURE_INVARIANT_SHIFT, MIXTURE_INVARIANT_SHIFT]);
    let spu = ClassConditional::new(Family::GaussianUnit, vec![-MIXTURE_SPURIOUS_SHIFT, MIXTURE_SPURIOUS_SHIFT]);
    let mut inputs = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = rng.random_range(0..2usize);
        let label = class ^ rng.random_bool(label_noise) as usize;
        let spurious_class = label ^ rng.random_bool(flip) as usize;
        inputs[[i, 0]] = inv.draw(class, &mut rng);
        inputs[[i, 1]] = spu.draw(spurious_class, &mut rng);
        labels.push(label);
    }
    let mut env = Environment::new(inputs, labels, 2, env_id)?;
    env.seed = seed;
    for (k, v) in [("n", n as f64), ("label_noise", label_noise), ("color_flip", flip), ("seed", seed as f64)] {
        env.gen_params.insert(k.into(), v);
    }
    Ok(env)
}
