//! Anti-causal colored MNIST: binary digit label, label noise, and a color bit
//! tied to the label with an environment-specific flip rate.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_prob, Environment, IdxData};
use crate::seeds::derive_seed;
use crate::{Error, Result};

/// One environment to carve out: `(size, label_noise, color_flip)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorSpec {
    pub size: usize,
    pub label_noise: f64,
    pub color_flip: f64,
}

impl ColorSpec {
    pub fn new(size: usize, label_noise: f64, color_flip: f64) -> Self {
        Self { size, label_noise, color_flip }
    }
}

/// Build colored environments from grayscale images and digit labels.
///
/// Images are shuffled once with `seed` and consumed in order. Each image is
/// decimated by `downscale` (1 keeps it), scaled to [0, 1], and written into the
/// red channel (color 0) or green channel (color 1); the output row is
/// `[red pixels, green pixels]`, width `2·rows·cols` after decimation.
pub fn colorize_mnist(
    images: &IdxData,
    labels: &IdxData,
    specs: &[ColorSpec],
    seed: u64,
    downscale: usize,
) -> Result<Vec<Environment>> {
    let IdxData::Images { n, rows, cols, pixels } = images else {
        return Err(Error::InvalidArgument("expected a grayscale n×rows×cols image tensor".into()));
    };
    let IdxData::Labels(digits) = labels else {
        return Err(Error::InvalidArgument("expected a label vector".into()));
    };
    if digits.len() != *n {
        return Err(Error::InvalidArgument(format!("{n} images but {} labels", digits.len())));
    }
    if downscale == 0 {
        return Err(Error::InvalidArgument("downscale must be ≥ 1".into()));
    }
    let needed: usize = specs.iter().map(|s| s.size).sum();
    if needed > *n {
        return Err(Error::InsufficientImages { needed, available: *n });
    }
    for s in specs {
        check_prob("label_noise", s.label_noise, 0.5)?;
        check_prob("color_flip", s.color_flip, 1.0)?;
    }

    let (r2, c2) = (rows.div_ceil(downscale), cols.div_ceil(downscale));
    let plane = r2 * c2;
    let mut order: Vec<usize> = (0..*n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, "mnist_order")));

    let mut envs = Vec::with_capacity(specs.len());
    let mut cursor = 0;
    for (e, spec) in specs.iter().enumerate() {
        let env_id = format!("ac_cmnist{e}(noise={},flip={})", spec.label_noise, spec.color_flip);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &env_id));
        let mut inputs = Array2::zeros((spec.size, 2 * plane));
        let mut ys = Vec::with_capacity(spec.size);
        for i in 0..spec.size {
            let src = order[cursor + i];
            let label = usize::from(digits[src] >= 5) ^ rng.random_bool(spec.label_noise) as usize;
            let color = label ^ rng.random_bool(spec.color_flip) as usize;
            let img = &pixels[src * rows * cols..(src + 1) * rows * cols];
            let mut k = color * plane;
            for r in (0..*rows).step_by(downscale) {
                for c in (0..*cols).step_by(downscale) {
                    inputs[[i, k]] = img[r * cols + c] as f64 / 255.0;
                    k += 1;
                }
            }
            ys.push(label);
        }
        cursor += spec.size;
        let mut env = Environment::new(inputs, ys, 2, env_id)?;
        env.seed = seed;
        for (k, v) in [
            ("n", spec.size as f64),
            ("label_noise", spec.label_noise),
            ("color_flip", spec.color_flip),
            ("downscale", downscale as f64),
            ("seed", seed as f64),
        ] {
            env.gen_params.insert(k.into(), v);
        }
        envs.push(env);
    }
    Ok(envs)
}
