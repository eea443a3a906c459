//! Linear mixtures `Z = a·Z_i + b·Z_s` of class-conditionally independent unit-variance features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seeds::derive_seed;
use crate::{Error, Result};

/// Unit-variance location families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GaussianUnit,
    /// Uniform on `[-√3, √3]`.
    UniformUnit,
    /// Laplace with scale `1/√2`.
    LaplaceUnit,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::UniformUnit, Family::LaplaceUnit, Family::GaussianUnit];

    /// Differential entropy in nats of the zero-mean unit-variance member.
    pub fn entropy(self) -> f64 {
        match self {
            Family::GaussianUnit => 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln(),
            Family::UniformUnit => (2.0 * 3f64.sqrt()).ln(),
            Family::LaplaceUnit => 1.0 + (2.0 / 2f64.sqrt()).ln(),
        }
    }

    /// One zero-mean unit-variance draw.
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Family::GaussianUnit => rng.sample(StandardNormal),
            Family::UniformUnit => {
                let h = 3f64.sqrt();
                rng.random_range(-h..h)
            }
            Family::LaplaceUnit => {
                // Inverse CDF on u ∈ (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                let scale = std::f64::consts::FRAC_1_SQRT_2;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "gaussian" | "gaussian_unit" | "normal" => Some(Family::GaussianUnit),
            "uniform" | "uniform_unit" => Some(Family::UniformUnit),
            "laplace" | "laplace_unit" => Some(Family::LaplaceUnit),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::GaussianUnit => "gaussian",
            Family::UniformUnit => "uniform",
            Family::LaplaceUnit => "laplace",
        }
    }
}

/// A unit-variance family shifted by a per-class mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConditional {
    pub family: Family,
    pub means: Vec<f64>,
}

impl ClassConditional {
    pub fn new(family: Family, means: Vec<f64>) -> Self {
        Self { family, means }
    }

    /// Zero mean for every one of `k` classes.
    pub fn centered(family: Family, k: usize) -> Self {
        Self { family, means: vec![0.0; k] }
    }

    pub fn draw<R: Rng + ?Sized>(&self, label: usize, rng: &mut R) -> f64 {
        self.means[label] + self.family.draw(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSample {
    pub z: Vec<f64>,
    pub z_i: Vec<f64>,
    pub z_s: Vec<f64>,
    pub labels: Vec<usize>,
    pub a: f64,
    pub b: f64,
}

pub(crate) fn check_unit_circle(a: f64, b: f64) -> Result<()> {
    if !((a * a + b * b - 1.0).abs() <= 1e-12) {
        return Err(Error::NotUnitCircle { a, b });
    }
    Ok(())
}

/// Draw `n` samples: label uniform over `k_classes`, `z_i` and `z_s` independent given
/// the label, `z = a·z_i + b·z_s`.
pub fn gen_linear_mixture(
    n: usize,
    k_classes: usize,
    dist_i: &ClassConditional,
    dist_s: &ClassConditional,
    a: f64,
    b: f64,
    seed: u64,
) -> Result<MixtureSample> {
    check_unit_circle(a, b)?;
    if k_classes == 0 || n == 0 {
        return Err(Error::InvalidArgument("need n ≥ 1 and at least one class".into()));
    }
    for d in [dist_i, dist_s] {
        if d.means.len() != k_classes {
            return Err(Error::InvalidArgument(format!(
                "class-conditional has {} means for {k_classes} classes",
                d.means.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "linear_mixture"));
    let mut out = MixtureSample {
        z: Vec::with_capacity(n),
        z_i: Vec::with_capacity(n),
        z_s: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
        a,
        b,
    };
    for _ in 0..n {
        let y = rng.random_range(0..k_classes);
        let zi = dist_i.draw(y, &mut rng);
        let zs = dist_s.draw(y, &mut rng);
        out.z.push(a * zi + b * zs);
        out.z_i.push(zi);
        out.z_s.push(zs);
        out.labels.push(y);
    }
    Ok(out)
}
