//! Differentiable upper-bound surrogates for `H(Z)`, `H(Y|Z)` and `H(Z|Y)`.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::label_entropy;
use crate::grad::{Graph, Mlp, Tensor, Var};
use crate::seeds::derive_seed;
use crate::{Error, Result};

/// Added to every per-dimension variance before the log.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// `Σ_d ½ ln(2πe·(var_d + ε))` over the unbiased per-column variances of `z` (n × d).
///
/// The Gaussian with matching variances maximizes entropy, so this bounds `H(Z)` from above.
pub fn batch_entropy_proxy(g: &mut Graph, z: Var) -> Result<Var> {
    let d = g.value(z).ncols() as f64;
    let var = g.column_variance(z)?;
    let floored = g.offset(var, VARIANCE_FLOOR);
    let logs = g.ln(floored);
    let total = g.sum(logs);
    let half = g.scale(total, 0.5);
    Ok(g.offset(half, 0.5 * d * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()))
}

/// `std · η` with `η` standard normal, reproducible from `seed`.
pub fn noise_matrix(rows: usize, cols: usize, std: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "representation_noise"));
    Array2::from_shape_simple_fn((rows, cols), || {
        let e: f64 = StandardNormal.sample(&mut rng);
        std * e
    })
}

/// Mean cross-entropy of `head(z + noise_std·η)`: an upper bound on `H(Y|Z)` in expectation.
///
/// `head_params` are the head's parameters bound into `g`.
pub fn variational_cond_entropy(
    g: &mut Graph,
    z: Var,
    labels: &[usize],
    head: &Mlp,
    head_params: &[Var],
    noise_std: f64,
    seed: u64,
) -> Result<Var> {
    if !(noise_std >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise_std must be ≥ 0, got {noise_std}")));
    }
    let (n, d) = g.value(z).dim();
    if d != head.in_width() {
        return Err(Error::ShapeMismatch { op: "variational head", left: (n, d), right: (n, head.in_width()) });
    }
    let input = if noise_std > 0.0 {
        let eta = g.constant(noise_matrix(n, d, noise_std, seed));
        g.add(z, eta)?
    } else {
        z
    };
    let logits = head.forward_bound(g, head_params, input)?;
    g.cross_entropy(logits, labels)
}

/// `proxy(Z) + (variational_cond_entropy(Z) − Ĥ(Y))`, using `H(Z|Y) = H(Z) − H(Y) + H(Y|Z)`.
pub fn ce_surrogate(
    g: &mut Graph,
    z: Var,
    labels: &[usize],
    head: &Mlp,
    head_params: &[Var],
    noise_std: f64,
    seed: u64,
) -> Result<Var> {
    let hz = batch_entropy_proxy(g, z)?;
    let vce = variational_cond_entropy(g, z, labels, head, head_params, noise_std, seed)?;
    let hy = label_entropy(labels, head.out_width());
    let neg_mi = g.offset(vce, -hy);
    g.add(hz, neg_mi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::{Activation, Linear, Model};
    use ndarray::array;

    #[test]
    fn unit_variance_proxy() {
        let mut g = Graph::new();
        // Columns with unbiased variance exactly 1.
        let z = g.constant(array![[1.0, -1.0], [-1.0, 1.0], [0.0, 0.0]]);
        let h = batch_entropy_proxy(&mut g, z).unwrap();
        assert!((g.scalar(h) - 2.0 * 1.4189385332).abs() < 1e-6);
    }

    #[test]
    fn constant_batch_hits_floor() {
        let mut g = Graph::new();
        let z = g.constant(Array2::from_elem((5, 3), 2.5));
        let h = batch_entropy_proxy(&mut g, z).unwrap();
        let floor = 3.0 * 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * VARIANCE_FLOOR).ln();
        assert!((g.scalar(h) - floor).abs() < 1e-12);
    }

    fn prior_head(d: usize) -> Mlp {
        Mlp::from_layers(
            vec![Linear { weight: Tensor::zeros((d, 2)), bias: Tensor::zeros((1, 2)) }],
            Activation::Identity,
            false,
        )
        .unwrap()
    }

    #[test]
    fn constant_z_with_prior_head_is_floor() {
        let head = prior_head(2);
        let mut g = Graph::new();
        let hp = head.bind(&mut g);
        let z = g.constant(Array2::from_elem((4, 2), 1.0));
        let s = ce_surrogate(&mut g, z, &[0, 1, 0, 1], &head, &hp, 0.0, 0).unwrap();
        let floor = 2.0 * 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * VARIANCE_FLOOR).ln();
        assert!((g.scalar(s) - floor).abs() < 1e-12);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let head = Mlp::from_layers(
            vec![Linear { weight: array![[1.0, -1.0]], bias: Tensor::zeros((1, 2)) }],
            Activation::Identity,
            false,
        )
        .unwrap();
        let eval = |seed| {
            let mut g = Graph::new();
            let hp = head.bind(&mut g);
            let z = g.constant(array![[0.3], [-0.2], [1.0]]);
            let v = variational_cond_entropy(&mut g, z, &[0, 1, 0], &head, &hp, 0.5, seed).unwrap();
            g.scalar(v)
        };
        assert_eq!(eval(1).to_bits(), eval(1).to_bits());
        assert_ne!(eval(1), eval(2));
    }

    #[test]
    fn head_width_mismatch() {
        let head = prior_head(3);
        let mut g = Graph::new();
        let hp = head.bind(&mut g);
        let z = g.constant(Tensor::zeros((4, 2)));
        assert!(matches!(
            variational_cond_entropy(&mut g, z, &[0, 1, 0, 1], &head, &hp, 0.1, 0),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
