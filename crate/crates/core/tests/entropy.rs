mod common;

use ceirm::entropy::{
    batch_entropy_proxy, ce_surrogate, conditional_knn_entropy, gaussian_entropy, histogram_cond_label_entropy,
    knn_entropy, label_entropy, noise_matrix, uniform_entropy, variational_cond_entropy, Method,
};
use ceirm::env::{gen_linear_mixture, ClassConditional, Family};
use ceirm::grad::{Activation, Linear, Mlp, Model};
use ceirm::{Error, Graph, Tensor};
use ndarray::{array, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use common::*;

const H_GAUSS: f64 = 1.418_938_533_204_672_7;
const H_UNIFORM: f64 = 1.242_453_324_894_000_2;

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

#[test]
fn closed_forms() {
    approx::assert_abs_diff_eq!(gaussian_entropy(1.0).unwrap().nats, 1.418939, epsilon = 1e-6);
    approx::assert_abs_diff_eq!(gaussian_entropy(4.0).unwrap().nats, 2.112086, epsilon = 1e-6);
    let e = std::f64::consts::E;
    approx::assert_abs_diff_eq!(gaussian_entropy(1.0 / (2.0 * std::f64::consts::PI * e)).unwrap().nats, 0.0, epsilon = 1e-12);
    approx::assert_abs_diff_eq!(uniform_entropy(2.0 * 3f64.sqrt()).unwrap().nats, 1.242453, epsilon = 1e-6);
    approx::assert_abs_diff_eq!(uniform_entropy(1.0).unwrap().nats, 0.0);
    approx::assert_abs_diff_eq!(uniform_entropy(e).unwrap().nats, 1.0, epsilon = 1e-15);
    let g = gaussian_entropy(2.0).unwrap();
    assert_eq!((g.method, g.stderr), (Method::ClosedForm, 0.0));
    assert!(gaussian_entropy(0.0).is_err() && uniform_entropy(-1.0).is_err());
}

#[test]
fn convolution_oracle_agrees_with_the_error_function_form() {
    // p(x) = [Φ((x + w)/b) − Φ((x − w)/b)] / 2w for a·U + b·G.
    use statrs::distribution::{ContinuousCDF, Normal};
    let (a, b) = (0.6, 0.8);
    let w = a * 3f64.sqrt();
    let phi = Normal::new(0.0, 1.0).unwrap();
    let reach = w + 10.0 * b;
    let m = 20_001;
    let dx = 2.0 * reach / (m - 1) as f64;
    let mut h = 0.0;
    for i in 0..m {
        let x = -reach + i as f64 * dx;
        let p = (phi.cdf((x + w) / b) - phi.cdf((x - w) / b)) / (2.0 * w);
        if p > 0.0 {
            h -= if i == 0 || i == m - 1 { 0.5 } else { 1.0 } * p * p.ln() * dx;
        }
    }
    assert!((convolution_entropy(a, b) - h).abs() < 1e-5);
}

#[test]
fn knn_matches_convolution_quadrature() {
    let n = 10_000;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut r = rng(21);
    let z: Vec<f64> = (0..n)
        .map(|_| h * Family::UniformUnit.draw(&mut r) + h * Family::GaussianUnit.draw(&mut r))
        .collect();
    let est = knn_entropy(&z, 5).unwrap();
    let oracle = convolution_entropy(h, h);
    assert!((est.nats - oracle).abs() <= 0.05, "{} vs {oracle}", est.nats);
    assert!(oracle > H_UNIFORM && oracle < H_GAUSS);
}

#[test]
fn knn_error_shrinks_with_sample_size() {
    let mut better = 0;
    for seed in 0..5 {
        let err = |n: usize| (knn_entropy(&normals(n, 100 + seed), 5).unwrap().nats - H_GAUSS).abs();
        if err(10_000) < err(1_000) {
            better += 1;
        }
    }
    assert!(better >= 4, "{better} of 5");
}

#[test]
fn knn_scaling_law() {
    let x = normals(10_000, 31);
    let hx = knn_entropy(&x, 5).unwrap();
    for c in [3.0, 0.5, -2.0, 10.0] {
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let hc = knn_entropy(&cx, 5).unwrap();
        let tol = 3.0 * hx.stderr.max(hc.stderr);
        assert!((hc.nats - hx.nats - f64::ln(f64::abs(c))).abs() <= tol, "c = {c}");
    }
}

#[test]
fn knn_error_cases() {
    assert!(matches!(knn_entropy(&[2.0; 50], 5), Err(Error::Degenerate(_))));
    assert!(knn_entropy(&[1.0, 2.0, 3.0], 5).is_err());
    let labels: Vec<usize> = (0..40).map(|i| usize::from(i >= 37)).collect();
    let z = normals(40, 1);
    assert!(matches!(conditional_knn_entropy(&z, &labels, 5), Err(Error::ClassTooSmall { label: 1, .. })));
}

#[test]
fn conditional_examples() {
    let n = 20_000;
    let mut z = normals(n, 41);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for (v, &y) in z.iter_mut().zip(&labels) {
        *v += if y == 1 { 7.0 } else { -3.0 };
    }
    let est = conditional_knn_entropy(&z, &labels, 5).unwrap();
    assert!((est.nats - H_GAUSS).abs() <= 0.05);

    let same = vec![0; n];
    let single = conditional_knn_entropy(&z, &same, 5).unwrap();
    let whole = knn_entropy(&z, 5).unwrap();
    assert_eq!(single.nats, whole.nats);

    let ci = ClassConditional::new(Family::UniformUnit, vec![-1.0, 1.0]);
    let cs = ClassConditional::new(Family::GaussianUnit, vec![-1.0, 1.0]);
    let s = gen_linear_mixture(n, 2, &ci, &cs, 0.6, 0.8, 42).unwrap();
    let mix = conditional_knn_entropy(&s.z, &s.labels, 5).unwrap();
    let bound = H_UNIFORM + 0.64 * (H_GAUSS - H_UNIFORM);
    assert!(mix.nats >= H_UNIFORM - 3.0 * mix.stderr);
    assert!(mix.nats >= bound - 3.0 * mix.stderr);
}

fn proxy_value(z: &Tensor) -> f64 {
    let mut g = Graph::new();
    let v = g.constant(z.clone());
    let p = batch_entropy_proxy(&mut g, v).unwrap();
    g.scalar(p)
}

#[test]
fn gaussian_proxy_bounds_product_entropies() {
    let n = 8_000;
    let mut r = rng(51);
    let families = [Family::UniformUnit, Family::LaplaceUnit, Family::GaussianUnit];
    for scale in [0.3, 1.0, 4.0] {
        let z = Array2::from_shape_fn((n, 3), |(_, d)| scale * families[d].draw(&mut r));
        let mut total = 0.0;
        let mut var = 0.0;
        for d in 0..3 {
            let e = knn_entropy(&z.column(d).to_vec(), 5).unwrap();
            total += e.nats;
            var += e.stderr * e.stderr;
        }
        assert!(proxy_value(&z) >= total - 3.0 * var.sqrt(), "scale {scale}");
    }
}

#[test]
fn proxy_gradient_on_random_batch() {
    let z0 = random_matrix(8, 3, 2.0, 61);
    let mut model = Mlp::from_layers(
        vec![Linear { weight: Array2::eye(3), bias: Tensor::zeros((1, 3)) }],
        Activation::Identity,
        false,
    )
    .unwrap();
    // Differentiate with respect to the batch itself: it enters as the bias of an identity layer.
    let r = ceirm::grad::check_gradient(&mut model, 1e-5, |m, g, p| {
        let x = g.constant(z0.clone());
        let z = m.forward_bound(g, p, x)?;
        batch_entropy_proxy(g, z)
    })
    .unwrap();
    assert!(r.max_rel_error <= 1e-5, "{r:?}");
}

/// `[[0, w]], [[0, c]]`: logit difference `w·z + c` for class 1.
fn logistic_head(w: f64, c: f64) -> Mlp {
    Mlp::from_layers(vec![Linear { weight: array![[0.0, w]], bias: array![[0.0, c]] }], Activation::Identity, false).unwrap()
}

/// Maximum-likelihood 1-d logistic regression by Newton's method.
fn fit_logistic(z: &[f64], y: &[usize]) -> (f64, f64) {
    let (mut w, mut c) = (0.0, 0.0);
    for _ in 0..50 {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 1e-9, 0.0, 1e-9);
        for (&x, &t) in z.iter().zip(y) {
            let p = 1.0 / (1.0 + (-(w * x + c)).exp());
            let e = p - t as f64;
            let s = p * (1.0 - p);
            g0 += e * x;
            g1 += e;
            h00 += s * x * x;
            h01 += s * x;
            h11 += s;
        }
        let det = h00 * h11 - h01 * h01;
        w -= (h11 * g0 - h01 * g1) / det;
        c -= (h00 * g1 - h01 * g0) / det;
    }
    (w, c)
}

fn surrogate_parts(z: &[f64], y: &[usize], head: &Mlp, noise: f64, seed: u64) -> (f64, f64, f64) {
    let mut g = Graph::new();
    let hp = head.bind(&mut g);
    let zv = g.constant(Array2::from_shape_vec((z.len(), 1), z.to_vec()).unwrap());
    let s = ce_surrogate(&mut g, zv, y, head, &hp, noise, seed).unwrap();
    let p = batch_entropy_proxy(&mut g, zv).unwrap();
    let v = variational_cond_entropy(&mut g, zv, y, head, &hp, noise, seed).unwrap();
    (g.scalar(s), g.scalar(p), g.scalar(v))
}

#[test]
fn surrogate_tracks_the_knn_oracle_as_b_shrinks() {
    // Class structure rides on Z_s (means ±2), so the surrogate's proxy and
    // cross-entropy both see b. Rows reuse one draw of (Z_i, Z_s, Y, η).
    let n = 20_000;
    let ci = ClassConditional::new(Family::UniformUnit, vec![0.0, 0.0]);
    let cs = ClassConditional::new(Family::GaussianUnit, vec![-2.0, 2.0]);
    let seed = 71;
    let eta = noise_matrix(n, 1, 0.1, seed);
    let (mut surrogate, mut oracle) = (Vec::new(), Vec::new());
    for j in 0..11 {
        let b = 0.06 * j as f64;
        let a = (1.0 - b * b).sqrt();
        let s = gen_linear_mixture(n, 2, &ci, &cs, a, b, 70).unwrap();
        let noisy: Vec<f64> = s.z.iter().zip(eta.iter()).map(|(z, e)| z + e).collect();
        let (w, c) = fit_logistic(&noisy, &s.labels);
        let head = logistic_head(w, c);
        surrogate.push(surrogate_parts(&s.z, &s.labels, &head, 0.1, seed).0);
        oracle.push(conditional_knn_entropy(&s.z, &s.labels, 5).unwrap().nats);
    }
    let rho = spearman(&surrogate, &oracle);
    assert!(rho >= 0.9, "Spearman {rho}: {surrogate:?} vs {oracle:?}");
    assert!(surrogate[0] < surrogate[10]);
}

#[test]
fn surrogate_decomposes_with_plug_in_label_entropy() {
    let z = normals(400, 81);
    let y: Vec<usize> = (0..400).map(|i| i % 2).collect();
    assert!((label_entropy(&y, 2) - std::f64::consts::LN_2).abs() < 1e-15);
    let head = logistic_head(0.7, -0.1);
    let (s, p, v) = surrogate_parts(&z, &y, &head, 0.1, 3);
    assert!((s - (p + v - std::f64::consts::LN_2)).abs() < 1e-12);
}

#[test]
fn perfect_head_without_noise_has_no_conditional_entropy() {
    let y = random_labels(200, 2, 5);
    let z: Vec<f64> = y.iter().map(|&t| 2.0 * t as f64 - 1.0).collect();
    let (_, _, v) = surrogate_parts(&z, &y, &logistic_head(50.0, 0.0), 0.0, 0);
    assert!(v < 1e-12, "{v}");
}

fn per_sample_ce(z: &[f64], y: &[usize], w: f64, c: f64, eta: &Tensor) -> Vec<f64> {
    z.iter()
        .zip(y)
        .zip(eta.iter())
        .map(|((&x, &t), e)| {
            let l = w * (x + e) + c;
            // −ln σ(±l)
            let s = if t == 1 { l } else { -l };
            (1.0 + (-s).exp()).ln()
        })
        .collect()
}

#[test]
fn independent_representation_costs_at_least_ln_two() {
    let n = 10_000;
    let z = normals(n, 91);
    let y = random_labels(n, 2, 92);
    let eta = noise_matrix(n, 1, 0.1, 4);
    let noisy: Vec<f64> = z.iter().zip(eta.iter()).map(|(a, b)| a + b).collect();
    let (w, c) = fit_logistic(&noisy, &y);
    let (_, _, v) = surrogate_parts(&z, &y, &logistic_head(w, c), 0.1, 4);
    let losses = per_sample_ce(&z, &y, w, c, &eta);
    let mean = losses.iter().sum::<f64>() / n as f64;
    assert!((mean - v).abs() < 1e-12);
    let sd = (losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!(v >= std::f64::consts::LN_2 - 3.0 * sd / (n as f64).sqrt(), "{v}");
}

#[test]
fn trained_variational_bound_exceeds_histogram_plug_in() {
    let n = 20_000;
    let ci = ClassConditional::new(Family::UniformUnit, vec![-1.0, 1.0]);
    let cs = ClassConditional::new(Family::GaussianUnit, vec![-0.5, 0.5]);
    for (seed, (a, b)) in [(1u64, (1.0, 0.0)), (2, (0.6, 0.8)), (3, (0.0, 1.0))] {
        let s = gen_linear_mixture(n, 2, &ci, &cs, a, b, seed).unwrap();
        let eta = noise_matrix(n, 1, 0.1, seed);
        let noisy: Vec<f64> = s.z.iter().zip(eta.iter()).map(|(z, e)| z + e).collect();
        let (w, c) = fit_logistic(&noisy, &s.labels);
        let (_, _, v) = surrogate_parts(&s.z, &s.labels, &logistic_head(w, c), 0.1, seed);
        let plug_in = histogram_cond_label_entropy(&s.z, &s.labels, 2, 30).unwrap();
        assert!(v >= plug_in.nats - 3.0 * plug_in.stderr, "({a}, {b}): {v} vs {}", plug_in.nats);
    }
}

#[test]
fn noise_draws_are_seeded() {
    let a = noise_matrix(5, 2, 0.3, 8);
    assert_eq!(a, noise_matrix(5, 2, 0.3, 8));
    assert_ne!(a, noise_matrix(5, 2, 0.3, 9));
    let mut r = rng(0);
    let _: f64 = r.random();
}
