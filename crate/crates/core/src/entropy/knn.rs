//! Kozachenko–Leonenko nearest-neighbor differential entropy.
//!
//! `Ĥ = ψ(n) − ψ(k) + ln V_d + (d/n) Σ ln r_i`, with `r_i` the Euclidean distance
//! from point `i` to its k-th nearest neighbor and `V_d` the unit-ball volume.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use super::{jackknife_stderr, EntropyEstimate, Method};
use crate::{Error, Result};

/// Number of delete-a-group jackknife replicates; point `i` belongs to group `i mod G`.
pub const JACKKNIFE_GROUPS: usize = 20;
const JITTER: f64 = 1e-12;
/// Extra neighbors kept per point so that most jackknife replicates never rescan.
const SPARE: usize = 8;

/// 1-d estimate with jackknife stderr.
pub fn knn_entropy(samples: &[f64], k: usize) -> Result<EntropyEstimate> {
    let points = Array2::from_shape_vec((samples.len(), 1), samples.to_vec()).expect("n × 1");
    knn_entropy_nd(points.view(), k)
}

/// Estimate for `n × d` points (rows are samples).
pub fn knn_entropy_nd(points: ArrayView2<f64>, k: usize) -> Result<EntropyEstimate> {
    let (n, d) = points.dim();
    if k == 0 || n <= k {
        return Err(Error::InvalidArgument(format!("need n > k ≥ 1, got n = {n}, k = {k}")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("points need at least one dimension".into()));
    }
    let first = points.row(0);
    if points.rows().into_iter().all(|r| r == first) {
        return Err(Error::Degenerate(format!("all {n} samples are identical")));
    }

    let mut pts = points.to_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b6e_6e6a);
    pts.mapv_inplace(|v| v + rng.random_range(0.0..JITTER));

    let keep = (k + SPARE).min(n - 1);
    let lists = if d == 1 { neighbors_sorted(&pts, keep) } else { neighbors_brute(&pts, keep) };

    let full: Vec<f64> = lists.iter().map(|l| l[k - 1].0).collect();
    if let Some(i) = full.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::Degenerate(format!("point {i} has fewer than {k} distinct neighbors")));
    }
    let nats = kl_formula(n, d, k, full.iter().map(|r| r.ln()).sum());

    let stderr = if n / JACKKNIFE_GROUPS > k {
        let reps: Vec<f64> = (0..JACKKNIFE_GROUPS)
            .into_par_iter()
            .map(|g| {
                let mut sum = 0.0;
                let mut m = 0;
                for i in (0..n).filter(|i| i % JACKKNIFE_GROUPS != g) {
                    let r = lists[i]
                        .iter()
                        .filter(|(_, j)| j % JACKKNIFE_GROUPS != g)
                        .nth(k - 1)
                        .map(|&(r, _)| r)
                        .unwrap_or_else(|| rescan(&pts, i, k, g));
                    sum += r.max(f64::MIN_POSITIVE).ln();
                    m += 1;
                }
                kl_formula(m, d, k, sum)
            })
            .collect();
        jackknife_stderr(&reps)
    } else {
        0.0
    };
    Ok(EntropyEstimate { nats, method: Method::Knn, n, k_neighbors: k, stderr })
}

fn kl_formula(n: usize, d: usize, k: usize, sum_ln_r: f64) -> f64 {
    let df = d as f64;
    let ln_vd = 0.5 * df * std::f64::consts::PI.ln() - ln_gamma(0.5 * df + 1.0);
    digamma(n as f64) - digamma(k as f64) + ln_vd + df * sum_ln_r / n as f64
}

type Neighbors = Vec<(f64, usize)>;

/// In 1-d the `m` nearest neighbors of a point are among the `m` on either side in sorted order.
fn neighbors_sorted(pts: &Array2<f64>, m: usize) -> Vec<Neighbors> {
    let n = pts.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pts[[a, 0]].total_cmp(&pts[[b, 0]]));
    let mut lists = vec![Vec::new(); n];
    for (pos, &i) in order.iter().enumerate() {
        let x = pts[[i, 0]];
        let (mut lo, mut hi) = (pos, pos + 1);
        let mut list = Vec::with_capacity(m);
        while list.len() < m {
            let left = (lo > 0).then(|| x - pts[[order[lo - 1], 0]]);
            let right = (hi < n).then(|| pts[[order[hi], 0]] - x);
            match (left, right) {
                (Some(l), Some(r)) if l <= r => {
                    lo -= 1;
                    list.push((l, order[lo]));
                }
                (Some(l), None) => {
                    lo -= 1;
                    list.push((l, order[lo]));
                }
                (_, Some(r)) => {
                    list.push((r, order[hi]));
                    hi += 1;
                }
                (None, None) => break,
            }
        }
        lists[i] = list;
    }
    lists
}

fn neighbors_brute(pts: &Array2<f64>, m: usize) -> Vec<Neighbors> {
    let n = pts.nrows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = pts.row(i);
            let mut best: Neighbors = Vec::with_capacity(m + 1);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d2: f64 = xi.iter().zip(pts.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                if best.len() < m || d2 < best[m - 1].0 {
                    let at = best.partition_point(|&(v, _)| v <= d2);
                    best.insert(at, (d2, j));
                    best.truncate(m);
                }
            }
            best.into_iter().map(|(d2, j)| (d2.sqrt(), j)).collect()
        })
        .collect()
}

/// k-th neighbor distance of `i` among points outside group `g`, by full scan.
fn rescan(pts: &Array2<f64>, i: usize, k: usize, g: usize) -> f64 {
    let xi = pts.row(i);
    let mut d: Vec<f64> = (0..pts.nrows())
        .filter(|&j| j != i && j % JACKKNIFE_GROUPS != g)
        .map(|j| xi.iter().zip(pts.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect();
    let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
    *kth
}

fn split_by_label(labels: &[usize], k: usize) -> Result<Vec<(usize, Vec<usize>)>> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        groups[y].push(i);
    }
    let groups: Vec<(usize, Vec<usize>)> = groups.into_iter().enumerate().filter(|(_, g)| !g.is_empty()).collect();
    for (label, g) in &groups {
        if g.len() <= k {
            return Err(Error::ClassTooSmall { label: *label, count: g.len(), k });
        }
    }
    Ok(groups)
}

fn combine(parts: Vec<(f64, EntropyEstimate)>, n: usize, k: usize) -> EntropyEstimate {
    let nats = parts.iter().map(|(p, e)| p * e.nats).sum();
    let stderr = parts.iter().map(|(p, e)| (p * e.stderr).powi(2)).sum::<f64>().sqrt();
    EntropyEstimate { nats, method: Method::Knn, n, k_neighbors: k, stderr }
}

/// `Σ_y p̂(y)·Ĥ(Z | Y = y)` for 1-d samples; per-class stderrs add in quadrature.
pub fn conditional_knn_entropy(samples: &[f64], labels: &[usize], k: usize) -> Result<EntropyEstimate> {
    if samples.len() != labels.len() {
        return Err(Error::InvalidArgument("samples and labels differ in length".into()));
    }
    let n = samples.len();
    let parts = split_by_label(labels, k)?
        .into_iter()
        .map(|(_, idx)| {
            let xs: Vec<f64> = idx.iter().map(|&i| samples[i]).collect();
            Ok((idx.len() as f64 / n as f64, knn_entropy(&xs, k)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(combine(parts, n, k))
}

/// Multivariate version of [`conditional_knn_entropy`].
pub fn conditional_knn_entropy_nd(points: ArrayView2<f64>, labels: &[usize], k: usize) -> Result<EntropyEstimate> {
    if points.nrows() != labels.len() {
        return Err(Error::InvalidArgument("points and labels differ in length".into()));
    }
    let n = labels.len();
    let parts = split_by_label(labels, k)?
        .into_iter()
        .map(|(_, idx)| {
            let sub = points.select(ndarray::Axis(0), &idx);
            Ok((idx.len() as f64 / n as f64, knn_entropy_nd(sub.view(), k)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(combine(parts, n, k))
}
