//! Numerical checks of the mixture-entropy results: the unit-variance identity,
//! the entropy-power mixing bound, the conditional-entropy lower bound for
//! `a·Z_i + b·Z_s` and its equality case, and a penalty-strength (β) sweep.
//!
//! Everything here lives in the unit-conditional-variance regime: `Z_i|Y` and
//! `Z_s|Y` have variance one and `a² + b² = 1`. Two Gaussians can never satisfy
//! the strict ordering `H(Z_i|Y) < H(Z_s|Y)` at equal variance because the Gaussian
//! is entropy-maximal, so the default pair is uniform (invariant) vs Gaussian (spurious).

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{conditional_knn_entropy, conditional_knn_entropy_nd, gaussian_entropy, knn_entropy, EntropyEstimate, Method};
use crate::env::{gen_linear_mixture, mixture::check_unit_circle, ClassConditional, Family};
use crate::harness::{model_select, train_full, RunConfig, Selection};
use crate::seeds::derive_seed;
use crate::{Error, Result};

/// Stochastic assertions allow this many standard errors.
pub const SIGMAS: f64 = 3.0;
/// Class means used for sweeps; conditional entropies do not depend on them.
const CLASS_MEANS: [f64; 2] = [-1.0, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a: f64,
    pub b: f64,
    /// Conditional kNN estimate of `H(a·Z_i + b·Z_s | Y)`.
    pub h_mix: EntropyEstimate,
    /// `H_i + b²·(H_s − H_i)` from closed forms.
    pub bound: f64,
    pub n: usize,
    pub seed: u64,
}

fn conditionals(dist_i: Family, dist_s: Family) -> (ClassConditional, ClassConditional) {
    (ClassConditional::new(dist_i, CLASS_MEANS.to_vec()), ClassConditional::new(dist_s, CLASS_MEANS.to_vec()))
}

/// One row at `(a, b)` on fresh samples.
pub fn mixture_row(dist_i: Family, dist_s: Family, a: f64, b: f64, n: usize, k: usize, seed: u64) -> Result<SweepRow> {
    check_unit_circle(a, b)?;
    let (ci, cs) = conditionals(dist_i, dist_s);
    let sample = gen_linear_mixture(n, 2, &ci, &cs, a, b, seed)?;
    let h_mix = conditional_knn_entropy(&sample.z, &sample.labels, k)?;
    let (h_i, h_s) = (dist_i.entropy(), dist_s.entropy());
    Ok(SweepRow { a, b, h_mix, bound: h_i + b * b * (h_s - h_i), n, seed })
}

/// Angles `φ_j = j/(points−1)·π/2`, endpoints exact.
pub fn quarter_circle(points: usize) -> Vec<(f64, f64)> {
    (0..points)
        .map(|j| {
            if j == 0 {
                (1.0, 0.0)
            } else if j + 1 == points {
                (0.0, 1.0)
            } else {
                let phi = j as f64 / (points - 1) as f64 * std::f64::consts::FRAC_PI_2;
                (phi.cos(), phi.sin())
            }
        })
        .collect()
}

/// `grid_points` rows along the quarter circle, each on its own samples.
pub fn sweep_mixture_entropy(
    dist_i: Family,
    dist_s: Family,
    grid_points: usize,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let (h_i, h_s) = (dist_i.entropy(), dist_s.entropy());
    if h_i >= h_s {
        return Err(Error::OrderingViolation { h_i, h_s });
    }
    if grid_points < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 grid points, got {grid_points}")));
    }
    quarter_circle(grid_points)
        .into_par_iter()
        .enumerate()
        .map(|(j, (a, b))| mixture_row(dist_i, dist_s, a, b, n, k, derive_seed(seed, &format!("row{j}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub row: usize,
    pub b: f64,
    pub h_mix: f64,
    pub stderr: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub pass: bool,
    pub violations: Vec<Violation>,
    /// Row with the smallest `h_mix`.
    pub argmin: usize,
    /// `H(Z_i|Y)` recovered from the `bound` column.
    pub h_i: f64,
}

/// Intercept of the least-squares line `bound = H_i + slope·b²`.
fn invariant_entropy(rows: &[SweepRow]) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| r.b * r.b).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = rows.iter().map(|r| r.bound).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx < 1e-24 {
        // No spread in b: the bound itself is the tightest statement available.
        return my;
    }
    let sxy: f64 = xs.iter().zip(rows).map(|(x, r)| (x - mx) * (r.bound - my)).sum();
    my - sxy / sxx * mx
}

/// Check the lower bounds at every row and that the minimum sits at the smallest `b`.
pub fn verify_lemma1(rows: &[SweepRow]) -> LemmaReport {
    if rows.is_empty() {
        return LemmaReport { pass: false, violations: Vec::new(), argmin: 0, h_i: f64::NAN };
    }
    let h_i = invariant_entropy(rows);
    let mut violations = Vec::new();
    for (j, r) in rows.iter().enumerate() {
        let slack = SIGMAS * r.h_mix.stderr;
        let mut fail = |reason: String| {
            violations.push(Violation { row: j, b: r.b, h_mix: r.h_mix.nats, stderr: r.h_mix.stderr, reason })
        };
        if r.h_mix.nats < r.bound - slack {
            fail(format!("below mixing bound {:.6}", r.bound));
        }
        if r.h_mix.nats < h_i - slack {
            fail(format!("below H(Z_i|Y) = {h_i:.6}"));
        }
    }
    let argmin = (0..rows.len()).min_by(|&x, &y| rows[x].h_mix.nats.total_cmp(&rows[y].h_mix.nats)).unwrap_or(0);
    let b_min = rows.iter().map(|r| r.b).fold(f64::INFINITY, f64::min);
    if rows[argmin].b != b_min || b_min != 0.0 {
        let r = &rows[argmin];
        violations.push(Violation {
            row: argmin,
            b: r.b,
            h_mix: r.h_mix.nats,
            stderr: r.h_mix.stderr,
            reason: format!("minimum not at the b = 0 endpoint (smallest b in sweep: {b_min})"),
        });
    }
    LemmaReport { pass: violations.is_empty(), violations, argmin, h_i }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub a: f64,
    pub b: f64,
    pub label: usize,
    pub variance: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub pass: bool,
    /// Allowed deviation `5/√n`.
    pub tolerance: f64,
    pub rows: Vec<VarianceRow>,
}

/// Per-class sample variance of `a·Z_i + b·Z_s` must be within `1 ± 5/√n`.
pub fn verify_variance_identity(
    dist_i: Family,
    dist_s: Family,
    pairs: &[(f64, f64)],
    n: usize,
    seed: u64,
) -> Result<VarianceReport> {
    for &(a, b) in pairs {
        check_unit_circle(a, b)?;
    }
    let tolerance = 5.0 / (n as f64).sqrt();
    let (ci, cs) = conditionals(dist_i, dist_s);
    let mut rows = Vec::new();
    for (j, &(a, b)) in pairs.iter().enumerate() {
        let s = gen_linear_mixture(n, 2, &ci, &cs, a, b, derive_seed(seed, &format!("pair{j}")))?;
        for label in 0..2 {
            let zs: Vec<f64> = s.z.iter().zip(&s.labels).filter(|(_, &y)| y == label).map(|(z, _)| *z).collect();
            let m = zs.iter().sum::<f64>() / zs.len() as f64;
            let variance = zs.iter().map(|z| (z - m).powi(2)).sum::<f64>() / (zs.len() - 1) as f64;
            rows.push(VarianceRow { a, b, label, variance, ok: (variance - 1.0).abs() <= tolerance });
        }
    }
    Ok(VarianceReport { pass: rows.iter().all(|r| r.ok), tolerance, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub x: Family,
    pub y: Family,
    pub a: f64,
    pub b: f64,
    pub h_mix: EntropyEstimate,
    /// `a²·Ĥ(X) + b²·Ĥ(Y)` from the kNN estimates of the components.
    pub rhs: f64,
    /// Quadrature combination of all three standard errors.
    pub stderr: f64,
    pub ok: bool,
}

/// Entropy-power style bound `Ĥ(aX + bY) ≥ a²Ĥ(X) + b²Ĥ(Y)` for independent unit-variance
/// `X`, `Y` over every unordered family pair and the given unit-circle points.
pub fn check_mixing_bound(families: &[Family], points: &[(f64, f64)], n: usize, k: usize, seed: u64) -> Result<Vec<MixingRow>> {
    for &(a, b) in points {
        check_unit_circle(a, b)?;
    }
    let mut jobs = Vec::new();
    for (ix, &x) in families.iter().enumerate() {
        for &y in &families[ix..] {
            for &(a, b) in points {
                jobs.push((x, y, a, b));
            }
        }
    }
    jobs.into_par_iter()
        .enumerate()
        .map(|(j, (x, y, a, b))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("mix{j}")));
            let xs: Vec<f64> = (0..n).map(|_| x.draw(&mut rng)).collect();
            let ys: Vec<f64> = (0..n).map(|_| y.draw(&mut rng)).collect();
            let mix: Vec<f64> = xs.iter().zip(&ys).map(|(p, q)| a * p + b * q).collect();
            let (hx, hy, hm) = (knn_entropy(&xs, k)?, knn_entropy(&ys, k)?, knn_entropy(&mix, k)?);
            let rhs = a * a * hx.nats + b * b * hy.nats;
            let stderr = (hm.stderr.powi(2) + (a * a * hx.stderr).powi(2) + (b * b * hy.stderr).powi(2)).sqrt();
            Ok(MixingRow { x, y, a, b, h_mix: hm, rhs, stderr, ok: hm.nats >= rhs - SIGMAS * stderr })
        })
        .collect()
}

const SWEEP_HEADER: [&str; 8] = ["a", "b", "h_mix", "stderr", "bound", "n", "k", "seed"];

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let err = |e: csv::Error| Error::Parse { path: path.to_path_buf(), msg: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(SWEEP_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.a.to_string(),
            r.b.to_string(),
            r.h_mix.nats.to_string(),
            r.h_mix.stderr.to_string(),
            r.bound.to_string(),
            r.n.to_string(),
            r.h_mix.k_neighbors.to_string(),
            r.seed.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingData { path: path.to_path_buf() });
    }
    let bad = |msg: String| Error::Parse { path: path.to_path_buf(), msg };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != SWEEP_HEADER {
        return Err(bad(format!("expected header {}", SWEEP_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(format!("row {}: bad number {:?}", line + 1, &rec[i])));
        let u = |i: usize| rec[i].parse::<u64>().map_err(|_| bad(format!("row {}: bad integer {:?}", line + 1, &rec[i])));
        let n = u(5)? as usize;
        rows.push(SweepRow {
            a: f(0)?,
            b: f(1)?,
            h_mix: EntropyEstimate { nats: f(2)?, method: Method::Knn, n, k_neighbors: u(6)? as usize, stderr: f(3)? },
            bound: f(4)?,
            n,
            seed: u(7)?,
        });
    }
    Ok(rows)
}

/// Human-readable verdict for a sweep.
pub fn verdict_text(rows: &[SweepRow], report: &LemmaReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", if report.pass { "PASS" } else { "FAIL" });
    let _ = writeln!(s, "rows: {}", rows.len());
    let _ = writeln!(s, "h_i: {:.6}", report.h_i);
    if let Some(r) = rows.get(report.argmin) {
        let _ = writeln!(s, "argmin: row {} (a = {:.6}, b = {:.6}, h_mix = {:.6})", report.argmin, r.a, r.b, r.h_mix.nats);
    }
    let _ = writeln!(s, "violations: {}", report.violations.len());
    for v in &report.violations {
        let _ = writeln!(s, "  row {} b = {:.6} h_mix = {:.6} ± {:.6}: {}", v.row, v.b, v.h_mix, v.stderr, v.reason);
    }
    let _ = writeln!(s, "tolerance: {SIGMAS} standard errors");
    let _ = writeln!(s, "scope: unit conditional variances, a² + b² = 1, a, b ≥ 0");
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub beta: f64,
    /// Conditional kNN entropy of the learned representation given `Y`, on training data.
    pub ce_estimate: EntropyEstimate,
    pub test_accuracy: f64,
    /// Every representation dimension's variance is at the numerical floor.
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSweep {
    pub rows: Vec<BetaRow>,
    /// Index into `rows` of the β > 0 run chosen by test-domain selection.
    pub selected: Option<usize>,
}

/// Per-dimension variance at or below which a representation counts as collapsed.
pub const COLLAPSE_VARIANCE: f64 = 1e-6;
const KNN_K: usize = 5;

/// Train one model per β (everything else from `base`) and measure `H(Z̃|Y)`.
///
/// `Z̃ = Z + σ·η` with σ the configured `noise_std` (0.1 if zero): the learned `Z` of a
/// discrete-input task is itself discrete, so its differential entropy only exists
/// after the same smoothing the head sees during training.
pub fn sweep_beta(base: &RunConfig, betas: &[f64], seed: u64) -> Result<BetaSweep> {
    if betas.len() < 3 || betas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("betas must be strictly ascending with at least 3 values".into()));
    }
    let sigma = if base.objective.noise_std > 0.0 { base.objective.noise_std } else { 0.1 };
    let runs = betas
        .par_iter()
        .map(|&beta| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.objective.beta = beta;
            cfg.objective.seed = crate::seeds::grid_seed(seed, cfg.objective.alpha, beta);
            let out = train_full(&cfg)?;
            let inputs = ndarray::concatenate(
                ndarray::Axis(0),
                &out.data.train.iter().map(|e| e.inputs.view()).collect::<Vec<_>>(),
            )
            .expect("equal widths");
            let labels: Vec<usize> = out.data.train.iter().flat_map(|e| e.labels.iter().copied()).collect();
            let z = out.model.predict_features(&inputs)?;
            let variances = column_variances(&z);
            let collapsed = variances.iter().all(|&v| v <= COLLAPSE_VARIANCE);
            let ce_estimate = smoothed_cond_entropy(&z, &variances, &labels, sigma, derive_seed(seed, "beta_probe"))?;
            Ok((BetaRow { beta, ce_estimate, test_accuracy: out.report.final_test_accuracy, collapsed }, out.report))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, reports): (Vec<BetaRow>, Vec<_>) = runs.into_iter().unzip();
    let positive: Vec<_> = reports.iter().filter(|r| r.config.objective.beta > 0.0).cloned().collect();
    let selected = if positive.is_empty() {
        None
    } else {
        let best = model_select(&positive, Selection::TestDomain)?;
        rows.iter().position(|r| r.beta == best.config.objective.beta)
    };
    Ok(BetaSweep { rows, selected })
}

/// `H(Z + σ·η | Y)`. A constant column of `Z` contributes exactly the Gaussian entropy
/// of its noise, independent of everything else, so only the varying columns go through
/// the kNN estimator.
fn smoothed_cond_entropy(
    z: &ndarray::Array2<f64>,
    variances: &[f64],
    labels: &[usize],
    sigma: f64,
    seed: u64,
) -> Result<EntropyEstimate> {
    // Below this the column's own spread shifts its entropy by < 1e-12 nats.
    let constant = |v: f64| v <= 1e-12 * sigma * sigma;
    let active: Vec<usize> = (0..z.ncols()).filter(|&d| !constant(variances[d])).collect();
    let fixed = (z.ncols() - active.len()) as f64 * gaussian_entropy(sigma * sigma)?.nats;
    if active.is_empty() {
        return Ok(EntropyEstimate { n: z.nrows(), ..EntropyEstimate::closed_form(fixed) });
    }
    let varying = z.select(ndarray::Axis(1), &active);
    let noisy = &varying + &crate::entropy::noise_matrix(varying.nrows(), varying.ncols(), sigma, seed);
    let est = conditional_knn_entropy_nd(noisy.view(), labels, KNN_K)?;
    Ok(EntropyEstimate { nats: est.nats + fixed, ..est })
}

fn column_variances(z: &ndarray::Array2<f64>) -> Vec<f64> {
    if z.nrows() < 2 {
        return vec![0.0; z.ncols()];
    }
    z.var_axis(ndarray::Axis(0), 1.0).to_vec()
}
