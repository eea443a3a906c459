mod common;

use ceirm::grad::{Activation, Graph, Linear, Mlp, Model, Tensor};
use ceirm::harness::{
    emit_report, format_mean_sd, grid_point, grid_run, mean_sd, model_select, read_reports, render_csv, train, Dataset,
    Format, Optimizer, OptimizerKind, RunConfig, Selection, TrainReport, CSV_HEADER,
};
use ceirm::objectives::EntropyMode;
use ceirm::Error;
use ndarray::{array, Array2};

fn report(alpha: f64, beta: f64, test: f64, val: f64) -> TrainReport {
    let mut config = RunConfig::defaults(Dataset::TwoBit);
    config.objective.alpha = alpha;
    config.objective.beta = beta;
    TrainReport {
        method: config.objective.method().to_string(),
        per_epoch: Vec::new(),
        final_test_accuracy: test,
        val_accuracy: val,
        train_accuracy: 0.5,
        selected_epoch: 0,
        config,
        wall_seconds: None,
    }
}

#[test]
fn selection_examples() {
    let one = [report(1.0, 1.0, 0.7, 0.6)];
    assert_eq!(model_select(&one, Selection::TestDomain).unwrap(), one[0]);

    let rs = [report(1.0, 1.0, 0.6, 0.9), report(2.0, 1.0, 0.8, 0.5), report(3.0, 0.5, 0.8, 0.1)];
    assert_eq!(model_select(&rs, Selection::TrainDomain).unwrap(), rs[0]);
    // Tie on test accuracy: smaller β wins even though its α is larger.
    assert_eq!(model_select(&rs, Selection::TestDomain).unwrap(), rs[2]);

    let same_beta = [report(5.0, 1.0, 0.8, 0.0), report(2.0, 1.0, 0.8, 0.0)];
    assert_eq!(model_select(&same_beta, Selection::TestDomain).unwrap().alpha(), 2.0);
    let exact = [report(2.0, 1.0, 0.8, 0.0), report(2.0, 1.0, 0.8, 0.3)];
    assert_eq!(model_select(&exact, Selection::TestDomain).unwrap(), exact[0]);

    let mut mixed = rs.to_vec();
    mixed[1].config.selection = Selection::TrainDomain;
    assert!(matches!(model_select(&mixed, Selection::TestDomain), Err(Error::MixedSelectionModes)));
    assert!(model_select(&[], Selection::TestDomain).is_err());
}

#[test]
fn selection_is_consistent_with_its_metric() {
    let mut r = common::rng(3);
    use rand::Rng;
    for _ in 0..200 {
        let reports: Vec<TrainReport> = (0..8)
            .map(|i| report(i as f64, (i % 3) as f64, (r.random_range(0..10) as f64) / 10.0, r.random::<f64>()))
            .collect();
        for mode in [Selection::TestDomain, Selection::TrainDomain] {
            let best = model_select(&reports, mode).unwrap();
            let metric = |x: &TrainReport| match mode {
                Selection::TestDomain => x.final_test_accuracy,
                Selection::TrainDomain => x.val_accuracy,
            };
            assert!(reports.iter().all(|x| metric(x) <= metric(&best)));
        }
    }
}

fn small_two_bit(epochs: usize, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::defaults(Dataset::TwoBit);
    cfg.train_sizes = vec![400, 400];
    cfg.test_size = 400;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg
}

#[test]
fn grids_cover_every_point_and_repeat_exactly() {
    let base = small_two_bit(0, 5);
    let axis = [0.0, 0.1, 1.0, 10.0, 100.0, 1000.0];
    let grid = grid_run(&base, &axis, &axis).unwrap();
    assert_eq!(grid.reports.len(), 36);
    assert!(grid.failures.is_empty());
    for (i, r) in grid.reports.iter().enumerate() {
        assert_eq!((r.alpha(), r.beta()), (axis[i / 6], axis[i % 6]));
        assert_eq!(r.config.data_seed(), 5);
        assert!(r.per_epoch.is_empty());
    }

    let erm = grid_run(&small_two_bit(20, 5), &[0.0], &[0.0]).unwrap();
    assert_eq!(erm.reports[0].method, "ERM");
    let again = grid_run(&small_two_bit(20, 5), &[0.0], &[0.0]).unwrap();
    assert_eq!(erm, again);

    let p = grid_point(&base, 10.0, 0.1);
    assert_eq!(p.objective.seed, p.seed);
    assert_ne!(p.seed, grid_point(&base, 0.1, 10.0).seed);
    assert!(grid_run(&base, &[], &[1.0]).is_err());
}

#[test]
fn grid_records_failures_and_continues() {
    let mut base = small_two_bit(5, 1);
    base.optimizer = OptimizerKind::Sgd;
    base.lr = 1e200;
    base.penalty_anneal_epochs = 0;
    let grid = grid_run(&base, &[0.0, 1e6], &[0.0]).unwrap();
    assert_eq!(grid.reports.len() + grid.failures.len(), 2);
    assert!(!grid.failures.is_empty());
    assert!(grid.failures.iter().all(|f| f.error.contains("diverged")), "{:?}", grid.failures);
    assert!(matches!(train(&grid_point(&base, 1e6, 0.0)), Err(Error::Diverged { .. })));
}

#[test]
fn erm_follows_the_spurious_bit() {
    let mut accs = Vec::new();
    for seed in 0..3 {
        let mut cfg = RunConfig::defaults(Dataset::TwoBit);
        cfg.objective.entropy_mode = EntropyMode::None;
        cfg.epochs = 200;
        cfg.seed = seed;
        accs.push(train(&cfg).unwrap().final_test_accuracy);
    }
    let (m, _) = mean_sd(&accs);
    assert!((m - 0.10).abs() <= 0.05, "{accs:?}");
}

#[test]
fn zero_epochs_reports_the_initial_model() {
    let r = train(&small_two_bit(0, 2)).unwrap();
    assert!(r.per_epoch.is_empty());
    assert_eq!(r.selected_epoch, 0);
    assert!((0.0..=1.0).contains(&r.final_test_accuracy));
    assert_eq!(r.wall_seconds, None);
}

#[test]
fn report_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    emit_report(&[], &csv, Format::Csv).unwrap();
    assert_eq!(std::fs::read_to_string(&csv).unwrap().trim_end(), CSV_HEADER.join(","));

    let reports = vec![report(1.0, 0.1, 0.75, 0.7), report(10.0, 1.0, 0.5, 0.6)];
    let text = render_csv(&reports).unwrap();
    assert_eq!(text.lines().count(), 3);

    let json = dir.path().join("r.json");
    emit_report(&reports, &json, Format::Json).unwrap();
    assert_eq!(read_reports(&json).unwrap(), reports);

    assert_eq!(format_mean_sd(&[0.79, 0.80, 0.81]), "80.0 ± 1.0");
    assert_eq!(Format::parse("yaml"), None);
}

#[test]
fn config_text_round_trips() {
    let text = "dataset = two_bit\nalpha = 10 # weight\nhidden = 8, 4\ntrain_color_flips = 0.1,0.3\ntrain_sizes = 100,200\n";
    let cfg = RunConfig::parse(text).unwrap();
    assert_eq!((cfg.objective.alpha, cfg.hidden.clone()), (10.0, vec![8, 4]));
    assert_eq!(RunConfig::parse(&cfg.to_kv()).unwrap(), cfg);

    assert!(matches!(RunConfig::parse("alpha 3"), Err(Error::Config { line: 1, .. })));
    assert!(matches!(RunConfig::parse("\n\nbogus = 1"), Err(Error::Config { line: 3, .. })));
    assert!(RunConfig::parse("val_fraction = 1.5").is_err());
    assert!(RunConfig::parse("lr = 0").is_err());
    let scaled = RunConfig::parse("epochs = 3\ndataset = ac_cmnist\nfull_scale = true").unwrap();
    assert_eq!((scaled.train_sizes.clone(), scaled.test_size, scaled.epochs), (vec![25_000, 25_000], 10_000, 3));
}

/// One-feature logistic regression on a population where `P(y = 1 | x = ±1) = 0.8 / 0.2`.
fn logistic_population() -> (Tensor, Vec<usize>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (v, ones) in [(1.0, 4), (-1.0, 1)] {
        for i in 0..5 {
            x.push(v);
            y.push(usize::from(i < ones));
        }
    }
    (Array2::from_shape_vec((10, 1), x).unwrap(), y)
}

fn risk(model: &Mlp, x: &Tensor, y: &[usize]) -> (f64, Vec<Tensor>) {
    let mut g = Graph::new();
    let p = model.bind(&mut g);
    let xv = g.constant(x.clone());
    let logits = model.forward_bound(&mut g, &p, xv).unwrap();
    let loss = g.cross_entropy(logits, y).unwrap();
    g.backward(loss).unwrap();
    (g.scalar(loss), p.iter().map(|&v| g.grad(v).clone()).collect())
}

#[test]
fn optimizers_reach_the_logistic_optimum() {
    let optimum = -(0.8f64 * 0.8f64.ln() + 0.2 * 0.2f64.ln());
    assert!((optimum - 0.5004).abs() < 1e-4);
    let (x, y) = logistic_population();
    for (kind, lr, steps) in [(OptimizerKind::Sgd, 1.0, 2000), (OptimizerKind::Adam, 0.05, 2000)] {
        let mut model = Mlp::from_layers(
            vec![Linear { weight: array![[0.3, -0.2]], bias: array![[0.1, 0.0]] }],
            Activation::Identity,
            false,
        )
        .unwrap();
        let mut opt = Optimizer::new(kind, lr);
        for _ in 0..steps {
            let (_, grads) = risk(&model, &x, &y);
            opt.step(&mut model, &grads);
        }
        let (final_risk, _) = risk(&model, &x, &y);
        assert!((final_risk - optimum).abs() <= 1e-3, "{kind:?}: {final_risk}");
    }
}
