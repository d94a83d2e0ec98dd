mod common;

use std::cell::RefCell;

use cobb_core::data::{synthesize_dataset, SyntheticConfig};
use cobb_core::evaluation::{
    benchmark, cross_validate, fold_scaler, grid_search, make_folds, mae, CvReport, Parallelism, ParamGrid,
    ReportFormat, ScalerMode,
};
use cobb_core::features::{build_matrix, RowAccess};
use cobb_core::regressors::{Algorithm, KnnParams, RegressorSpec, RidgeParams};
use cobb_core::rng::SplitMix64;
use common::{matrix, random_matrix, scripted_cv};

#[test]
fn mae_hand_case_and_symmetry() {
    assert_eq!(mae(&[30.0, 40.0], &[32.0, 44.0]).unwrap(), 3.0);
    let mut rng = SplitMix64::new(1);
    for _ in 0..1000 {
        let n = 1 + rng.below(20);
        let a: Vec<f64> = (0..n).map(|_| rng.uniform(-50.0, 50.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.uniform(-50.0, 50.0)).collect();
        assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn fold_partition_exhaustive() {
    for n in 2..=40 {
        for k in 2..=n {
            let f = make_folds(n, k, (n * 100 + k) as u64).unwrap();
            assert_eq!(f.fold_of.len(), n);
            let sizes = f.fold_sizes();
            assert_eq!(sizes.len(), k);
            let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
            assert!(lo >= 1 && hi - lo <= 1, "n {n} k {k}: {sizes:?}");
            assert_eq!(sizes.iter().sum::<usize>(), n);
            // larger blocks first
            assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
            assert!(f.fold_of.iter().all(|&g| g < k));
        }
    }
}

#[test]
fn thirty_samples_ten_folds() {
    let f = make_folds(30, 10, 42).unwrap();
    assert_eq!(f.fold_sizes(), vec![3; 10]);
}

#[test]
fn folds_are_seeded() {
    for n in 3..12 {
        let base = make_folds(n, 2, 0).unwrap();
        assert_eq!(make_folds(n, 2, 0).unwrap(), base);
        let differs = (1..=100).any(|s| make_folds(n, 2, s).unwrap().fold_of != base.fold_of);
        assert!(differs);
    }
}

#[test]
fn per_fold_scaler_never_reads_test_rows() {
    struct Counting {
        rows: Vec<Vec<f64>>,
        reads: RefCell<Vec<usize>>,
    }
    impl RowAccess for Counting {
        fn n_rows(&self) -> usize {
            self.rows.len()
        }
        fn width(&self) -> usize {
            self.rows[0].len()
        }
        fn row(&self, i: usize) -> &[f64] {
            self.reads.borrow_mut().push(i);
            &self.rows[i]
        }
    }
    let mut rng = SplitMix64::new(3);
    let double = Counting {
        rows: random_matrix(&mut rng, 23, 5, -1.0, 1.0),
        reads: RefCell::new(Vec::new()),
    };
    let folds = make_folds(23, 5, 42).unwrap();
    for f in 0..5 {
        double.reads.borrow_mut().clear();
        fold_scaler(&double, &folds, f, ScalerMode::PerFold).unwrap();
        let reads = double.reads.borrow();
        assert!(!reads.is_empty());
        assert!(reads.iter().all(|&i| folds.fold_of[i] != f));
    }
}

#[test]
fn constant_targets_give_zero_error() {
    let mut rng = SplitMix64::new(4);
    let fm = matrix(random_matrix(&mut rng, 12, 3, 0.0, 1.0), vec![25.0; 12]);
    let r = cross_validate(&fm, &RegressorSpec::MeanBaseline, 4, 42, ScalerMode::PerFold).unwrap();
    assert_eq!(r.per_fold_mae, vec![0.0; 4]);
    let b = benchmark(&fm, &[RegressorSpec::MeanBaseline], 4, 42, ScalerMode::PerFold, Parallelism(0)).unwrap();
    assert_eq!(b.reports.len(), 1);
    assert_eq!(b.reports[0].mean_mae, 0.0);
}

#[test]
fn leave_one_out_nearest_neighbor() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
    let fm = matrix(rows, (0..10).map(|i| i as f64).collect());
    let spec = RegressorSpec::Knn(KnnParams { k: 1 });
    let r = cross_validate(&fm, &spec, 10, 42, ScalerMode::PerFold).unwrap();
    assert_eq!(r.per_fold_mae, vec![1.0; 10]);
}

#[test]
fn cv_matches_scripted_loop() {
    let mut rng = SplitMix64::new(5);
    let rows = random_matrix(&mut rng, 6, 3, -2.0, 2.0);
    let y: Vec<f64> = rows.iter().map(|r| 30.0 + 4.0 * r[0] - r[2]).collect();
    let fm = matrix(rows, y);
    let spec = Algorithm::DecisionTree.default_spec();
    let r = cross_validate(&fm, &spec, 3, 42, ScalerMode::PerFold).unwrap();
    let want = scripted_cv(&fm, &spec, 3, 42);
    for (a, b) in r.per_fold_mae.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-12);
    }
    check_aggregates(&r);
}

fn check_aggregates(r: &CvReport) {
    let k = r.per_fold_mae.len() as f64;
    let m = r.per_fold_mae.iter().sum::<f64>() / k;
    let sd = (r.per_fold_mae.iter().map(|v| (v - m).powi(2)).sum::<f64>() / k).sqrt();
    assert!((r.mean_mae - m).abs() <= 1e-12);
    assert!((r.std_mae - sd).abs() <= 1e-12);
    assert!(r.per_fold_mae.iter().all(|v| *v >= 0.0));
}

#[test]
fn fold_errors_name_the_fold() {
    let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
    let fm = matrix(rows, vec![1.0, 2.0, 3.0, 4.0]);
    // 3 training rows per fold cannot host k = 5 neighbours
    let e = cross_validate(&fm, &RegressorSpec::Knn(KnnParams { k: 5 }), 4, 1, ScalerMode::PerFold).unwrap_err();
    assert!(e.to_string().contains("fold 0"), "{e}");
    assert!(cross_validate(&fm, &RegressorSpec::MeanBaseline, 5, 1, ScalerMode::PerFold).is_err());
}

fn linear_matrix() -> cobb_core::features::FeatureMatrix {
    let mut rng = SplitMix64::new(6);
    let rows = random_matrix(&mut rng, 30, 3, -1.0, 1.0);
    let y = rows.iter().map(|r| 40.0 + 10.0 * r[0] - 5.0 * r[1] + rng.uniform(-0.5, 0.5)).collect();
    matrix(rows, y)
}

#[test]
fn ridge_grid_prefers_small_alpha() {
    let fm = linear_matrix();
    let grid = ParamGrid::from_json(r#"{"algorithm":"ridge","params":{"alpha":[1e9,1e-9]}}"#)
        .unwrap()
        .expand()
        .unwrap();
    let r = grid_search(&fm, &grid, 10, 42, ScalerMode::PerFold, Parallelism(0)).unwrap();
    assert_eq!(r.best_spec, RegressorSpec::Ridge(RidgeParams { alpha: 1e-9 }));
    let min = r.table.iter().filter_map(|e| e.mean_mae).fold(f64::INFINITY, f64::min);
    assert_eq!(r.best_mean_mae, min);
}

#[test]
fn grid_ties_keep_first_and_single_point_matches_cv() {
    let fm = linear_matrix();
    let a = RegressorSpec::Ridge(RidgeParams { alpha: 0.5 });
    let r = grid_search(&fm, &[a.clone(), a.clone()], 5, 42, ScalerMode::PerFold, Parallelism(0)).unwrap();
    assert_eq!(r.best_report, cross_validate(&fm, &a, 5, 42, ScalerMode::PerFold).unwrap());
    assert_eq!(r.table[0].mean_mae, r.table[1].mean_mae);
    assert!(grid_search(&fm, &[], 5, 42, ScalerMode::PerFold, Parallelism(0)).is_err());
}

#[test]
fn grid_records_failures_and_continues() {
    let fm = linear_matrix();
    let grid = [RegressorSpec::Knn(KnnParams { k: 29 }), RegressorSpec::Knn(KnnParams { k: 3 })];
    let r = grid_search(&fm, &grid, 10, 42, ScalerMode::PerFold, Parallelism(0)).unwrap();
    assert!(r.table[0].error.is_some() && r.table[0].mean_mae.is_none());
    assert_eq!(r.best_spec, grid[1]);
}

#[test]
fn global_scaler_mode_is_recorded() {
    let fm = linear_matrix();
    let spec = Algorithm::Knn.default_spec();
    let a = cross_validate(&fm, &spec, 10, 42, ScalerMode::Global).unwrap();
    assert_eq!(a.scaler_mode, ScalerMode::Global);
    check_aggregates(&a);
}

#[test]
fn benchmark_orders_by_roster_and_is_reproducible() {
    let fm = build_matrix(&synthesize_dataset(&SyntheticConfig::default()).unwrap()).unwrap();
    let specs = [
        RegressorSpec::MeanBaseline,
        Algorithm::DecisionTree.default_spec(),
        Algorithm::Knn.default_spec(),
        Algorithm::Ridge.default_spec(),
    ];
    let a = benchmark(&fm, &specs, 10, 42, ScalerMode::PerFold, Parallelism(0)).unwrap();
    let names: Vec<&str> = a.reports.iter().map(|r| r.model_name.as_str()).collect();
    assert_eq!(names, ["knn", "ridge", "decision_tree", "mean_baseline"]);
    for r in &a.reports {
        check_aggregates(r);
    }
    let b = benchmark(&fm, &specs, 10, 42, ScalerMode::PerFold, Parallelism(3)).unwrap();
    for f in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown] {
        assert_eq!(a.render(f), b.render(f));
    }
    let best = a.reports.iter().map(|r| r.mean_mae).fold(f64::INFINITY, f64::min);
    assert_eq!(a.reports[a.best].mean_mae, best);
    let md = a.render(ReportFormat::Markdown);
    assert_eq!(md.matches("| *").count(), 1);
}
