//! Cross-module pipeline tests: clustered cross-validation end to end on a
//! small synthetic benchmark.

use patchselect_core::classifiers::{ClassifierConfig, ForestConfig};
use patchselect_core::eval::experiments::{bench_fold_plan, build_bench_dataset, BenchConfig};
use patchselect_core::eval::{pauc, per_fold_paucs, roc, run_cv};
use patchselect_core::features::FeatureKind;
use patchselect_core::strategy::registry_strategy;
use patchselect_core::synth::SceneConfig;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_bench() -> BenchConfig {
    BenchConfig {
        lanes: 2,
        runs: 2,
        scene: SceneConfig {
            x_len: 640,
            n_targets: 4,
            n_clutter: 6,
            clutter_amplitude_min: 4.0,
            clutter_amplitude_max: 6.5,
            ..SceneConfig::default()
        },
        dataset_seeds: vec![1],
        n_folds: 3,
        far2: 0.05,
        ..BenchConfig::default_benchmark()
    }
}

fn forest() -> ClassifierConfig {
    ClassifierConfig::Forest(ForestConfig {
        seed: 11,
        ..ForestConfig::default()
    })
}

#[test]
fn every_alarm_gets_exactly_one_confidence() {
    let cfg = small_bench();
    let data = build_bench_dataset(&cfg, 1).unwrap();
    let plan = bench_fold_plan(&cfg, &data, 1);
    let strategy = registry_strategy(11).unwrap();
    let confidences = run_cv(
        &data,
        &strategy,
        FeatureKind::Hog,
        &forest(),
        &plan,
        &cfg.msek_params(),
    )
    .unwrap();
    assert_eq!(confidences.len(), data.alarms.len());
    assert!(confidences.iter().all(|c| c.is_finite()));
}

#[test]
fn run_cv_is_bit_reproducible() {
    let cfg = small_bench();
    let data = build_bench_dataset(&cfg, 1).unwrap();
    let plan = bench_fold_plan(&cfg, &data, 1);
    let strategy = registry_strategy(5).unwrap();
    let a = run_cv(
        &data,
        &strategy,
        FeatureKind::Ehd,
        &forest(),
        &plan,
        &cfg.msek_params(),
    )
    .unwrap();
    let b = run_cv(
        &data,
        &strategy,
        FeatureKind::Ehd,
        &forest(),
        &plan,
        &cfg.msek_params(),
    )
    .unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn separable_benchmark_reaches_full_detection_at_zero_far() {
    // Dim, echo-free, flat clutter against strong multi-lobe targets:
    // the classifier should rank every target above every non-target.
    let cfg = BenchConfig {
        scene: SceneConfig {
            x_len: 640,
            n_targets: 4,
            n_clutter: 6,
            target_amplitude_min: 9.0,
            target_amplitude_max: 10.0,
            clutter_amplitude_min: 4.0,
            clutter_amplitude_max: 5.0,
            speckle_density: 0.0,
            ..SceneConfig::default()
        },
        ..small_bench()
    };
    let data = build_bench_dataset(&cfg, 3).unwrap();
    assert!(data.n_targets() >= 4 && data.n_nontargets() >= 3);
    let plan = bench_fold_plan(&cfg, &data, 3);
    let strategy = registry_strategy(11).unwrap();
    let confidences = run_cv(
        &data,
        &strategy,
        FeatureKind::Hog,
        &forest(),
        &plan,
        &cfg.msek_params(),
    )
    .unwrap();
    let labels: Vec<bool> = data.alarms.iter().map(|a| a.is_target()).collect();
    let curve = roc(&confidences, &labels, data.total_area_m2).unwrap();
    assert_eq!(curve.points[0], (0.0, 1.0), "{:?}", curve.points);
    assert!((pauc(&curve, cfg.far2) - 1.0).abs() < 1e-12);

    let per_fold = per_fold_paucs(&data, &plan, &confidences, cfg.far2).unwrap();
    assert_eq!(per_fold.len(), plan.n_folds);
}

#[test]
fn permuted_confidences_fall_to_the_chance_baseline() {
    let cfg = small_bench();
    let data = build_bench_dataset(&cfg, 1).unwrap();
    let labels: Vec<bool> = data.alarms.iter().map(|a| a.is_target()).collect();
    let n = labels.len();
    let far_max = data.n_nontargets() as f64 / data.total_area_m2;

    // Monte Carlo null: confidences carry no label information.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mean_pauc = 0.0;
    let trials = 80;
    for _ in 0..trials {
        let mut confidences: Vec<f64> = (0..n).map(|i| i as f64).collect();
        confidences.shuffle(&mut rng);
        let curve = roc(&confidences, &labels, data.total_area_m2).unwrap();
        mean_pauc += pauc(&curve, far_max);
    }
    mean_pauc /= trials as f64;
    assert!(
        (mean_pauc - 0.5).abs() < 0.1,
        "null pAUC over the full FAR range should be near 0.5, got {mean_pauc}"
    );
}
