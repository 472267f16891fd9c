// Temporary calibration harness; removed before release.
use patchselect_core::eval::experiments::{build_bench_dataset, BenchConfig};
use patchselect_core::synth::SceneConfig;

#[test]
#[ignore]
fn calibrate_prescreener() {
    let cfg = BenchConfig::default_benchmark();
    for seed in [1u64, 2, 3] {
        let t0 = std::time::Instant::now();
        let data = build_bench_dataset(&cfg, seed).unwrap();
        let truth_count: usize = data.scenes.iter().map(|s| s.truth.objects.len()).sum();
        println!(
            "seed {seed}: {} alarms = {} targets + {} non-targets; truth objects {}; recall {:.3}; area {:.0} m2; {:?}",
            data.alarms.len(),
            data.n_targets(),
            data.n_nontargets(),
            truth_count,
            data.n_targets() as f64 / truth_count as f64,
            data.total_area_m2,
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn calibrate_tiny() {
    let cfg = BenchConfig {
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
        ..BenchConfig::default_benchmark()
    };
    for seed in [1u64, 2] {
        let data = build_bench_dataset(&cfg, seed).unwrap();
        println!(
            "tiny seed {seed}: {} alarms = {} targets + {} non-targets",
            data.alarms.len(),
            data.n_targets(),
            data.n_nontargets()
        );
    }
}

#[test]
#[ignore]
fn probe_strategy_bench_hog_rf() {
    use patchselect_core::eval::experiments::*;
    use patchselect_core::features::FeatureKind;
    use patchselect_core::strategy::registry;
    let cfg = BenchConfig {
        dataset_seeds: vec![1, 2, 3],
        ..BenchConfig::default_benchmark()
    };
    let t0 = std::time::Instant::now();
    let run = run_strategy_bench(&cfg, &registry(), &FeatureKind::ALL, &ClfKind::ALL).unwrap();
    println!("full fig4 3 seeds: {:?}", t0.elapsed());
    for row in fig4_table(&run, cfg.far2).unwrap() {
        println!(
            "{:4} {:3} s{:02} {:22} pauc {:.4}",
            row.feature, row.classifier, row.strategy_index, row.strategy, row.mean_pauc
        );
    }
}

#[test]
#[ignore]
fn probe_policy_grid() {
    use patchselect_core::eval::experiments::*;
    let cfg = BenchConfig {
        dataset_seeds: vec![1],
        ..BenchConfig::default_benchmark()
    };
    let t0 = std::time::Instant::now();
    let run = run_policy_grid(&cfg).unwrap();
    println!("policy grid 1 seed: {:?}", t0.elapsed());
    for row in fig6_table(&run, &cfg).unwrap() {
        println!(
            "fig6 {:2} L={:2} mean {:.4} [{:.4},{:.4}]",
            row.ordering, row.l, row.mean_pauc, row.min_pauc, row.max_pauc
        );
    }
    for row in fig7_table(&run, &cfg).unwrap() {
        println!(
            "fig7 {:12} L={:2} mean {:.4}",
            row.nontarget_sampler, row.l, row.mean_pauc
        );
    }
    for row in fig8_table(&run, &cfg).unwrap() {
        println!("fig8 K={} L={:2} mean {:.4}", row.target_k, row.l, row.mean_pauc);
    }
    // Whole-curve regime: far2 at/above the maximum achievable FAR.
    let wide = BenchConfig { far2: 0.06, ..cfg.clone() };
    for row in fig7_table(&run, &wide).unwrap() {
        println!(
            "wide fig7 {:12} L={:2} mean {:.4}",
            row.nontarget_sampler, row.l, row.mean_pauc
        );
    }
    for row in fig8_table(&run, &wide).unwrap() {
        println!("wide fig8 K={} L={:2} mean {:.4}", row.target_k, row.l, row.mean_pauc);
    }
    for row in fig6_table(&run, &wide).unwrap() {
        println!(
            "wide fig6 {:2} L={:2} mean {:.4}",
            row.ordering, row.l, row.mean_pauc
        );
    }
}

#[test]
#[ignore]
fn probe_downdepth_ranking() {
    use patchselect_core::eval::experiments::*;
    let cfg = BenchConfig {
        dataset_seeds: vec![1],
        ..BenchConfig::default_benchmark()
    };
    let run = run_policy_grid(&cfg).unwrap();
    let seed = &run.per_seed[0];
    for nt in NonTargetTraining::ALL {
        let stats = &seed.stats[&(4usize, nt)];
        // top-12 DS confidences
        let mut conf: Vec<(f64, bool)> = stats
            .iter()
            .zip(&seed.labels)
            .map(|(s, &l)| {
                let mut d = s.ds.clone();
                d.sort_by(|a, b| b.total_cmp(a));
                (d.iter().take(12).sum::<f64>(), l)
            })
            .collect();
        conf.sort_by(|a, b| b.0.total_cmp(&a.0));
        let n_top30_nontarget = conf.iter().take(30).filter(|(_, l)| !l).count();
        let mean_t = conf.iter().filter(|(_, l)| *l).map(|(c, _)| c).sum::<f64>()
            / conf.iter().filter(|(_, l)| *l).count() as f64;
        let mean_n = conf.iter().filter(|(_, l)| !l).map(|(c, _)| c).sum::<f64>()
            / conf.iter().filter(|(_, l)| !l).count() as f64;
        let top: String = conf
            .iter()
            .take(40)
            .map(|(_, l)| if *l { 'T' } else { 'N' })
            .collect();
        let bottom: String = conf
            .iter()
            .rev()
            .take(40)
            .map(|(_, l)| if *l { 'T' } else { 'N' })
            .collect();
        println!(
            "{:12}: top30 has {} N; mean conf T {:.2} N {:.2}\n  top40:    {}\n  bottom40: {}",
            nt.name(),
            n_top30_nontarget,
            mean_t,
            mean_n,
            top,
            bottom
        );
    }
}

#[test]
#[ignore]
fn probe_downdepth_tail() {
    use patchselect_core::eval::experiments::*;
    use patchselect_core::eval::{pauc, roc};
    let cfg = BenchConfig {
        dataset_seeds: vec![1],
        ..BenchConfig::default_benchmark()
    };
    let run = run_policy_grid(&cfg).unwrap();
    let seed = &run.per_seed[0];
    for k in [1usize, 2, 3, 4] {
        for nt in NonTargetTraining::ALL {
            let stats = &seed.stats[&(k, nt)];
            let conf: Vec<f64> = stats
                .iter()
                .map(|s| {
                    let mut d = s.ds.clone();
                    d.sort_by(|a, b| b.total_cmp(a));
                    d.iter().take(12).sum::<f64>()
                })
                .collect();
            let curve = roc(&conf, &seed.labels, seed.total_area_m2).unwrap();
            // targets below the 12th-strongest non-target
            let mut nconf: Vec<f64> = conf
                .iter()
                .zip(&seed.labels)
                .filter(|(_, &l)| !l)
                .map(|(c, _)| *c)
                .collect();
            nconf.sort_by(|a, b| b.total_cmp(a));
            let th = nconf[11];
            let weak_targets = conf
                .iter()
                .zip(&seed.labels)
                .filter(|(c, &l)| l && **c <= th)
                .count();
            println!(
                "K={k} {:12}: pauc@.005 {:.4}  targets_below_12thN {}",
                nt.name(),
                pauc(&curve, 0.005),
                weak_targets
            );
        }
    }
}

#[test]
#[ignore]
fn probe_grid_three_seeds() {
    use patchselect_core::eval::experiments::*;
    let cfg = BenchConfig {
        dataset_seeds: vec![1, 2, 3],
        ..BenchConfig::default_benchmark()
    };
    let t0 = std::time::Instant::now();
    let run = run_policy_grid(&cfg).unwrap();
    println!("grid 3 seeds: {:?}", t0.elapsed());
    for row in fig7_table(&run, &cfg).unwrap() {
        println!(
            "fig7 {:12} L={:2} mean {:.4}",
            row.nontarget_sampler, row.l, row.mean_pauc
        );
    }
    for row in fig6_table(&run, &cfg).unwrap() {
        println!("fig6 {:2} L={:2} mean {:.4}", row.ordering, row.l, row.mean_pauc);
    }
    for row in fig8_table(&run, &cfg).unwrap() {
        println!("fig8 K={} L={:2} mean {:.4}", row.target_k, row.l, row.mean_pauc);
    }
}
