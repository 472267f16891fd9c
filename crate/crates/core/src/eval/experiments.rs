//! The desk-scale benchmark and the experiment sweeps: the full strategy
//! comparison, the FAR-range sweep, the En-vs-DS ordering grid, the
//! non-target sampler grid, and the target-K grid.
//!
//! All sweeps run on a deterministic synthetic benchmark (lanes x runs
//! scenes per dataset seed). Work is shared aggressively: strategies with
//! the same training policy share trained models, per-alarm patches are
//! featurized once per feature kind, and every test policy is an O(1)
//! reduction over cached per-alarm decision statistics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bscan::{extract_patch, Keypoint};
use crate::classifiers::{
    predict_batch, train, ClassifierConfig, ForestConfig, SvmConfig, TrainingSet,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{cluster_and_fold, pauc, roc, FoldPlan};
use crate::exec;
use crate::features::{extract, FeatureKind, FeatureVector};
use crate::keypoint::{msek, sample_down_depth, MsekParams};
use crate::seeds;
use crate::strategy::{
    combine_ds, combine_en, registry, training_keypoints, SamplerSpec, Selector, StrategySpec,
    TestOrdering, TrainPolicy, DEFAULT_DS_STRIDE,
};
use crate::synth::{generate_scene, PrescreenerParams, SceneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClfKind {
    Svm,
    Rf,
}

impl ClfKind {
    pub const ALL: [ClfKind; 2] = [ClfKind::Svm, ClfKind::Rf];

    pub fn name(self) -> &'static str {
        match self {
            ClfKind::Svm => "svm",
            ClfKind::Rf => "rf",
        }
    }
}

impl std::str::FromStr for ClfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(ClfKind::Svm),
            "rf" => Ok(ClfKind::Rf),
            other => Err(Error::Config(format!("unknown classifier {other:?}"))),
        }
    }
}

/// Benchmark definition: scene grid, prescreener, MSEK, folds, seeds, and
/// pAUC settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub lanes: u32,
    pub runs: u32,
    pub scene: SceneConfig,
    pub prescreener: PrescreenerParams,
    pub smooth_window: usize,
    pub margin: usize,
    pub halo_radius_m: f64,
    pub cluster_distance_m: f64,
    pub n_folds: usize,
    pub fold_seed: u64,
    pub dataset_seeds: Vec<u64>,
    pub far2: f64,
    pub far2_list: Vec<f64>,
    pub l_grid: Vec<usize>,
    pub svm: SvmConfig,
    pub rf_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self::default_benchmark()
    }
}

impl BenchConfig {
    /// The committed benchmark: 8 lanes x 3 runs per dataset seed, ten
    /// frozen seeds, sized to raise roughly 300 target and 120 non-target
    /// alarms per seed (the 2.8:1 class ratio of full-scale collections).
    pub fn default_benchmark() -> Self {
        Self {
            lanes: 8,
            runs: 3,
            scene: SceneConfig::default(),
            prescreener: PrescreenerParams::default(),
            smooth_window: 9,
            margin: 9,
            halo_radius_m: 0.25,
            cluster_distance_m: 1.0,
            n_folds: 4,
            fold_seed: 7,
            dataset_seeds: vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
            far2: 0.005,
            far2_list: vec![0.002, 0.005, 0.01, 0.02, 0.05],
            l_grid: (1..=12).collect(),
            svm: SvmConfig::default(),
            rf_seed: 4242,
        }
    }

    pub fn msek_params(&self) -> MsekParams {
        MsekParams {
            smooth_window: self.smooth_window,
            max_keypoints: 16,
            margin: self.margin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lanes == 0 || self.runs == 0 {
            return Err(Error::Config("need at least one lane and one run".into()));
        }
        if self.dataset_seeds.is_empty() {
            return Err(Error::Config("dataset_seeds must be non-empty".into()));
        }
        if self.n_folds < 2 {
            return Err(Error::Config("n_folds must be >= 2".into()));
        }
        if !(self.far2 > 0.0) || self.far2_list.iter().any(|&f| f <= 0.0) {
            return Err(Error::Config("far2 values must be positive".into()));
        }
        if self.l_grid.is_empty() || self.l_grid.contains(&0) {
            return Err(Error::Config("l_grid must be non-empty and >= 1".into()));
        }
        self.msek_params().validate()?;
        self.prescreener.validate()?;
        self.scene.validate()
    }

    fn classifier_config(&self, clf: ClfKind, seed: u64) -> ClassifierConfig {
        match clf {
            ClfKind::Svm => ClassifierConfig::Svm(self.svm.clone()),
            ClfKind::Rf => ClassifierConfig::Forest(ForestConfig {
                seed,
                ..ForestConfig::default()
            }),
        }
    }
}

/// Generate the lanes x runs scene grid for one dataset seed, prescreen,
/// and label.
pub fn build_bench_dataset(cfg: &BenchConfig, dataset_seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let grid: Vec<(u32, u32)> = (0..cfg.lanes)
        .flat_map(|lane| (0..cfg.runs).map(move |run| (lane, run)))
        .collect();
    let scenes: Vec<Result<_>> = exec::map(&grid, |&(lane_id, run_id)| {
        let scene_cfg = SceneConfig {
            lane_id,
            run_id,
            seed: dataset_seed,
            ..cfg.scene.clone()
        };
        generate_scene(&scene_cfg)
    });
    let scenes: Result<Vec<_>> = scenes.into_iter().collect();
    Dataset::from_scenes(scenes?, &cfg.prescreener, cfg.halo_radius_m)
}

pub fn bench_fold_plan(cfg: &BenchConfig, data: &Dataset, dataset_seed: u64) -> FoldPlan {
    cluster_and_fold(
        &data.alarms,
        cfg.cluster_distance_m,
        cfg.n_folds,
        seeds::derive(cfg.fold_seed, &[dataset_seed]),
    )
}

// ---------------------------------------------------------------------------
// Cached per-alarm features and statistics
// ---------------------------------------------------------------------------

/// Decision statistics for one alarm: at its MSEK keypoints in energy
/// order, and on the stride grid in depth order.
#[derive(Debug, Clone)]
pub struct AlarmStats {
    pub en: Vec<f64>,
    pub ds: Vec<f64>,
}

struct AlarmPlan {
    msek_kps: Vec<Keypoint>,
    ds_indices: Vec<usize>,
    /// Sorted union of every time index any sampler or test grid touches.
    needed: Vec<usize>,
}

struct Cache<'a> {
    data: &'a Dataset,
    msek_params: MsekParams,
    plans: Vec<AlarmPlan>,
}

impl<'a> Cache<'a> {
    fn build(
        data: &'a Dataset,
        msek_params: MsekParams,
        ds_stride: usize,
        samplers: &[SamplerSpec],
    ) -> Result<Self> {
        let idx: Vec<usize> = (0..data.alarms.len()).collect();
        let plans: Vec<Result<AlarmPlan>> = exec::map(&idx, |&i| {
            let alarm = &data.alarms[i];
            let scene = data.scene_for(alarm);
            let kps = msek(&scene.dn, alarm.downtrack_index, &msek_params);
            let ds = sample_down_depth(scene.dn.t_len(), ds_stride, msek_params.margin);
            let mut needed: Vec<usize> = kps.iter().map(|k| k.time_index).collect();
            needed.extend(&ds);
            for sampler in samplers {
                if matches!(sampler, SamplerSpec::TopEnergy(_)) {
                    continue; // prefix of the MSEK list
                }
                needed.extend(
                    training_keypoints(sampler, &scene.dn, alarm, &msek_params)?
                        .iter()
                        .map(|k| k.time_index),
                );
            }
            needed.sort_unstable();
            needed.dedup();
            Ok(AlarmPlan {
                msek_kps: kps,
                ds_indices: ds,
                needed,
            })
        });
        let plans: Result<Vec<_>> = plans.into_iter().collect();
        Ok(Self {
            data,
            msek_params,
            plans: plans?,
        })
    }

    /// Featurize every planned patch of every alarm for one feature kind.
    fn featurize(&self, kind: FeatureKind) -> Result<Vec<Vec<FeatureVector>>> {
        let idx: Vec<usize> = (0..self.data.alarms.len()).collect();
        let rows: Vec<Result<Vec<FeatureVector>>> = exec::map(&idx, |&i| {
            let alarm = &self.data.alarms[i];
            let scene = self.data.scene_for(alarm);
            self.plans[i]
                .needed
                .iter()
                .map(|&t| {
                    let patch =
                        extract_patch(&scene.dn, &Keypoint::new(alarm.downtrack_index, t, 0.0))?;
                    Ok(extract(kind, &patch))
                })
                .collect()
        });
        rows.into_iter().collect()
    }

    fn row<'f>(
        &self,
        feats: &'f [Vec<FeatureVector>],
        alarm_index: usize,
        time_index: usize,
    ) -> &'f FeatureVector {
        let plan = &self.plans[alarm_index];
        let pos = plan
            .needed
            .binary_search(&time_index)
            .expect("planned index");
        &feats[alarm_index][pos]
    }

    /// Assemble the training set a policy prescribes over `alarm_idx`,
    /// reusing cached features. Matches `strategy::build_training_set`.
    fn training_set(
        &self,
        policy: &TrainPolicy,
        alarm_idx: &[usize],
        feats: &[Vec<FeatureVector>],
    ) -> Result<TrainingSet> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut provenance = Vec::new();
        for &i in alarm_idx {
            let alarm = &self.data.alarms[i];
            let sampler = if alarm.is_target() {
                &policy.target_sampler
            } else {
                &policy.nontarget_sampler
            };
            let label: i8 = if alarm.is_target() { 1 } else { -1 };
            let times: Vec<usize> = match sampler {
                SamplerSpec::TopEnergy(k) => self.plans[i]
                    .msek_kps
                    .iter()
                    .take(*k)
                    .map(|kp| kp.time_index)
                    .collect(),
                other => {
                    let scene = self.data.scene_for(alarm);
                    training_keypoints(other, &scene.dn, alarm, &self.msek_params)?
                        .iter()
                        .map(|kp| kp.time_index)
                        .collect()
                }
            };
            for t in times {
                features.push(self.row(feats, i, t).clone());
                labels.push(label);
                provenance.push(alarm.id());
            }
        }
        if !labels.iter().any(|&y| y > 0) || !labels.iter().any(|&y| y < 0) {
            return Err(Error::EmptyClass);
        }
        Ok(TrainingSet {
            features,
            labels,
            provenance,
        })
    }

    /// Evaluate a trained model on a set of alarms: one batched prediction
    /// over every needed patch, split back into per-alarm statistics.
    fn fold_statistics(
        &self,
        model: &crate::classifiers::Model,
        alarm_idx: &[usize],
        feats: &[Vec<FeatureVector>],
        en_l: usize,
    ) -> Result<Vec<AlarmStats>> {
        let mut batch: Vec<FeatureVector> = Vec::new();
        let mut extents: Vec<(usize, usize)> = Vec::with_capacity(alarm_idx.len());
        for &i in alarm_idx {
            let plan = &self.plans[i];
            let en_count = plan.msek_kps.len().min(en_l);
            for kp in plan.msek_kps.iter().take(en_count) {
                batch.push(self.row(feats, i, kp.time_index).clone());
            }
            for &t in &plan.ds_indices {
                batch.push(self.row(feats, i, t).clone());
            }
            extents.push((en_count, plan.ds_indices.len()));
        }
        let stats = predict_batch(model, &batch)?;
        let mut out = Vec::with_capacity(alarm_idx.len());
        let mut at = 0;
        for (en_count, ds_count) in extents {
            let en = stats[at..at + en_count].to_vec();
            at += en_count;
            let ds = stats[at..at + ds_count].to_vec();
            at += ds_count;
            out.push(AlarmStats { en, ds });
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Strategy bench (full comparison + FAR sweep)
// ---------------------------------------------------------------------------

pub struct SeedOutcome {
    pub dataset_seed: u64,
    pub labels: Vec<bool>,
    pub total_area_m2: f64,
    pub confidences: HashMap<(u8, FeatureKind, ClfKind), Vec<f64>>,
}

pub struct StrategyBenchRun {
    pub strategies: Vec<StrategySpec>,
    pub kinds: Vec<FeatureKind>,
    pub classifiers: Vec<ClfKind>,
    pub per_seed: Vec<SeedOutcome>,
}

/// Run every (strategy, feature, classifier) combination over all dataset
/// seeds, pooling confidences across folds. Strategies sharing a training
/// policy share trained models.
pub fn run_strategy_bench(
    cfg: &BenchConfig,
    strategies: &[StrategySpec],
    kinds: &[FeatureKind],
    classifiers: &[ClfKind],
) -> Result<StrategyBenchRun> {
    cfg.validate()?;
    if strategies.is_empty() || kinds.is_empty() || classifiers.is_empty() {
        return Err(Error::Config(
            "need at least one strategy, feature, and classifier".into(),
        ));
    }
    for s in strategies {
        s.test.validate()?;
    }

    // Group strategies by training policy (first-appearance order).
    let mut groups: Vec<(TrainPolicy, Vec<usize>)> = Vec::new();
    for (si, s) in strategies.iter().enumerate() {
        match groups.iter_mut().find(|(p, _)| *p == s.train) {
            Some((_, members)) => members.push(si),
            None => groups.push((s.train, vec![si])),
        }
    }
    let samplers: Vec<SamplerSpec> = {
        let mut out = Vec::new();
        for (p, _) in &groups {
            for s in [p.target_sampler, p.nontarget_sampler] {
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        out
    };
    let cache_k = strategy_cache_k(strategies, &cfg.l_grid);
    let msek_params = cfg.msek_params().with_max_keypoints(cache_k);
    let ds_stride = strategies
        .first()
        .map(|s| s.test.ds_stride)
        .unwrap_or(DEFAULT_DS_STRIDE);
    if strategies.iter().any(|s| s.test.ds_stride != ds_stride) {
        return Err(Error::Config(
            "all strategies in one run must share ds_stride".into(),
        ));
    }

    let mut per_seed = Vec::with_capacity(cfg.dataset_seeds.len());
    for &dataset_seed in &cfg.dataset_seeds {
        log::info!("strategy bench: dataset seed {dataset_seed}");
        let data = build_bench_dataset(cfg, dataset_seed)?;
        let plan = bench_fold_plan(cfg, &data, dataset_seed);
        let cache = Cache::build(&data, msek_params, ds_stride, &samplers)?;
        let folds = fold_indices(&data, &plan);

        let mut confidences: HashMap<(u8, FeatureKind, ClfKind), Vec<f64>> = HashMap::new();
        for &kind in kinds {
            let feats = cache.featurize(kind)?;
            // One task per (policy, classifier, fold).
            let mut tasks: Vec<(usize, ClfKind, usize)> = Vec::new();
            for (gi, _) in groups.iter().enumerate() {
                for &clf in classifiers {
                    for fold in 0..plan.n_folds {
                        tasks.push((gi, clf, fold));
                    }
                }
            }
            let en_l_by_group: Vec<usize> = groups
                .iter()
                .map(|(_, members)| {
                    members
                        .iter()
                        .filter_map(|&si| match strategies[si].test {
                            crate::strategy::TestPolicy {
                                ordering: TestOrdering::En,
                                selector: Selector::TopL(l),
                                ..
                            } => Some(l),
                            _ => None,
                        })
                        .max()
                        .unwrap_or(0)
                })
                .collect();

            let results: Vec<Result<(usize, ClfKind, usize, Vec<AlarmStats>)>> =
                exec::map(&tasks, |&(gi, clf, fold)| {
                    let (policy, _) = &groups[gi];
                    let train_idx: Vec<usize> = folds
                        .iter()
                        .enumerate()
                        .filter(|(f, _)| *f != fold)
                        .flat_map(|(_, idx)| idx.iter().copied())
                        .collect();
                    let test_idx = &folds[fold];
                    if test_idx.is_empty() {
                        return Ok((gi, clf, fold, Vec::new()));
                    }
                    let ts = cache.training_set(policy, &train_idx, &feats)?;
                    let seed = seeds::derive(
                        cfg.rf_seed,
                        &[dataset_seed, kind.len() as u64, gi as u64, fold as u64],
                    );
                    let model = train(&ts, &cfg.classifier_config(clf, seed))?;
                    let stats =
                        cache.fold_statistics(&model, test_idx, &feats, en_l_by_group[gi])?;
                    Ok((gi, clf, fold, stats))
                });

            // Assemble per (policy, clf) -> per-alarm stats.
            let mut stats_by: HashMap<(usize, ClfKind), Vec<Option<AlarmStats>>> = HashMap::new();
            for r in results {
                let (gi, clf, fold, stats) = r?;
                let slot = stats_by
                    .entry((gi, clf))
                    .or_insert_with(|| (0..data.alarms.len()).map(|_| None).collect());
                for (&i, s) in folds[fold].iter().zip(stats) {
                    slot[i] = Some(s);
                }
            }
            for (gi, (_, members)) in groups.iter().enumerate() {
                for &clf in classifiers {
                    let per_alarm = &stats_by[&(gi, clf)];
                    for &si in members {
                        let s = &strategies[si];
                        let conf: Result<Vec<f64>> = per_alarm
                            .iter()
                            .map(|stats| {
                                let stats = stats.as_ref().expect("fold plan covers all alarms");
                                match s.test.ordering {
                                    TestOrdering::En => match s.test.selector {
                                        Selector::TopL(l) => combine_en(&stats.en, l),
                                        _ => unreachable!("validated"),
                                    },
                                    TestOrdering::Ds => combine_ds(&stats.ds, s.test.selector),
                                }
                            })
                            .collect();
                        confidences.insert((s.index, kind, clf), conf?);
                    }
                }
            }
        }

        per_seed.push(SeedOutcome {
            dataset_seed,
            labels: data.alarms.iter().map(|a| a.is_target()).collect(),
            total_area_m2: data.total_area_m2,
            confidences,
        });
    }

    Ok(StrategyBenchRun {
        strategies: strategies.to_vec(),
        kinds: kinds.to_vec(),
        classifiers: classifiers.to_vec(),
        per_seed,
    })
}

fn strategy_cache_k(strategies: &[StrategySpec], l_grid: &[usize]) -> usize {
    let mut k = 16;
    for s in strategies {
        if let SamplerSpec::TopEnergy(n) = s.train.target_sampler {
            k = k.max(n);
        }
        if let SamplerSpec::TopEnergy(n) = s.train.nontarget_sampler {
            k = k.max(n);
        }
        if let (TestOrdering::En, Selector::TopL(l)) = (s.test.ordering, s.test.selector) {
            k = k.max(l);
        }
    }
    k.max(l_grid.iter().copied().max().unwrap_or(0))
}

fn fold_indices(data: &Dataset, plan: &FoldPlan) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); plan.n_folds];
    for (i, alarm) in data.alarms.iter().enumerate() {
        let f = plan.fold_of(alarm).expect("plan covers dataset");
        folds[f].push(i);
    }
    folds
}

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fig4Row {
    pub experiment: String,
    pub feature: String,
    pub classifier: String,
    pub strategy_index: u8,
    pub strategy: String,
    pub target_sampler: String,
    pub nontarget_sampler: String,
    pub ordering: String,
    pub selector: String,
    pub ds_stride: usize,
    pub far2: f64,
    pub n_seeds: usize,
    pub mean_pauc: f64,
    pub min_pauc: f64,
    pub max_pauc: f64,
}

/// Per-seed normalized pAUC for one (strategy, feature, classifier) cell.
pub fn cell_paucs(
    run: &StrategyBenchRun,
    strategy_index: u8,
    kind: FeatureKind,
    clf: ClfKind,
    far2: f64,
) -> Result<Vec<f64>> {
    run.per_seed
        .iter()
        .map(|seed| {
            let conf = seed
                .confidences
                .get(&(strategy_index, kind, clf))
                .ok_or_else(|| Error::Config("missing cell in bench run".into()))?;
            let curve = roc(conf, &seed.labels, seed.total_area_m2)?;
            Ok(pauc(&curve, far2))
        })
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Strategy-comparison table: one row per (feature, classifier, strategy)
/// with mean/min/max normalized pAUC over the dataset seeds.
pub fn fig4_table(run: &StrategyBenchRun, far2: f64) -> Result<Vec<Fig4Row>> {
    let mut rows = Vec::new();
    for &kind in &run.kinds {
        for &clf in &run.classifiers {
            for s in &run.strategies {
                let paucs = cell_paucs(run, s.index, kind, clf, far2)?;
                rows.push(Fig4Row {
                    experiment: "fig4".into(),
                    feature: kind.name().into(),
                    classifier: clf.name().into(),
                    strategy_index: s.index,
                    strategy: s.name.clone(),
                    target_sampler: s.train.target_sampler.to_string(),
                    nontarget_sampler: s.train.nontarget_sampler.to_string(),
                    ordering: s.test.ordering.to_string(),
                    selector: s.test.selector.to_string(),
                    ds_stride: s.test.ds_stride,
                    far2,
                    n_seeds: run.per_seed.len(),
                    mean_pauc: mean(&paucs),
                    min_pauc: paucs.iter().cloned().fold(f64::INFINITY, f64::min),
                    max_pauc: paucs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fig5Row {
    pub experiment: String,
    pub far2: f64,
    pub strategy_index: u8,
    pub strategy: String,
    pub n_seeds: usize,
    /// Mean over seeds and over every (feature, classifier) combination.
    pub mean_pauc: f64,
}

/// FAR-range sweep: per strategy, the mean pAUC across all conditions at
/// each `far2`.
pub fn fig5_table(run: &StrategyBenchRun, far2_list: &[f64]) -> Result<Vec<Fig5Row>> {
    let mut rows = Vec::new();
    for &far2 in far2_list {
        for s in &run.strategies {
            let mut all = Vec::new();
            for &kind in &run.kinds {
                for &clf in &run.classifiers {
                    all.extend(cell_paucs(run, s.index, kind, clf, far2)?);
                }
            }
            rows.push(Fig5Row {
                experiment: "fig5".into(),
                far2,
                strategy_index: s.index,
                strategy: s.name.clone(),
                n_seeds: run.per_seed.len(),
                mean_pauc: mean(&all),
            });
        }
    }
    Ok(rows)
}

/// Full strategy comparison on the benchmark (all 11 registry strategies,
/// all features, both classifiers).
pub fn experiment_fig4(cfg: &BenchConfig) -> Result<Vec<Fig4Row>> {
    let run = run_strategy_bench(cfg, &registry(), &FeatureKind::ALL, &ClfKind::ALL)?;
    fig4_table(&run, cfg.far2)
}

/// FAR-range sweep over the same grid as the full comparison.
pub fn experiment_fig5(cfg: &BenchConfig) -> Result<Vec<Fig5Row>> {
    let run = run_strategy_bench(cfg, &registry(), &FeatureKind::ALL, &ClfKind::ALL)?;
    fig5_table(&run, &cfg.far2_list)
}

// ---------------------------------------------------------------------------
// Policy grid (ordering / non-target sampler / target K)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonTargetTraining {
    /// Top-K energy keypoints, same K as the target side.
    TopEnergy,
    Regular5,
    DownDepth4,
}

impl NonTargetTraining {
    pub const ALL: [NonTargetTraining; 3] = [
        NonTargetTraining::TopEnergy,
        NonTargetTraining::Regular5,
        NonTargetTraining::DownDepth4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NonTargetTraining::TopEnergy => "top_energy",
            NonTargetTraining::Regular5 => "regular_5",
            NonTargetTraining::DownDepth4 => "down_depth_4",
        }
    }

    fn sampler(self, target_k: usize) -> SamplerSpec {
        match self {
            NonTargetTraining::TopEnergy => SamplerSpec::TopEnergy(target_k),
            NonTargetTraining::Regular5 => SamplerSpec::Regular(5),
            NonTargetTraining::DownDepth4 => SamplerSpec::DownDepth { stride: 4 },
        }
    }
}

pub const TARGET_K_GRID: [usize; 4] = [1, 2, 3, 4];

pub struct GridSeedOutcome {
    pub dataset_seed: u64,
    pub labels: Vec<bool>,
    pub total_area_m2: f64,
    pub stats: HashMap<(usize, NonTargetTraining), Vec<AlarmStats>>,
}

/// Per-alarm decision statistics for every (target K, non-target sampler)
/// training condition, HOG + random forest.
pub struct PolicyGridRun {
    pub per_seed: Vec<GridSeedOutcome>,
}

pub fn run_policy_grid(cfg: &BenchConfig) -> Result<PolicyGridRun> {
    cfg.validate()?;
    let kind = FeatureKind::Hog;
    let en_l = cfg.l_grid.iter().copied().max().unwrap_or(12);
    let msek_params = cfg.msek_params().with_max_keypoints(16.max(en_l));
    let policies: Vec<(usize, NonTargetTraining)> = TARGET_K_GRID
        .iter()
        .flat_map(|&k| NonTargetTraining::ALL.map(|s| (k, s)))
        .collect();
    let samplers: Vec<SamplerSpec> = vec![
        SamplerSpec::Regular(5),
        SamplerSpec::DownDepth { stride: 4 },
    ];

    let mut per_seed = Vec::with_capacity(cfg.dataset_seeds.len());
    for &dataset_seed in &cfg.dataset_seeds {
        log::info!("policy grid: dataset seed {dataset_seed}");
        let data = build_bench_dataset(cfg, dataset_seed)?;
        let plan = bench_fold_plan(cfg, &data, dataset_seed);
        let cache = Cache::build(&data, msek_params, DEFAULT_DS_STRIDE, &samplers)?;
        let folds = fold_indices(&data, &plan);
        let feats = cache.featurize(kind)?;

        let mut tasks: Vec<(usize, usize)> = Vec::new(); // (policy index, fold)
        for pi in 0..policies.len() {
            for fold in 0..plan.n_folds {
                tasks.push((pi, fold));
            }
        }
        let results: Vec<Result<(usize, usize, Vec<AlarmStats>)>> =
            exec::map(&tasks, |&(pi, fold)| {
                let (target_k, nontarget) = policies[pi];
                let policy = TrainPolicy {
                    target_sampler: SamplerSpec::TopEnergy(target_k),
                    nontarget_sampler: nontarget.sampler(target_k),
                };
                let train_idx: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|(f, _)| *f != fold)
                    .flat_map(|(_, idx)| idx.iter().copied())
                    .collect();
                let test_idx = &folds[fold];
                if test_idx.is_empty() {
                    return Ok((pi, fold, Vec::new()));
                }
                let ts = cache.training_set(&policy, &train_idx, &feats)?;
                let seed = seeds::derive(
                    cfg.rf_seed,
                    &[dataset_seed, 0x9219, pi as u64, fold as u64],
                );
                let model = train(&ts, &cfg.classifier_config(ClfKind::Rf, seed))?;
                let stats = cache.fold_statistics(&model, test_idx, &feats, en_l)?;
                Ok((pi, fold, stats))
            });

        let mut stats: HashMap<(usize, NonTargetTraining), Vec<AlarmStats>> = HashMap::new();
        let mut slots: HashMap<usize, Vec<Option<AlarmStats>>> = HashMap::new();
        for r in results {
            let (pi, fold, fold_stats) = r?;
            let slot = slots
                .entry(pi)
                .or_insert_with(|| (0..data.alarms.len()).map(|_| None).collect());
            for (&i, s) in folds[fold].iter().zip(fold_stats) {
                slot[i] = Some(s);
            }
        }
        for (pi, slot) in slots {
            let filled: Vec<AlarmStats> = slot
                .into_iter()
                .map(|s| s.expect("fold plan covers all alarms"))
                .collect();
            stats.insert(policies[pi], filled);
        }

        per_seed.push(GridSeedOutcome {
            dataset_seed,
            labels: data.alarms.iter().map(|a| a.is_target()).collect(),
            total_area_m2: data.total_area_m2,
            stats,
        });
    }
    Ok(PolicyGridRun { per_seed })
}

fn grid_pauc(
    run: &PolicyGridRun,
    target_k: usize,
    nontarget: NonTargetTraining,
    ordering: TestOrdering,
    l: usize,
    far2: f64,
) -> Result<f64> {
    let mut per_seed = Vec::with_capacity(run.per_seed.len());
    for seed in &run.per_seed {
        let stats = seed
            .stats
            .get(&(target_k, nontarget))
            .ok_or_else(|| Error::Config("missing policy in grid run".into()))?;
        let conf: Result<Vec<f64>> = stats
            .iter()
            .map(|s| match ordering {
                TestOrdering::En => combine_en(&s.en, l),
                TestOrdering::Ds => combine_ds(&s.ds, Selector::TopL(l)),
            })
            .collect();
        let curve = roc(&conf?, &seed.labels, seed.total_area_m2)?;
        per_seed.push(pauc(&curve, far2));
    }
    Ok(mean(&per_seed))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fig6Row {
    pub experiment: String,
    pub ordering: String,
    pub l: usize,
    pub far2: f64,
    pub n_seeds: usize,
    /// Mean over the target-K axis; min/max give the error-bar range.
    pub mean_pauc: f64,
    pub min_pauc: f64,
    pub max_pauc: f64,
    pub pauc_k1: f64,
    pub pauc_k2: f64,
    pub pauc_k3: f64,
    pub pauc_k4: f64,
}

/// En-vs-DS ordering over the L grid (non-target training: 5 regular
/// intervals; curves averaged over target K with min/max error bars).
pub fn fig6_table(run: &PolicyGridRun, cfg: &BenchConfig) -> Result<Vec<Fig6Row>> {
    let mut rows = Vec::new();
    for ordering in [TestOrdering::En, TestOrdering::Ds] {
        for &l in &cfg.l_grid {
            let per_k: Vec<f64> = TARGET_K_GRID
                .iter()
                .map(|&k| {
                    grid_pauc(run, k, NonTargetTraining::Regular5, ordering, l, cfg.far2)
                })
                .collect::<Result<_>>()?;
            rows.push(Fig6Row {
                experiment: "fig6".into(),
                ordering: ordering.to_string(),
                l,
                far2: cfg.far2,
                n_seeds: run.per_seed.len(),
                mean_pauc: mean(&per_k),
                min_pauc: per_k.iter().cloned().fold(f64::INFINITY, f64::min),
                max_pauc: per_k.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                pauc_k1: per_k[0],
                pauc_k2: per_k[1],
                pauc_k3: per_k[2],
                pauc_k4: per_k[3],
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fig7Row {
    pub experiment: String,
    pub nontarget_sampler: String,
    pub l: usize,
    pub far2: f64,
    pub n_seeds: usize,
    pub mean_pauc: f64,
    pub min_pauc: f64,
    pub max_pauc: f64,
    pub pauc_k1: f64,
    pub pauc_k2: f64,
    pub pauc_k3: f64,
    pub pauc_k4: f64,
}

/// Non-target training comparison over the L grid (DS ordering, sum of the
/// top L statistics; curves averaged over target K).
pub fn fig7_table(run: &PolicyGridRun, cfg: &BenchConfig) -> Result<Vec<Fig7Row>> {
    let mut rows = Vec::new();
    for nontarget in NonTargetTraining::ALL {
        for &l in &cfg.l_grid {
            let per_k: Vec<f64> = TARGET_K_GRID
                .iter()
                .map(|&k| grid_pauc(run, k, nontarget, TestOrdering::Ds, l, cfg.far2))
                .collect::<Result<_>>()?;
            rows.push(Fig7Row {
                experiment: "fig7".into(),
                nontarget_sampler: nontarget.name().into(),
                l,
                far2: cfg.far2,
                n_seeds: run.per_seed.len(),
                mean_pauc: mean(&per_k),
                min_pauc: per_k.iter().cloned().fold(f64::INFINITY, f64::min),
                max_pauc: per_k.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                pauc_k1: per_k[0],
                pauc_k2: per_k[1],
                pauc_k3: per_k[2],
                pauc_k4: per_k[3],
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fig8Row {
    pub experiment: String,
    pub target_k: usize,
    pub l: usize,
    pub far2: f64,
    pub n_seeds: usize,
    pub mean_pauc: f64,
}

/// Target-K comparison (non-target training: 5 regular intervals; DS
/// ordering, sum of the top L statistics).
pub fn fig8_table(run: &PolicyGridRun, cfg: &BenchConfig) -> Result<Vec<Fig8Row>> {
    let mut rows = Vec::new();
    for &k in &TARGET_K_GRID {
        for &l in &cfg.l_grid {
            rows.push(Fig8Row {
                experiment: "fig8".into(),
                target_k: k,
                l,
                far2: cfg.far2,
                n_seeds: run.per_seed.len(),
                mean_pauc: grid_pauc(
                    run,
                    k,
                    NonTargetTraining::Regular5,
                    TestOrdering::Ds,
                    l,
                    cfg.far2,
                )?,
            });
        }
    }
    Ok(rows)
}

pub fn experiment_fig6(cfg: &BenchConfig) -> Result<Vec<Fig6Row>> {
    fig6_table(&run_policy_grid(cfg)?, cfg)
}

pub fn experiment_fig7(cfg: &BenchConfig) -> Result<Vec<Fig7Row>> {
    fig7_table(&run_policy_grid(cfg)?, cfg)
}

pub fn experiment_fig8(cfg: &BenchConfig) -> Result<Vec<Fig8Row>> {
    fig8_table(&run_policy_grid(cfg)?, cfg)
}

#[cfg(test)]
pub(crate) fn tiny_bench() -> BenchConfig {
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
        l_grid: vec![1, 3],
        far2: 0.05,
        far2_list: vec![0.02, 0.05],
        ..BenchConfig::default_benchmark()
    }
}
