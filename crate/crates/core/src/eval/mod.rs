//! Spatially-clustered cross-validation and ROC / partial-AUC scoring.
//!
//! Lanes are scanned multiple times, so alarms from different runs can sit
//! on the same physical spot. To avoid training and testing on the same
//! ground, alarms within `cluster_distance_m` (same lane, any run) are
//! clustered by transitive closure and every cluster lands in exactly one
//! fold. The ROC x-axis is false alarms per square meter of scanned lane.

pub mod experiments;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alarm::{Alarm, AlarmId};
use crate::classifiers::{train, ClassifierConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::features::FeatureKind;
use crate::keypoint::MsekParams;
use crate::seeds;
use crate::strategy::{build_training_set, score_alarm, StrategySpec};

/// Cluster assignment and cluster-to-fold map.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    cluster_of: HashMap<AlarmId, usize>,
    fold_of_cluster: Vec<usize>,
    pub n_folds: usize,
    pub cluster_distance_m: f64,
}

impl FoldPlan {
    pub fn n_clusters(&self) -> usize {
        self.fold_of_cluster.len()
    }

    pub fn cluster_of(&self, alarm: &Alarm) -> Option<usize> {
        self.cluster_of.get(&alarm.id()).copied()
    }

    pub fn fold_of(&self, alarm: &Alarm) -> Option<usize> {
        self.cluster_of(alarm).map(|c| self.fold_of_cluster[c])
    }

    pub fn covers(&self, alarms: &[Alarm]) -> bool {
        alarms.iter().all(|a| self.cluster_of(a).is_some())
    }

    /// Fill each alarm's `cluster_id`.
    pub fn annotate(&self, alarms: &mut [Alarm]) {
        for alarm in alarms.iter_mut() {
            alarm.cluster_id = self.cluster_of(alarm);
        }
    }
}

/// Cluster alarms by transitive closure of "same lane, within
/// `cluster_distance_m` downtrack", then assign clusters to folds greedily
/// by descending size onto the currently smallest fold (equal-size cluster
/// order is shuffled by `seed`; equal fold loads go to the lowest index).
pub fn cluster_and_fold(
    alarms: &[Alarm],
    cluster_distance_m: f64,
    n_folds: usize,
    seed: u64,
) -> FoldPlan {
    assert!(cluster_distance_m > 0.0, "cluster_distance_m must be positive");
    assert!(n_folds >= 1, "need at least one fold");

    // Chain-link along each lane after sorting by position: the transitive
    // closure of the pairwise rule equals linking consecutive sorted alarms
    // whose gap is within the distance.
    let mut order: Vec<usize> = (0..alarms.len()).collect();
    order.sort_by(|&a, &b| {
        alarms[a]
            .lane_id
            .cmp(&alarms[b].lane_id)
            .then(alarms[a]
                .downtrack_position_m
                .total_cmp(&alarms[b].downtrack_position_m))
            .then(alarms[a].run_id.cmp(&alarms[b].run_id))
            .then(alarms[a].downtrack_index.cmp(&alarms[b].downtrack_index))
    });
    let mut cluster_of = HashMap::with_capacity(alarms.len());
    let mut sizes: Vec<usize> = Vec::new();
    let mut prev: Option<usize> = None;
    for &i in &order {
        let new_cluster = match prev {
            Some(p) => {
                alarms[p].lane_id != alarms[i].lane_id
                    || (alarms[i].downtrack_position_m - alarms[p].downtrack_position_m)
                        > cluster_distance_m
            }
            None => true,
        };
        if new_cluster {
            sizes.push(0);
        }
        let c = sizes.len() - 1;
        sizes[c] += 1;
        cluster_of.insert(alarms[i].id(), c);
        prev = Some(i);
    }

    // Seed-shuffled rank breaks ties among equal-size clusters.
    let n_clusters = sizes.len();
    let mut shuffled: Vec<usize> = (0..n_clusters).collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rank = vec![0usize; n_clusters];
    for (pos, &c) in shuffled.iter().enumerate() {
        rank[c] = pos;
    }
    let mut by_size: Vec<usize> = (0..n_clusters).collect();
    by_size.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(rank[a].cmp(&rank[b])));

    let mut load = vec![0usize; n_folds];
    let mut fold_of_cluster = vec![0usize; n_clusters];
    for c in by_size {
        let fold = (0..n_folds).min_by_key(|&f| (load[f], f)).unwrap();
        fold_of_cluster[c] = fold;
        load[fold] += sizes[c];
    }

    FoldPlan {
        cluster_of,
        fold_of_cluster,
        n_folds,
        cluster_distance_m,
    }
}

/// Pooled detection performance: operating points sorted by FAR, starting
/// at `(0, pd_at_far_0)` and ending at `pd = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false alarms per m^2, probability of detection)`.
    pub points: Vec<(f64, f64)>,
    pub total_area_m2: f64,
    pub n_targets: usize,
    pub n_nontargets: usize,
}

/// Sweep thresholds over the distinct confidence values, descending; tied
/// confidences move across the threshold as one group.
pub fn roc(confidences: &[f64], labels: &[bool], total_area_m2: f64) -> Result<RocCurve> {
    if confidences.len() != labels.len() {
        return Err(Error::Config("confidences/labels length mismatch".into()));
    }
    let n_targets = labels.iter().filter(|&&l| l).count();
    let n_nontargets = labels.len() - n_targets;
    if n_targets == 0 || n_nontargets == 0 {
        return Err(Error::DegenerateLabels);
    }
    if !(total_area_m2 > 0.0) {
        return Err(Error::Config("total_area_m2 must be positive".into()));
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]));

    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut cum_t = 0usize;
    let mut cum_n = 0usize;
    let mut i = 0;
    while i < order.len() {
        let v = confidences[order[i]];
        while i < order.len() && confidences[order[i]] == v {
            if labels[order[i]] {
                cum_t += 1;
            } else {
                cum_n += 1;
            }
            i += 1;
        }
        let far = cum_n as f64 / total_area_m2;
        let pd = cum_t as f64 / n_targets as f64;
        match points.last_mut() {
            // Groups that add no false alarms only raise pd at the same far.
            Some(last) if last.0 == far => last.1 = pd,
            _ => points.push((far, pd)),
        }
    }
    if points.first().map_or(true, |p| p.0 > 0.0) {
        points.insert(0, (0.0, 0.0));
    }

    Ok(RocCurve {
        points,
        total_area_m2,
        n_targets,
        n_nontargets,
    })
}

/// Normalized partial AUC: trapezoidal area under the curve over
/// `[0, far2]` (extended rightward at the final pd), divided by `far2`,
/// so a perfect detector scores 1.
pub fn pauc(curve: &RocCurve, far2: f64) -> f64 {
    assert!(far2 > 0.0, "far2 must be positive");
    let pts = &curve.points;
    let mut area = 0.0;
    for w in pts.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if x0 >= far2 {
            break;
        }
        let hi = x1.min(far2);
        if hi <= x0 {
            continue;
        }
        let y_hi = if x1 > x0 {
            y0 + (y1 - y0) * (hi - x0) / (x1 - x0)
        } else {
            y1
        };
        area += 0.5 * (y0 + y_hi) * (hi - x0);
    }
    if let Some(&(x_last, y_last)) = pts.last() {
        if far2 > x_last {
            area += y_last * (far2 - x_last);
        }
    }
    area / far2
}

/// Four-fold (or `plan.n_folds`-fold) clustered cross-validation: for each
/// fold, train on the other folds' alarms and score the fold's own alarms.
/// Returns pooled confidences aligned with `data.alarms`.
pub fn run_cv(
    data: &Dataset,
    strategy: &StrategySpec,
    kind: FeatureKind,
    classifier: &ClassifierConfig,
    plan: &FoldPlan,
    msek_params: &MsekParams,
) -> Result<Vec<f64>> {
    strategy.test.validate()?;
    if !plan.covers(&data.alarms) {
        return Err(Error::Config("fold plan does not cover every alarm".into()));
    }

    let mut confidences = vec![f64::NAN; data.alarms.len()];
    for fold in 0..plan.n_folds {
        let train_alarms: Vec<Alarm> = data
            .alarms
            .iter()
            .filter(|a| plan.fold_of(a) != Some(fold))
            .cloned()
            .collect();
        let test_idx: Vec<usize> = (0..data.alarms.len())
            .filter(|&i| plan.fold_of(&data.alarms[i]) == Some(fold))
            .collect();
        if test_idx.is_empty() {
            continue;
        }
        let ts = build_training_set(strategy, &train_alarms, data, kind, msek_params)?;
        let model = train(&ts, &classifier.reseeded(fold_seed(classifier, fold)))?;
        let scored: Vec<Result<f64>> = exec::map(&test_idx, |&i| {
            score_alarm(strategy, &model, kind, data, &data.alarms[i], msek_params)
        });
        for (idx, value) in test_idx.into_iter().zip(scored) {
            confidences[idx] = value?;
        }
    }
    Ok(confidences)
}

fn fold_seed(classifier: &ClassifierConfig, fold: usize) -> u64 {
    let base = match classifier {
        ClassifierConfig::Svm(_) => 0,
        ClassifierConfig::Forest(cfg) => cfg.seed,
    };
    seeds::derive(base, &[0xf01d, fold as u64])
}

/// Per-fold normalized pAUCs from pooled confidences. Every fold's FAR uses
/// the full dataset area so operating points stay comparable across folds.
pub fn per_fold_paucs(
    data: &Dataset,
    plan: &FoldPlan,
    confidences: &[f64],
    far2: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(plan.n_folds);
    for fold in 0..plan.n_folds {
        let idx: Vec<usize> = (0..data.alarms.len())
            .filter(|&i| plan.fold_of(&data.alarms[i]) == Some(fold))
            .collect();
        let conf: Vec<f64> = idx.iter().map(|&i| confidences[i]).collect();
        let labels: Vec<bool> = idx.iter().map(|&i| data.alarms[i].is_target()).collect();
        let curve = roc(&conf, &labels, data.total_area_m2)?;
        out.push(pauc(&curve, far2));
    }
    Ok(out)
}
