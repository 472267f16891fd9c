//! Keypoint utilization strategies: which keypoints feed training, which
//! temporal locations get scored at test time, and how per-location
//! decision statistics collapse into one confidence per alarm.
//!
//! The built-in registry holds the eleven strategies of the comparison,
//! ending with PatchSelect: train on the top 4 energy keypoints per target
//! and every 4th depth index per non-target, test by summing the top 12
//! decision statistics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::alarm::Alarm;
use crate::bscan::{extract_patch, BScan, Keypoint};
use crate::classifiers::{predict_batch, Model, TrainingSet};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{extract, FeatureKind};
use crate::keypoint::{msek, sample_down_depth, sample_random, sample_regular, MsekParams};
use crate::seeds;

/// How to pick time indices for one alarm when building training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerSpec {
    /// Top-K MSEK keypoints by smoothed energy.
    TopEnergy(usize),
    /// N evenly spaced indices.
    Regular(usize),
    /// N distinct uniform indices; the per-alarm stream is derived from
    /// this base seed and the alarm identity.
    Random { n: usize, seed: u64 },
    /// Every margin-respecting time index.
    EveryPoint,
    /// Every `stride`-th margin-respecting time index.
    DownDepth { stride: usize },
}

impl fmt::Display for SamplerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerSpec::TopEnergy(k) => write!(f, "top_energy({k})"),
            SamplerSpec::Regular(n) => write!(f, "regular({n})"),
            SamplerSpec::Random { n, seed } => write!(f, "random({n},{seed})"),
            SamplerSpec::EveryPoint => write!(f, "every_point"),
            SamplerSpec::DownDepth { stride } => write!(f, "down_depth({stride})"),
        }
    }
}

impl std::str::FromStr for SamplerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse sampler {s:?}"));
        if s == "every_point" {
            return Ok(SamplerSpec::EveryPoint);
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let arg = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .and_then(|p| p.parse().ok())
                .ok_or_else(bad)
        };
        match name {
            "top_energy" => Ok(SamplerSpec::TopEnergy(arg(0)?)),
            "regular" => Ok(SamplerSpec::Regular(arg(0)?)),
            "random" => Ok(SamplerSpec::Random {
                n: arg(0)?,
                seed: if parts.len() > 1 {
                    parts[1].parse().map_err(|_| bad())?
                } else {
                    0
                },
            }),
            "down_depth" => Ok(SamplerSpec::DownDepth { stride: arg(0)? }),
            _ => Err(bad()),
        }
    }
}

/// Training side of a strategy. All registry rows use energy keypoints for
/// targets except strategy 7, whose Table row takes regular intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainPolicy {
    pub target_sampler: SamplerSpec,
    pub nontarget_sampler: SamplerSpec,
}

impl TrainPolicy {
    /// Target-side K when the target sampler is energy-based.
    pub fn target_keypoints(&self) -> Option<usize> {
        match self.target_sampler {
            SamplerSpec::TopEnergy(k) => Some(k),
            _ => None,
        }
    }
}

/// Ordering criterion for test-time keypoints: maximum energy locations
/// ("En") or the largest classifier decision statistics ("DS").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOrdering {
    En,
    Ds,
}

impl fmt::Display for TestOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestOrdering::En => "en",
            TestOrdering::Ds => "ds",
        })
    }
}

/// How the ordered decision statistics become one confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// Sum of the top L statistics (max for L = 1, total sum for L >= |D|).
    TopL(usize),
    /// Sum over every scored location.
    All,
    /// Maximum over sums of `window` consecutive depth-ordered statistics.
    SlidingSum(usize),
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::TopL(l) => write!(f, "top_l({l})"),
            Selector::All => write!(f, "all"),
            Selector::SlidingSum(w) => write!(f, "sliding_sum({w})"),
        }
    }
}

impl std::str::FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse selector {s:?}"));
        if s == "all" {
            return Ok(Selector::All);
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let arg: usize = rest
            .strip_suffix(')')
            .and_then(|a| a.trim().parse().ok())
            .ok_or_else(bad)?;
        match name {
            "top_l" => Ok(Selector::TopL(arg)),
            "sliding_sum" => Ok(Selector::SlidingSum(arg)),
            _ => Err(bad()),
        }
    }
}

/// Testing side of a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestPolicy {
    pub ordering: TestOrdering,
    pub selector: Selector,
    /// Locations scored when `ordering == Ds`: every `ds_stride`-th
    /// margin-respecting time index.
    pub ds_stride: usize,
}

pub const DEFAULT_DS_STRIDE: usize = 4;

impl TestPolicy {
    pub fn en(l: usize) -> Self {
        Self {
            ordering: TestOrdering::En,
            selector: Selector::TopL(l),
            ds_stride: DEFAULT_DS_STRIDE,
        }
    }

    pub fn ds(selector: Selector) -> Self {
        Self {
            ordering: TestOrdering::Ds,
            selector,
            ds_stride: DEFAULT_DS_STRIDE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.ordering, self.selector) {
            (TestOrdering::En, Selector::TopL(_)) => {}
            (TestOrdering::En, _) => {
                return Err(Error::Config(
                    "En ordering requires a top_l selector".into(),
                ))
            }
            (TestOrdering::Ds, _) => {}
        }
        if let Selector::TopL(0) | Selector::SlidingSum(0) = self.selector {
            return Err(Error::Config("selector parameter must be >= 1".into()));
        }
        if self.ds_stride == 0 {
            return Err(Error::Config("ds_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// One row of the strategy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub index: u8,
    pub name: String,
    pub train: TrainPolicy,
    pub test: TestPolicy,
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} | train tgt={} non={} | test {} {} stride={}",
            self.index,
            self.name,
            self.train.target_sampler,
            self.train.nontarget_sampler,
            self.test.ordering,
            self.test.selector,
            self.test.ds_stride
        )
    }
}

fn spec(
    index: u8,
    name: &str,
    target: SamplerSpec,
    nontarget: SamplerSpec,
    test: TestPolicy,
) -> StrategySpec {
    StrategySpec {
        index,
        name: name.to_string(),
        train: TrainPolicy {
            target_sampler: target,
            nontarget_sampler: nontarget,
        },
        test,
    }
}

/// The eleven built-in utilization strategies.
pub fn registry() -> Vec<StrategySpec> {
    use SamplerSpec::*;
    use Selector::*;
    vec![
        spec(1, "top3_top3_ds_top3", TopEnergy(3), TopEnergy(3), TestPolicy::ds(TopL(3))),
        spec(2, "top2_top2_en_top2", TopEnergy(2), TopEnergy(2), TestPolicy::en(2)),
        spec(3, "top1_reg5_ds_top3", TopEnergy(1), Regular(5), TestPolicy::ds(TopL(3))),
        spec(
            4,
            "top1_rand5_ds_all",
            TopEnergy(1),
            Random { n: 5, seed: 0 },
            TestPolicy::ds(All),
        ),
        spec(5, "top1_top1_ds_top12", TopEnergy(1), TopEnergy(1), TestPolicy::ds(TopL(12))),
        spec(6, "top1_top1_ds_top1", TopEnergy(1), TopEnergy(1), TestPolicy::ds(TopL(1))),
        spec(
            7,
            "reg5_rand5_ds_all",
            Regular(5),
            Random { n: 5, seed: 0 },
            TestPolicy::ds(All),
        ),
        spec(8, "top3_top3_en_top1", TopEnergy(3), TopEnergy(3), TestPolicy::en(1)),
        spec(
            9,
            "top1_top1_ds_slide7",
            TopEnergy(1),
            TopEnergy(1),
            TestPolicy::ds(SlidingSum(7)),
        ),
        spec(10, "top1_top1_en_top1", TopEnergy(1), TopEnergy(1), TestPolicy::en(1)),
        spec(
            11,
            "patchselect",
            TopEnergy(4),
            DownDepth { stride: 4 },
            TestPolicy::ds(TopL(12)),
        ),
    ]
}

/// Look up a registry strategy by its 1-based index.
pub fn registry_strategy(index: u8) -> Result<StrategySpec> {
    registry()
        .into_iter()
        .find(|s| s.index == index)
        .ok_or_else(|| Error::Config(format!("no registry strategy with index {index}")))
}

/// Sort descending and sum the first `min(l, |d|)` entries (Eq.-(1) family:
/// max for l = 1, plain sum once l reaches |d|).
pub fn aggregate(d: &[f64], l: usize) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptyInput);
    }
    assert!(l >= 1, "l must be >= 1");
    let mut sorted = d.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted.iter().take(l).sum())
}

/// Time indices (as keypoints) a sampler selects for one alarm's central
/// A-scan. For the `Random` sampler, the stream is derived from the base
/// seed and the alarm identity so different alarms draw different indices.
pub fn training_keypoints(
    sampler: &SamplerSpec,
    dn: &BScan,
    alarm: &Alarm,
    msek_params: &MsekParams,
) -> Result<Vec<Keypoint>> {
    let t_len = dn.t_len();
    let margin = msek_params.margin;
    let x0 = alarm.downtrack_index;
    let as_keypoints = |ts: Vec<usize>| {
        ts.into_iter()
            .map(|t| Keypoint::new(x0, t, 0.0))
            .collect::<Vec<_>>()
    };
    match sampler {
        SamplerSpec::TopEnergy(k) => Ok(msek(dn, x0, &msek_params.with_max_keypoints(*k))),
        SamplerSpec::Regular(n) => Ok(as_keypoints(sample_regular(t_len, *n, margin)?)),
        SamplerSpec::Random { n, seed } => {
            let stream = seeds::derive(
                *seed,
                &[
                    alarm.lane_id as u64,
                    alarm.run_id as u64,
                    alarm.downtrack_index as u64,
                ],
            );
            Ok(as_keypoints(sample_random(t_len, *n, margin, stream)?))
        }
        SamplerSpec::EveryPoint => Ok(as_keypoints(sample_down_depth(t_len, 1, margin))),
        SamplerSpec::DownDepth { stride } => {
            Ok(as_keypoints(sample_down_depth(t_len, *stride, margin)))
        }
    }
}

/// Build the training set a strategy prescribes: per target alarm, patches
/// at its target-sampler keypoints labeled +1; per non-target alarm,
/// patches at its non-target-sampler keypoints labeled -1. Patches come
/// from the depth-normalized grid.
pub fn build_training_set(
    strategy: &StrategySpec,
    alarms: &[Alarm],
    data: &Dataset,
    kind: FeatureKind,
    msek_params: &MsekParams,
) -> Result<TrainingSet> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut provenance = Vec::new();
    for alarm in alarms {
        let scene = data.scene_for(alarm);
        let sampler = if alarm.is_target() {
            &strategy.train.target_sampler
        } else {
            &strategy.train.nontarget_sampler
        };
        let label: i8 = if alarm.is_target() { 1 } else { -1 };
        for kp in training_keypoints(sampler, &scene.dn, alarm, msek_params)? {
            let patch = extract_patch(&scene.dn, &kp)?;
            features.push(extract(kind, &patch));
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

/// Confidence from energy-ordered statistics: the classifier output at the
/// top-L energy keypoints, combined by max.
pub fn combine_en(stats_by_energy: &[f64], l: usize) -> Result<f64> {
    if stats_by_energy.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(stats_by_energy
        .iter()
        .take(l.max(1))
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Confidence from depth-ordered statistics under a DS selector.
pub fn combine_ds(stats_by_depth: &[f64], selector: Selector) -> Result<f64> {
    if stats_by_depth.is_empty() {
        return Err(Error::EmptyInput);
    }
    match selector {
        Selector::TopL(l) => aggregate(stats_by_depth, l),
        Selector::All => aggregate(stats_by_depth, stats_by_depth.len()),
        Selector::SlidingSum(w) => {
            if stats_by_depth.len() <= w {
                return Ok(stats_by_depth.iter().sum());
            }
            Ok(stats_by_depth
                .windows(w)
                .map(|win| win.iter().sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max))
        }
    }
}

/// Score one alarm under a strategy's test policy.
///
/// En: evaluate the model at the alarm's top-L MSEK keypoints and take the
/// max. DS: evaluate at every `ds_stride`-th margin-respecting time index
/// of the central A-scan (depth order) and apply the selector.
pub fn score_alarm(
    strategy: &StrategySpec,
    model: &Model,
    kind: FeatureKind,
    data: &Dataset,
    alarm: &Alarm,
    msek_params: &MsekParams,
) -> Result<f64> {
    let scene = data.scene_for(alarm);
    match strategy.test.ordering {
        TestOrdering::En => {
            let l = match strategy.test.selector {
                Selector::TopL(l) => l,
                _ => return Err(Error::Config("En ordering requires top_l".into())),
            };
            let kps = msek(
                &scene.dn,
                alarm.downtrack_index,
                &msek_params.with_max_keypoints(l),
            );
            let stats = statistics_at(model, kind, &scene.dn, &kps)?;
            combine_en(&stats, l)
        }
        TestOrdering::Ds => {
            let ts = sample_down_depth(
                scene.dn.t_len(),
                strategy.test.ds_stride,
                msek_params.margin,
            );
            let kps: Vec<Keypoint> = ts
                .into_iter()
                .map(|t| Keypoint::new(alarm.downtrack_index, t, 0.0))
                .collect();
            let stats = statistics_at(model, kind, &scene.dn, &kps)?;
            combine_ds(&stats, strategy.test.selector)
        }
    }
}

/// Classifier outputs at a list of keypoints, in the given order.
pub fn statistics_at(
    model: &Model,
    kind: FeatureKind,
    dn: &BScan,
    keypoints: &[Keypoint],
) -> Result<Vec<f64>> {
    let mut feats = Vec::with_capacity(keypoints.len());
    for kp in keypoints {
        let patch = extract_patch(dn, kp)?;
        feats.push(extract(kind, &patch));
    }
    if feats.is_empty() {
        return Err(Error::EmptyInput);
    }
    predict_batch(model, &feats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_matches_the_table() {
        let reg = registry();
        assert_eq!(reg.len(), 11);
        for (i, s) in reg.iter().enumerate() {
            assert_eq!(s.index as usize, i + 1);
            s.test.validate().unwrap();
        }
        let ps = &reg[10];
        assert_eq!(ps.name, "patchselect");
        assert_eq!(ps.train.target_sampler, SamplerSpec::TopEnergy(4));
        assert_eq!(ps.train.nontarget_sampler, SamplerSpec::DownDepth { stride: 4 });
        assert_eq!(ps.test.ordering, TestOrdering::Ds);
        assert_eq!(ps.test.selector, Selector::TopL(12));
        assert_eq!(reg[8].test.selector, Selector::SlidingSum(7));
        assert_eq!(reg[8].test.ordering, TestOrdering::Ds);
    }

    #[test]
    fn aggregate_covers_the_parametrized_family() {
        let d = [0.2, 0.9, 0.5];
        assert_eq!(aggregate(&d, 1).unwrap(), 0.9);
        assert!((aggregate(&d, 3).unwrap() - 1.6).abs() < 1e-15);
        assert!((aggregate(&d, 10).unwrap() - 1.6).abs() < 1e-15); // saturates
        // sum of top 3 = 3 * mean of top 3
        let top3 = aggregate(&d, 3).unwrap();
        let mean3 = top3 / 3.0;
        assert!((top3 - 3.0 * mean3).abs() < 1e-15);
        assert!(matches!(aggregate(&[], 1), Err(Error::EmptyInput)));
    }

    #[test]
    fn sliding_sum_matches_brute_force_windows() {
        let stats = [0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0];
        let got = combine_ds(&stats, Selector::SlidingSum(7)).unwrap();
        // Brute-force oracle over all 7-windows.
        let mut best = f64::NEG_INFINITY;
        for start in 0..=stats.len() - 7 {
            best = best.max(stats[start..start + 7].iter().sum());
        }
        assert_eq!(got, best);
        assert_eq!(got, 7.0);

        // Shorter than the window: plain sum.
        let short = [0.25, 0.5];
        assert_eq!(combine_ds(&short, Selector::SlidingSum(7)).unwrap(), 0.75);
    }

    #[test]
    fn test_policy_validation() {
        assert!(TestPolicy::en(2).validate().is_ok());
        let bad = TestPolicy {
            ordering: TestOrdering::En,
            selector: Selector::All,
            ds_stride: 4,
        };
        assert!(bad.validate().is_err());
        let bad = TestPolicy {
            ordering: TestOrdering::En,
            selector: Selector::SlidingSum(7),
            ds_stride: 4,
        };
        assert!(bad.validate().is_err());
        assert!(TestPolicy::ds(Selector::SlidingSum(7)).validate().is_ok());
    }

    #[test]
    fn canonical_text_round_trips() {
        for s in registry() {
            let tgt: SamplerSpec = s.train.target_sampler.to_string().parse().unwrap();
            assert_eq!(tgt, s.train.target_sampler);
            let non: SamplerSpec = s.train.nontarget_sampler.to_string().parse().unwrap();
            assert_eq!(non, s.train.nontarget_sampler);
            let sel: Selector = s.test.selector.to_string().parse().unwrap();
            assert_eq!(sel, s.test.selector);
        }
        assert!("top_energy".parse::<SamplerSpec>().is_err());
        assert!("top_l(x)".parse::<Selector>().is_err());
    }
}
