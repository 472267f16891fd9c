//! Alarms, ground truth, and truth matching.
//!
//! An alarm is a spatial location flagged by the prescreener. Alarms are
//! labeled against surveyed ground truth: an alarm within the halo radius
//! of a buried object (same lane, any run) is a target encounter, the rest
//! are non-targets.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Target,
    NonTarget,
}

/// Stable identifier of an alarm: (lane, run, downtrack scan index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlarmId {
    pub lane_id: u32,
    pub run_id: u32,
    pub downtrack_index: u32,
}

impl AlarmId {
    pub fn new(lane_id: u32, run_id: u32, downtrack_index: u32) -> Self {
        Self {
            lane_id,
            run_id,
            downtrack_index,
        }
    }
}

impl fmt::Display for AlarmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}R{}@{}", self.lane_id, self.run_id, self.downtrack_index)
    }
}

/// A prescreener detection at one downtrack position of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Alarm {
    pub lane_id: u32,
    pub run_id: u32,
    pub downtrack_index: usize,
    pub downtrack_position_m: f64,
    pub label: Label,
    /// Present iff `label == Target`.
    pub truth_object_id: Option<u32>,
    /// Final confidence, filled at test time.
    pub confidence: Option<f64>,
    /// Spatial cluster, filled by the evaluation module.
    pub cluster_id: Option<usize>,
}

impl Alarm {
    /// A fresh, unlabeled (non-target) alarm.
    pub fn new(lane_id: u32, run_id: u32, downtrack_index: usize, downtrack_position_m: f64) -> Self {
        Self {
            lane_id,
            run_id,
            downtrack_index,
            downtrack_position_m,
            label: Label::NonTarget,
            truth_object_id: None,
            confidence: None,
            cluster_id: None,
        }
    }

    pub fn id(&self) -> AlarmId {
        AlarmId::new(self.lane_id, self.run_id, self.downtrack_index as u32)
    }

    pub fn is_target(&self) -> bool {
        self.label == Label::Target
    }
}

/// A buried object with surveyed position and the simulation parameters
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthObject {
    pub object_id: u32,
    pub lane_id: u32,
    pub downtrack_position_m: f64,
    pub depth_time_index: usize,
    pub amplitude: f64,
}

/// Surveyed truth for one lane plus the scanned area feeding the per-m^2
/// false alarm rate denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub objects: Vec<TruthObject>,
    pub lane_area_m2: f64,
}

/// Label alarms against ground truth.
///
/// Every alarm within `halo_radius_m` downtrack distance of a truth object
/// in the same lane becomes a target linked to the nearest such object;
/// all others are non-targets. Each truth object credits at most one alarm
/// per run: the nearest one wins and other in-halo alarms linked to the
/// same object are dropped as duplicates. Ties break toward the smaller
/// object id / smaller downtrack index, so the result does not depend on
/// input order and a second pass is a no-op.
pub fn label_alarms(alarms: Vec<Alarm>, truth: &GroundTruth, halo_radius_m: f64) -> Vec<Alarm> {
    assert!(halo_radius_m > 0.0, "halo_radius_m must be positive");

    let mut labeled: Vec<Alarm> = alarms;
    for alarm in labeled.iter_mut() {
        let nearest = truth
            .objects
            .iter()
            .filter(|o| o.lane_id == alarm.lane_id)
            .map(|o| ((o.downtrack_position_m - alarm.downtrack_position_m).abs(), o))
            .filter(|(d, _)| *d <= halo_radius_m)
            .min_by(|(da, oa), (db, ob)| {
                da.partial_cmp(db)
                    .unwrap()
                    .then(oa.object_id.cmp(&ob.object_id))
            });
        match nearest {
            Some((_, object)) => {
                alarm.label = Label::Target;
                alarm.truth_object_id = Some(object.object_id);
            }
            None => {
                alarm.label = Label::NonTarget;
                alarm.truth_object_id = None;
            }
        }
    }

    // Nearest alarm per (object, run) wins; the rest are duplicates.
    let mut winner: HashMap<(u32, u32), (f64, usize, usize)> = HashMap::new();
    let positions: Vec<(f64, usize)> = labeled
        .iter()
        .enumerate()
        .map(|(i, a)| (a.downtrack_position_m, i))
        .map(|(p, i)| (p, i))
        .collect();
    for (i, alarm) in labeled.iter().enumerate() {
        let Some(object_id) = alarm.truth_object_id else {
            continue;
        };
        let object = truth
            .objects
            .iter()
            .find(|o| o.object_id == object_id)
            .expect("linked object exists");
        let dist = (object.downtrack_position_m - positions[i].0).abs();
        let key = (object_id, alarm.run_id);
        let entry = (dist, alarm.downtrack_index, i);
        winner
            .entry(key)
            .and_modify(|best| {
                if (entry.0, entry.1) < (best.0, best.1) {
                    *best = entry;
                }
            })
            .or_insert(entry);
    }
    let keep: Vec<bool> = labeled
        .iter()
        .enumerate()
        .map(|(i, a)| match a.truth_object_id {
            Some(oid) => winner[&(oid, a.run_id)].2 == i,
            None => true,
        })
        .collect();

    labeled
        .into_iter()
        .zip(keep)
        .filter_map(|(a, k)| k.then_some(a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth_at(positions: &[f64]) -> GroundTruth {
        GroundTruth {
            objects: positions
                .iter()
                .enumerate()
                .map(|(i, &p)| TruthObject {
                    object_id: i as u32,
                    lane_id: 0,
                    downtrack_position_m: p,
                    depth_time_index: 100,
                    amplitude: 5.0,
                })
                .collect(),
            lane_area_m2: 100.0,
        }
    }

    fn alarm_at(run: u32, pos: f64) -> Alarm {
        Alarm::new(0, run, (pos / 0.05).round() as usize, pos)
    }

    #[test]
    fn inside_halo_is_target_outside_is_not() {
        let truth = truth_at(&[10.1]);
        let out = label_alarms(vec![alarm_at(0, 10.0)], &truth, 0.25);
        assert_eq!(out[0].label, Label::Target);
        assert_eq!(out[0].truth_object_id, Some(0));

        let truth = truth_at(&[11.0]);
        let out = label_alarms(vec![alarm_at(0, 10.0)], &truth, 0.25);
        assert_eq!(out[0].label, Label::NonTarget);
        assert_eq!(out[0].truth_object_id, None);
    }

    #[test]
    fn nearest_alarm_wins_and_duplicate_is_dropped() {
        let truth = truth_at(&[10.0]);
        let out = label_alarms(vec![alarm_at(0, 9.9), alarm_at(0, 10.05)], &truth, 0.25);
        assert_eq!(out.len(), 1);
        assert!((out[0].downtrack_position_m - 10.05).abs() < 1e-12);
        assert_eq!(out[0].label, Label::Target);
    }

    #[test]
    fn nearest_match_agrees_with_exhaustive_pairing() {
        // Oracle: enumerate all (alarm, object) pairs, then per object+run pick
        // the closest in-halo alarm; everything else in-halo is a duplicate.
        let truth = truth_at(&[2.0, 5.0, 5.4, 9.0]);
        let positions = [1.9, 2.05, 4.8, 5.19, 5.3, 6.0, 8.9, 9.05, 9.2, 12.0];
        let halo = 0.25;
        let alarms: Vec<Alarm> = positions.iter().map(|&p| alarm_at(0, p)).collect();
        let out = label_alarms(alarms.clone(), &truth, halo);

        // Exhaustive oracle.
        let mut expected: Vec<(f64, Label)> = Vec::new();
        for &p in &positions {
            let mut best: Option<(f64, u32)> = None;
            for o in &truth.objects {
                let d = (o.downtrack_position_m - p).abs();
                if d <= halo && best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, o.object_id));
                }
            }
            match best {
                None => expected.push((p, Label::NonTarget)),
                Some((_, oid)) => {
                    // Is this alarm the closest one to that object?
                    let o = &truth.objects[oid as usize];
                    let closest = positions
                        .iter()
                        .filter(|&&q| (o.downtrack_position_m - q).abs() <= halo)
                        .cloned()
                        .min_by(|a, b| {
                            (o.downtrack_position_m - a)
                                .abs()
                                .partial_cmp(&(o.downtrack_position_m - b).abs())
                                .unwrap()
                        })
                        .unwrap();
                    if (closest - p).abs() < 1e-12 {
                        expected.push((p, Label::Target));
                    }
                    // else dropped as duplicate
                }
            }
        }
        let got: Vec<(f64, Label)> = out
            .iter()
            .map(|a| (a.downtrack_position_m, a.label))
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn labeling_is_idempotent_and_order_independent() {
        let truth = truth_at(&[3.0, 7.0]);
        let positions = [2.9, 3.1, 6.8, 7.05, 7.15, 11.0];
        let alarms: Vec<Alarm> = positions.iter().map(|&p| alarm_at(0, p)).collect();

        let once = label_alarms(alarms.clone(), &truth, 0.25);
        let twice = label_alarms(once.clone(), &truth, 0.25);
        assert_eq!(once, twice);

        let mut reversed: Vec<Alarm> = alarms;
        reversed.reverse();
        let mut relabeled = label_alarms(reversed, &truth, 0.25);
        relabeled.sort_by(|a, b| a.downtrack_index.cmp(&b.downtrack_index));
        let mut sorted_once = once;
        sorted_once.sort_by(|a, b| a.downtrack_index.cmp(&b.downtrack_index));
        assert_eq!(relabeled, sorted_once);
    }

    #[test]
    fn per_run_crediting_keeps_one_alarm_per_run() {
        let truth = truth_at(&[5.0]);
        let alarms = vec![alarm_at(0, 5.02), alarm_at(1, 4.98), alarm_at(1, 5.1)];
        let out = label_alarms(alarms, &truth, 0.25);
        assert_eq!(out.len(), 2); // one per run
        assert!(out.iter().all(|a| a.label == Label::Target));
    }
}
