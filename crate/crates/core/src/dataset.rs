//! A dataset: scenes (raw + depth-normalized grids plus truth) and the
//! labeled alarms the prescreener raised on them.

use std::collections::HashMap;

use crate::alarm::{label_alarms, Alarm, GroundTruth};
use crate::bscan::BScan;
use crate::error::{Error, Result};
use crate::exec;
use crate::keypoint::depth_normalize;
use crate::synth::{prescreen, PrescreenerParams};

pub struct Scene {
    pub bscan: BScan,
    /// Depth-normalized copy; keypoints and patches are taken from this grid.
    pub dn: BScan,
    pub truth: GroundTruth,
}

pub struct Dataset {
    pub scenes: Vec<Scene>,
    pub alarms: Vec<Alarm>,
    /// Total scanned area across all scenes, the FAR denominator.
    pub total_area_m2: f64,
    index: HashMap<(u32, u32), usize>,
}

impl Dataset {
    /// Assemble a dataset from already-labeled alarms.
    pub fn new(scenes: Vec<Scene>, alarms: Vec<Alarm>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, scene) in scenes.iter().enumerate() {
            let key = (scene.bscan.lane_id(), scene.bscan.run_id());
            if index.insert(key, i).is_some() {
                return Err(Error::Config(format!(
                    "duplicate scene for lane {} run {}",
                    key.0, key.1
                )));
            }
        }
        for alarm in &alarms {
            if !index.contains_key(&(alarm.lane_id, alarm.run_id)) {
                return Err(Error::Config(format!(
                    "alarm {} references a missing scene",
                    alarm.id()
                )));
            }
        }
        let total_area_m2 = scenes.iter().map(|s| s.truth.lane_area_m2).sum();
        Ok(Self {
            scenes,
            alarms,
            total_area_m2,
            index,
        })
    }

    /// Prescreen and truth-label every scene, then assemble.
    pub fn from_scenes(
        scenes: Vec<(BScan, GroundTruth)>,
        prescreener: &PrescreenerParams,
        halo_radius_m: f64,
    ) -> Result<Self> {
        let built: Vec<Result<(Scene, Vec<Alarm>)>> = exec::map(&scenes, |(bscan, truth)| {
            let raised = prescreen(bscan, prescreener)?;
            let labeled = label_alarms(raised, truth, halo_radius_m);
            let dn = depth_normalize(bscan);
            Ok((
                Scene {
                    bscan: bscan.clone(),
                    dn,
                    truth: truth.clone(),
                },
                labeled,
            ))
        });
        let mut out_scenes = Vec::with_capacity(scenes.len());
        let mut alarms = Vec::new();
        for item in built {
            let (scene, scene_alarms) = item?;
            out_scenes.push(scene);
            alarms.extend(scene_alarms);
        }
        Self::new(out_scenes, alarms)
    }

    pub fn scene(&self, lane_id: u32, run_id: u32) -> Option<&Scene> {
        self.index.get(&(lane_id, run_id)).map(|&i| &self.scenes[i])
    }

    pub fn scene_for(&self, alarm: &Alarm) -> &Scene {
        self.scene(alarm.lane_id, alarm.run_id)
            .expect("dataset construction checked every alarm")
    }

    pub fn n_targets(&self) -> usize {
        self.alarms.iter().filter(|a| a.is_target()).count()
    }

    pub fn n_nontargets(&self) -> usize {
        self.alarms.len() - self.n_targets()
    }
}
