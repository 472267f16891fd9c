//! Synthetic B-scan generation and the energy-anomaly prescreener.
//!
//! Scenes are built from the visible phenomenology of real radargrams:
//! white background noise, a bright horizontal ground-bounce band near the
//! top, an overall gain envelope decaying with time, and hyperbolic target
//! responses. A buried object at apex `(x0, t0)` contributes, along each
//! nearby column `x`, a Ricker wavelet centered at
//! `t(x) = sqrt(t0^2 + ((x - x0)/spread)^2)` with amplitude tapering in
//! `|x - x0|`; targets may carry one or two weaker echo lobes below the
//! apex so signatures can span several independent depth regions. Clutter
//! objects use the same model at lower amplitude, a flatter hyperbola, and
//! no echoes, and get no truth entry.
//!
//! Determinism: the object layout of a lane is a pure function of
//! `(seed, lane_id)` and the noise/jitter of a run is a pure function of
//! `(seed, lane_id, run_id)`, so re-scanning a lane keeps its buried
//! objects in place while the noise changes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::alarm::{Alarm, GroundTruth, TruthObject};
use crate::bscan::BScan;
use crate::error::{Error, Result};
use crate::keypoint::{depth_normalize, local_maxima};
use crate::seeds;

/// Width of the simulated lane in meters (the FAR area denominator is
/// `x_len * downtrack_spacing_m * LANE_WIDTH_M`).
pub const LANE_WIDTH_M: f64 = 1.0;

/// Ground-bounce band: center row, wavelet width, and amplitude.
const BOUNCE_ROW: f64 = 20.0;
const BOUNCE_WIDTH: f64 = 4.0;
const BOUNCE_AMP: f64 = 6.0;

/// Objects keep this many meters clear of the lane ends.
const PLACEMENT_MARGIN_M: f64 = 3.0;
/// Minimum downtrack separation between placed objects.
const MIN_OBJECT_SEPARATION_M: f64 = 2.0;

/// Cross-range extent of a response: Gaussian taper sigma in columns.
const LIMB_SIGMA_COLS: f64 = 5.0;
/// Columns rendered on each side of an apex.
const LIMB_EXTENT_COLS: isize = 15;
/// Clutter hyperbolae are flatter by this factor.
const CLUTTER_SPREAD_FACTOR: f64 = 2.0;
/// Clutter wavelets are vertically fatter by this factor.
const CLUTTER_WAVELET_FACTOR: f64 = 1.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Time samples per A-scan. 342 makes the stride-4 down-depth grid
    /// exactly 82 indices.
    pub t_len: usize,
    /// A-scans per run.
    pub x_len: usize,
    pub downtrack_spacing_m: f64,
    pub n_targets: usize,
    pub n_clutter: usize,
    pub noise_sigma: f64,
    /// Gain envelope exp(-alpha * t) applied to the whole scene.
    pub attenuation_alpha: f64,
    /// Hyperbola steepness: columns per time sample at the asymptote.
    pub hyperbola_spread: f64,
    /// Ricker wavelet width in time samples.
    pub wavelet_width: usize,
    pub target_amplitude_min: f64,
    pub target_amplitude_max: f64,
    pub clutter_amplitude_min: f64,
    pub clutter_amplitude_max: f64,
    /// Soil-heterogeneity speckle blobs per A-scan column.
    pub speckle_density: f64,
    pub seed: u64,
    pub lane_id: u32,
    pub run_id: u32,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            t_len: 342,
            x_len: 2000,
            downtrack_spacing_m: 0.05,
            n_targets: 13,
            n_clutter: 5,
            noise_sigma: 1.0,
            attenuation_alpha: 0.006,
            hyperbola_spread: 0.12,
            wavelet_width: 6,
            target_amplitude_min: 7.5,
            target_amplitude_max: 9.0,
            clutter_amplitude_min: 3.0,
            clutter_amplitude_max: 5.5,
            speckle_density: 0.45,
            seed: 0,
            lane_id: 0,
            run_id: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_len < 50 {
            return Err(Error::Config("t_len must be >= 50".into()));
        }
        if self.x_len < 18 {
            return Err(Error::Config("x_len must be >= 18".into()));
        }
        if !(self.noise_sigma > 0.0) {
            return Err(Error::Config("noise_sigma must be positive".into()));
        }
        if !(self.downtrack_spacing_m > 0.0) {
            return Err(Error::Config("downtrack_spacing_m must be positive".into()));
        }
        if !(self.hyperbola_spread > 0.0) {
            return Err(Error::Config("hyperbola_spread must be positive".into()));
        }
        if self.wavelet_width == 0 {
            return Err(Error::Config("wavelet_width must be >= 1".into()));
        }
        if self.target_amplitude_min > self.target_amplitude_max
            || self.clutter_amplitude_min > self.clutter_amplitude_max
        {
            return Err(Error::Config("amplitude ranges must be non-empty".into()));
        }
        if self.speckle_density < 0.0 {
            return Err(Error::Config("speckle_density must be >= 0".into()));
        }
        let n_objects = self.n_targets + self.n_clutter;
        if n_objects > 0 {
            let margin_cols = (PLACEMENT_MARGIN_M / self.downtrack_spacing_m).ceil() as usize;
            let sep_cols = (MIN_OBJECT_SEPARATION_M / self.downtrack_spacing_m).ceil() as usize;
            let usable = self.x_len.saturating_sub(2 * margin_cols);
            if usable / n_objects < sep_cols {
                return Err(Error::Config(format!(
                    "lane too short for {n_objects} objects: {usable} usable columns,                      need {} per object",
                    sep_cols
                )));
            }
        }
        Ok(())
    }

    pub fn lane_area_m2(&self) -> f64 {
        self.x_len as f64 * self.downtrack_spacing_m * LANE_WIDTH_M
    }
}

/// Ricker wavelet `(1 - 2u^2) exp(-u^2)`: unit central lobe with negative
/// side lobes.
fn ricker(u: f64) -> f64 {
    (1.0 - 2.0 * u * u) * (-u * u).exp()
}

struct PlacedObject {
    x0: usize,
    t0: usize,
    amplitude: f64,
    spread: f64,
    /// Wavelet width multiplier (clutter blobs are fatter).
    wavelet_scale: f64,
    /// (offset rows below the apex, relative amplitude) per echo lobe.
    echoes: Vec<(f64, f64)>,
    is_target: bool,
}

struct Speckle {
    x0: usize,
    t0: usize,
    amplitude: f64,
    width: f64,
    taper_sigma: f64,
    /// Dip of the structure in time samples per column.
    slope: f64,
    /// Stacked alternating-sign lobes (1 = single lens).
    cycles: u32,
}

/// Persistent soil-texture speckle for one lane: small scattered blobs that
/// give the background depth-varying structure.
fn draw_speckle(cfg: &SceneConfig) -> Vec<Speckle> {
    let n = (cfg.x_len as f64 * cfg.speckle_density).round() as usize;
    if n == 0 || cfg.x_len < 2 || cfg.t_len < 20 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, &[4, cfg.lane_id as u64]));
    // A zoo of dim-to-moderate, short, dipping, optionally layered strata
    // lenses with real shape variety. They rarely top a column's energy
    // ranking (buried objects do), but their brightness rivals the weaker
    // echo lobes of targets, so they are what actually confuses a patch
    // classifier and covering them densely in training pays off.
    (0..n)
        .map(|_| Speckle {
            x0: rng.gen_range(0..cfg.x_len),
            t0: rng.gen_range(9..cfg.t_len - 9),
            amplitude: rng.gen_range(2.5..4.6)
                * if rng.gen_range(0..=1u32) == 1 { 1.0 } else { -1.0 },
            width: cfg.wavelet_width as f64 * rng.gen_range(0.3..0.6),
            taper_sigma: rng.gen_range(2.5..7.0),
            slope: rng.gen_range(-2.0..2.0),
            cycles: rng.gen_range(1..=4),
        })
        .collect()
}

/// Draw the persistent object layout of one lane: jittered slot placement
/// (one object per slot keeps the minimum separation by construction),
/// with target/clutter roles shuffled across slots.
fn draw_layout(cfg: &SceneConfig) -> Vec<PlacedObject> {
    let n_objects = cfg.n_targets + cfg.n_clutter;
    if n_objects == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, &[1, cfg.lane_id as u64]));
    let margin_cols = (PLACEMENT_MARGIN_M / cfg.downtrack_spacing_m).ceil() as usize;
    let sep_cols = (MIN_OBJECT_SEPARATION_M / cfg.downtrack_spacing_m).ceil() as usize;
    let usable = cfg.x_len - 2 * margin_cols;
    let slot = usable / n_objects;
    assert!(slot >= sep_cols, "config validation guarantees room");
    let depth_lo = (BOUNCE_ROW + 6.0 * cfg.wavelet_width as f64).ceil() as usize;
    let depth_hi = cfg.t_len * 3 / 4;

    let positions: Vec<usize> = (0..n_objects)
        .map(|i| margin_cols + i * slot + rng.gen_range(0..=slot - sep_cols))
        .collect();
    let mut roles: Vec<bool> = (0..n_objects).map(|i| i < cfg.n_targets).collect();
    roles.shuffle(&mut rng);

    let mut objects = Vec::new();
    for (x0, is_target) in positions.into_iter().zip(roles) {
        let t0 = rng.gen_range(depth_lo..depth_hi);
        if is_target {
            let amplitude = rng.gen_range(cfg.target_amplitude_min..=cfg.target_amplitude_max);
            let n_echoes = if rng.gen_range(0..10u32) < 7 { 3 } else { 2 };
            let mut echoes = Vec::new();
            let mut offset = 0.0;
            let mut level = 1.0;
            for _ in 0..n_echoes {
                offset += rng.gen_range(2.2..3.2) * cfg.wavelet_width as f64;
                level *= rng.gen_range(0.55..0.85);
                echoes.push((offset, level));
            }
            objects.push(PlacedObject {
                x0,
                t0,
                amplitude,
                spread: cfg.hyperbola_spread,
                wavelet_scale: 1.0,
                echoes,
                is_target: true,
            });
        } else {
            let amplitude = rng.gen_range(cfg.clutter_amplitude_min..=cfg.clutter_amplitude_max);
            let n_echoes = rng.gen_range(1..=2u32);
            let mut echoes = Vec::new();
            let mut offset = 0.0;
            let mut level = 1.0;
            for _ in 0..n_echoes {
                offset +=
                    rng.gen_range(2.2..3.2) * cfg.wavelet_width as f64 * CLUTTER_WAVELET_FACTOR;
                level *= rng.gen_range(0.55..0.85);
                echoes.push((offset, level));
            }
            objects.push(PlacedObject {
                x0,
                t0,
                amplitude,
                spread: cfg.hyperbola_spread * CLUTTER_SPREAD_FACTOR,
                wavelet_scale: CLUTTER_WAVELET_FACTOR,
                echoes,
                is_target: false,
            });
        }
    }
    objects
}

/// Generate one labeled synthetic B-scan. Deterministic for a given config;
/// samples are quantized to `f32` so the binary container round-trips
/// bit-exactly.
pub fn generate_scene(cfg: &SceneConfig) -> Result<(BScan, GroundTruth)> {
    cfg.validate()?;
    let (t_len, x_len) = (cfg.t_len, cfg.x_len);
    let mut field = vec![0.0_f64; t_len * x_len];

    // Background noise, per-run stream.
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seeds::derive(
        cfg.seed,
        &[2, cfg.lane_id as u64, cfg.run_id as u64],
    ));
    for v in field.iter_mut() {
        let n: f64 = noise_rng.sample(StandardNormal);
        *v = cfg.noise_sigma * n;
    }

    // Ground bounce: identical across columns, so depth normalization
    // removes it.
    for t in 0..t_len {
        let b = BOUNCE_AMP * ricker((t as f64 - BOUNCE_ROW) / BOUNCE_WIDTH);
        if b.abs() > 1e-12 {
            let row = &mut field[t * x_len..(t + 1) * x_len];
            for v in row.iter_mut() {
                *v += b;
            }
        }
    }

    // Buried objects: persistent per-lane layout, per-run amplitude jitter.
    let objects = draw_layout(cfg);
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(seeds::derive(
        cfg.seed,
        &[3, cfg.lane_id as u64, cfg.run_id as u64],
    ));
    for object in &objects {
        let amp = object.amplitude * jitter_rng.gen_range(0.9..1.1);
        let width = cfg.wavelet_width as f64 * object.wavelet_scale;
        render_response(&mut field, t_len, x_len, object, amp, width);
    }

    // Soil texture: persistent strata lenses, lightly jittered per run.
    for speckle in &draw_speckle(cfg) {
        let amp = speckle.amplitude * jitter_rng.gen_range(0.9..1.1);
        let reach_t = (3.0 * speckle.width).ceil() as isize;
        let reach_x = (2.5 * speckle.taper_sigma).ceil() as isize;
        for dx in -reach_x..=reach_x {
            let x = speckle.x0 as isize + dx;
            if x < 0 || x >= x_len as isize {
                continue;
            }
            let taper =
                (-0.5 * (dx as f64 / speckle.taper_sigma) * (dx as f64 / speckle.taper_sigma))
                    .exp();
            let dip = speckle.t0 as f64 + speckle.slope * dx as f64;
            for cycle in 0..speckle.cycles {
                let center = dip + cycle as f64 * 2.2 * speckle.width;
                let level = amp * (-0.7_f64).powi(cycle as i32);
                let t_lo = (center as isize - reach_t).max(0);
                let t_hi = (center as isize + reach_t).min(t_len as isize - 1);
                for t in t_lo..=t_hi {
                    field[t as usize * x_len + x as usize] +=
                        level * taper * ricker((t as f64 - center) / speckle.width);
                }
            }
        }
    }

    // Gain envelope, then f32 quantization.
    for t in 0..t_len {
        let gain = (-cfg.attenuation_alpha * t as f64).exp();
        let row = &mut field[t * x_len..(t + 1) * x_len];
        for v in row.iter_mut() {
            *v = (*v * gain) as f32 as f64;
        }
    }

    let bscan = BScan::new(
        field,
        t_len,
        x_len,
        cfg.downtrack_spacing_m,
        cfg.lane_id,
        cfg.run_id,
    )?;
    let truth = GroundTruth {
        objects: objects
            .iter()
            .filter(|o| o.is_target)
            .enumerate()
            .map(|(k, o)| TruthObject {
                object_id: cfg.lane_id * 10_000 + k as u32,
                lane_id: cfg.lane_id,
                downtrack_position_m: o.x0 as f64 * cfg.downtrack_spacing_m,
                depth_time_index: o.t0,
                amplitude: o.amplitude,
            })
            .collect(),
        lane_area_m2: cfg.lane_area_m2(),
    };
    Ok((bscan, truth))
}

fn render_response(
    field: &mut [f64],
    t_len: usize,
    x_len: usize,
    object: &PlacedObject,
    amp: f64,
    wavelet_width: f64,
) {
    let x0 = object.x0 as isize;
    let t0 = object.t0 as f64;
    let reach = (4.0 * wavelet_width).ceil() as isize;
    for dx in -LIMB_EXTENT_COLS..=LIMB_EXTENT_COLS {
        let x = x0 + dx;
        if x < 0 || x >= x_len as isize {
            continue;
        }
        let dxf = dx as f64;
        let apex_t = (t0 * t0 + (dxf / object.spread) * (dxf / object.spread)).sqrt();
        let taper = (-0.5 * (dxf / LIMB_SIGMA_COLS) * (dxf / LIMB_SIGMA_COLS)).exp();
        let mut lobes: Vec<(f64, f64)> = vec![(apex_t, amp * taper)];
        for &(offset, level) in &object.echoes {
            lobes.push((apex_t + offset, amp * level * taper));
        }
        for (center, lobe_amp) in lobes {
            let t_lo = ((center as isize) - reach).max(0);
            let t_hi = ((center as isize) + reach).min(t_len as isize - 1);
            for t in t_lo..=t_hi {
                let u = (t as f64 - center) / wavelet_width;
                field[t as usize * x_len + x as usize] += lobe_amp * ricker(u);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Prescreener
// ---------------------------------------------------------------------------

/// Energy-anomaly prescreener parameters. Column energy is standardized
/// against a trailing window of `background_window` columns, separated
/// from the column under test by `guard` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrescreenerParams {
    /// Detection threshold in standardized-energy units.
    pub threshold: f64,
    pub background_window: usize,
    pub guard: usize,
    /// Non-maximum suppression radius in meters.
    pub min_separation_m: f64,
}

impl Default for PrescreenerParams {
    fn default() -> Self {
        Self {
            threshold: 4.1,
            background_window: 40,
            guard: 8,
            min_separation_m: 1.0,
        }
    }
}

impl PrescreenerParams {
    pub fn validate(&self) -> Result<()> {
        if self.background_window <= self.guard {
            return Err(Error::Config(
                "background_window must exceed guard".into(),
            ));
        }
        if !(self.min_separation_m > 0.0) {
            return Err(Error::Config("min_separation_m must be positive".into()));
        }
        Ok(())
    }
}

/// Flag columns whose depth-normalized energy stands out against the
/// trailing background. Emits one alarm per surviving local maximum of the
/// standardized score above `threshold`; maxima within `min_separation_m`
/// of a stronger one are suppressed (ties keep the smaller index).
pub fn prescreen(bscan: &BScan, params: &PrescreenerParams) -> Result<Vec<Alarm>> {
    params.validate()?;
    let x_len = bscan.x_len();
    let lead = params.background_window + params.guard;
    if x_len <= lead {
        return Err(Error::Config(format!(
            "need more than background_window + guard = {lead} columns, got {x_len}"
        )));
    }

    let dn = depth_normalize(bscan);
    let mut energy = vec![0.0_f64; x_len];
    for t in 0..dn.t_len() {
        for (e, &v) in energy.iter_mut().zip(dn.row(t)) {
            *e += v * v;
        }
    }

    // Standardize against the trailing window via prefix sums.
    let mut prefix = vec![0.0_f64; x_len + 1];
    let mut prefix_sq = vec![0.0_f64; x_len + 1];
    for (x, &e) in energy.iter().enumerate() {
        prefix[x + 1] = prefix[x] + e;
        prefix_sq[x + 1] = prefix_sq[x] + e * e;
    }
    // Alarms must admit an 18-wide patch window, so columns within the
    // patch margin of either lane edge are never flagged.
    let w = params.background_window as f64;
    let mut score = vec![f64::NEG_INFINITY; x_len];
    let hi = x_len - crate::bscan::PATCH_MARGIN;
    for x in lead.max(crate::bscan::PATCH_MARGIN)..hi.max(lead) {
        let hi = x - params.guard;
        let lo = hi - params.background_window;
        let mean = (prefix[hi] - prefix[lo]) / w;
        let var = ((prefix_sq[hi] - prefix_sq[lo]) / w - mean * mean).max(0.0);
        score[x] = (energy[x] - mean) / (var.sqrt() + 1e-12);
    }

    let columns = select_alarm_columns(
        &score,
        params.threshold,
        params.min_separation_m,
        bscan.downtrack_spacing_m(),
    );
    Ok(columns
        .into_iter()
        .map(|x| Alarm::new(bscan.lane_id(), bscan.run_id(), x, bscan.position_m(x)))
        .collect())
}

/// Local maxima of `score` above `threshold`, with non-maximum suppression
/// over `min_separation_m`; returns surviving columns sorted by index.
pub(crate) fn select_alarm_columns(
    score: &[f64],
    threshold: f64,
    min_separation_m: f64,
    spacing_m: f64,
) -> Vec<usize> {
    let mut candidates: Vec<usize> = local_maxima(score)
        .into_iter()
        .filter(|&x| score[x] > threshold)
        .collect();
    // Strongest first, ties keep the smaller index.
    candidates.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for x in candidates {
        let clear = kept
            .iter()
            .all(|&k| (k.abs_diff(x)) as f64 * spacing_m > min_separation_m);
        if clear {
            kept.push(x);
        }
    }
    kept.sort_unstable();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_config(seed: u64) -> SceneConfig {
        SceneConfig {
            x_len: 400,
            n_targets: 0,
            n_clutter: 0,
            speckle_density: 0.0,
            seed,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SceneConfig {
            x_len: 300,
            n_targets: 2,
            n_clutter: 2,
            seed: 9,
            ..SceneConfig::default()
        };
        let (a, _) = generate_scene(&cfg).unwrap();
        let (b, _) = generate_scene(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn near_zero_noise_leaves_bounce_times_envelope() {
        let cfg = SceneConfig {
            noise_sigma: 1e-30,
            ..quiet_config(4)
        };
        let (b, truth) = generate_scene(&cfg).unwrap();
        assert!(truth.objects.is_empty());
        for t in 0..b.t_len() {
            let gain = (-cfg.attenuation_alpha * t as f64).exp();
            let expected = (BOUNCE_AMP * ricker((t as f64 - BOUNCE_ROW) / BOUNCE_WIDTH) * gain)
                as f32 as f64;
            for x in [0, b.x_len() / 2, b.x_len() - 1] {
                assert!(
                    (b.sample(t, x) - expected).abs() < 1e-9,
                    "t={t} x={x}: {} vs {expected}",
                    b.sample(t, x)
                );
            }
        }
    }

    #[test]
    fn target_column_peaks_near_its_stated_depth() {
        let cfg = SceneConfig {
            x_len: 400,
            n_targets: 1,
            n_clutter: 0,
            seed: 12,
            ..SceneConfig::default()
        };
        let (b, truth) = generate_scene(&cfg).unwrap();
        assert_eq!(truth.objects.len(), 1);
        let obj = &truth.objects[0];
        let x0 = (obj.downtrack_position_m / cfg.downtrack_spacing_m).round() as usize;
        // Scan the generated column numerically, past the ground bounce.
        let post_bounce = (BOUNCE_ROW + 4.0 * BOUNCE_WIDTH) as usize;
        let dn = depth_normalize(&b);
        let col = dn.ascan(x0);
        let (best_t, _) = col
            .iter()
            .enumerate()
            .skip(post_bounce)
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        assert!(
            best_t.abs_diff(obj.depth_time_index) <= cfg.wavelet_width,
            "peak at {best_t}, truth depth {}",
            obj.depth_time_index
        );
    }

    #[test]
    fn layout_is_shared_across_runs_noise_is_not() {
        let run0 = SceneConfig {
            x_len: 400,
            n_targets: 3,
            n_clutter: 2,
            seed: 5,
            run_id: 0,
            ..SceneConfig::default()
        };
        let run1 = SceneConfig {
            run_id: 1,
            ..run0.clone()
        };
        let (a, truth_a) = generate_scene(&run0).unwrap();
        let (b, truth_b) = generate_scene(&run1).unwrap();
        assert_eq!(truth_a, truth_b);
        assert_ne!(a.samples(), b.samples());
    }

    #[test]
    fn pure_noise_yields_zero_alarms_at_high_threshold() {
        let params = PrescreenerParams {
            threshold: 6.0,
            ..PrescreenerParams::default()
        };
        for seed in 0..20 {
            let (b, _) = generate_scene(&quiet_config(seed)).unwrap();
            let alarms = prescreen(&b, &params).unwrap();
            assert!(alarms.is_empty(), "seed {seed}: {} alarms", alarms.len());
        }
    }

    #[test]
    fn single_strong_target_yields_exactly_one_alarm_near_it() {
        let cfg = SceneConfig {
            x_len: 600,
            n_targets: 1,
            n_clutter: 0,
            speckle_density: 0.0,
            target_amplitude_min: 7.0,
            target_amplitude_max: 8.0,
            seed: 21,
            ..SceneConfig::default()
        };
        let (b, truth) = generate_scene(&cfg).unwrap();
        let alarms = prescreen(&b, &PrescreenerParams::default()).unwrap();
        let within_halo = alarms
            .iter()
            .filter(|a| {
                (a.downtrack_position_m - truth.objects[0].downtrack_position_m).abs() <= 0.25
            })
            .count();
        assert_eq!(within_halo, 1, "{alarms:?}");
    }

    #[test]
    fn suppression_keeps_the_lower_index_on_ties() {
        // Two identical scores 0.3 m apart with 0.5 m separation: one alarm.
        let mut score = vec![0.0; 100];
        score[40] = 8.0;
        score[46] = 8.0; // 6 columns * 0.05 m = 0.3 m apart
        let cols = select_alarm_columns(&score, 5.0, 0.5, 0.05);
        assert_eq!(cols, vec![40]);

        // Far enough apart: both survive.
        let mut score = vec![0.0; 100];
        score[40] = 8.0;
        score[60] = 8.0; // 1.0 m apart
        let cols = select_alarm_columns(&score, 5.0, 0.5, 0.05);
        assert_eq!(cols, vec![40, 60]);
    }

    #[test]
    fn appending_noise_columns_beyond_the_window_keeps_alarms() {
        let cfg = SceneConfig {
            x_len: 500,
            n_targets: 2,
            n_clutter: 0,
            speckle_density: 0.0,
            target_amplitude_min: 7.0,
            target_amplitude_max: 8.0,
            seed: 33,
            ..SceneConfig::default()
        };
        let (b, _) = generate_scene(&cfg).unwrap();
        // A threshold with margin: appended noise must stay sub-threshold.
        let params = PrescreenerParams {
            threshold: 5.0,
            ..PrescreenerParams::default()
        };
        let base = prescreen(&b, &params).unwrap();
        assert!(!base.is_empty());

        // Append 120 all-noise columns on the right.
        let extra = 120;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut samples = Vec::with_capacity(b.t_len() * (b.x_len() + extra));
        for t in 0..b.t_len() {
            samples.extend_from_slice(b.row(t));
            let gain = (-cfg.attenuation_alpha * t as f64).exp();
            for _ in 0..extra {
                let n: f64 = rng.sample(StandardNormal);
                samples.push((cfg.noise_sigma * n * gain) as f32 as f64);
            }
        }
        let extended = BScan::new(
            samples,
            b.t_len(),
            b.x_len() + extra,
            b.downtrack_spacing_m(),
            b.lane_id(),
            b.run_id(),
        )
        .unwrap();
        let grown = prescreen(&extended, &params).unwrap();
        let base_cols: Vec<usize> = base.iter().map(|a| a.downtrack_index).collect();
        let grown_cols: Vec<usize> = grown.iter().map(|a| a.downtrack_index).collect();
        assert_eq!(base_cols, grown_cols);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_sigma = SceneConfig {
            noise_sigma: 0.0,
            ..SceneConfig::default()
        };
        assert!(matches!(generate_scene(&bad_sigma), Err(Error::Config(_))));
        let bad_t = SceneConfig {
            t_len: 40,
            ..SceneConfig::default()
        };
        assert!(matches!(generate_scene(&bad_t), Err(Error::Config(_))));

        let (b, _) = generate_scene(&quiet_config(1)).unwrap();
        let bad = PrescreenerParams {
            guard: 50,
            background_window: 40,
            ..PrescreenerParams::default()
        };
        assert!(matches!(prescreen(&b, &bad), Err(Error::Config(_))));
    }
}
