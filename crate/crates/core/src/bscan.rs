//! B-scan grid, keypoints, and patch extraction.
//!
//! A B-scan is the image formed by concatenating consecutive A-scans: the
//! row axis is time (a depth proxy), the column axis is downtrack
//! position. Classifier inputs are 18x18 patches cut from the grid around
//! keypoints and min-max rescaled to [-1, 1].

use crate::alarm::AlarmId;
use crate::error::{Error, Result};

/// Side length of classifier patches, in pixels.
pub const PATCH_SIZE: usize = 18;
/// Rows/columns a keypoint owns above/left of itself; `PATCH_SIZE - PATCH_MARGIN - 1` below/right.
pub const PATCH_MARGIN: usize = 9;

/// One run of GPR data over one lane: a `t_len x x_len` amplitude grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BScan {
    samples: Vec<f64>, // row-major, [time][downtrack]
    t_len: usize,
    x_len: usize,
    downtrack_spacing_m: f64,
    lane_id: u32,
    run_id: u32,
}

impl BScan {
    /// Build a B-scan from a row-major (time-major) sample buffer.
    ///
    /// Requires `t_len >= 18`, `x_len >= 18` (the minimum patch window),
    /// finite samples, and a positive downtrack spacing.
    pub fn new(
        samples: Vec<f64>,
        t_len: usize,
        x_len: usize,
        downtrack_spacing_m: f64,
        lane_id: u32,
        run_id: u32,
    ) -> Result<Self> {
        if t_len < PATCH_SIZE || x_len < PATCH_SIZE {
            return Err(Error::Config(format!(
                "B-scan must be at least {PATCH_SIZE}x{PATCH_SIZE}, got {t_len}x{x_len}"
            )));
        }
        if samples.len() != t_len * x_len {
            return Err(Error::Config(format!(
                "sample buffer holds {} values, expected {}",
                samples.len(),
                t_len * x_len
            )));
        }
        if !(downtrack_spacing_m > 0.0) {
            return Err(Error::Config(
                "downtrack_spacing_m must be positive".into(),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("B-scan samples must be finite".into()));
        }
        Ok(Self {
            samples,
            t_len,
            x_len,
            downtrack_spacing_m,
            lane_id,
            run_id,
        })
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn x_len(&self) -> usize {
        self.x_len
    }

    pub fn downtrack_spacing_m(&self) -> f64 {
        self.downtrack_spacing_m
    }

    pub fn lane_id(&self) -> u32 {
        self.lane_id
    }

    pub fn run_id(&self) -> u32 {
        self.run_id
    }

    #[inline]
    pub fn sample(&self, time_index: usize, downtrack_index: usize) -> f64 {
        self.samples[time_index * self.x_len + downtrack_index]
    }

    /// One time row across all downtrack positions.
    #[inline]
    pub fn row(&self, time_index: usize) -> &[f64] {
        &self.samples[time_index * self.x_len..(time_index + 1) * self.x_len]
    }

    /// The A-scan (time series) at one downtrack position, copied out of the grid.
    pub fn ascan(&self, downtrack_index: usize) -> Vec<f64> {
        (0..self.t_len)
            .map(|t| self.sample(t, downtrack_index))
            .collect()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Downtrack position in meters of a scan index.
    pub fn position_m(&self, downtrack_index: usize) -> f64 {
        downtrack_index as f64 * self.downtrack_spacing_m
    }
}

/// A candidate patch location: downtrack scan index, time index, and the
/// value of the selection criterion (smoothed energy) there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub downtrack_index: usize,
    pub time_index: usize,
    pub score: f64,
}

impl Keypoint {
    pub fn new(downtrack_index: usize, time_index: usize, score: f64) -> Self {
        Self {
            downtrack_index,
            time_index,
            score,
        }
    }
}

/// An 18x18 window rescaled to [-1, 1], with provenance.
#[derive(Debug, Clone)]
pub struct Patch {
    values: [f64; PATCH_SIZE * PATCH_SIZE],
    pub source_alarm: AlarmId,
    pub source_keypoint: Keypoint,
}

impl Patch {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * PATCH_SIZE + col]
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cut the 18x18 window centered at `kp` (rows `t-9..=t+8`, columns
/// `x-9..=x+8`) and rescale it affinely so its minimum maps to -1 and its
/// maximum to +1. A constant window maps to all zeros.
pub fn extract_patch(bscan: &BScan, kp: &Keypoint) -> Result<Patch> {
    let (t, x) = (kp.time_index, kp.downtrack_index);
    let fits = t >= PATCH_MARGIN
        && x >= PATCH_MARGIN
        && t + (PATCH_SIZE - PATCH_MARGIN) <= bscan.t_len
        && x + (PATCH_SIZE - PATCH_MARGIN) <= bscan.x_len;
    if !fits {
        return Err(Error::MarginViolation {
            time_index: t,
            downtrack_index: x,
            t_len: bscan.t_len,
            x_len: bscan.x_len,
        });
    }

    let mut values = [0.0; PATCH_SIZE * PATCH_SIZE];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in 0..PATCH_SIZE {
        let row = bscan.row(t - PATCH_MARGIN + r);
        for c in 0..PATCH_SIZE {
            let v = row[x - PATCH_MARGIN + c];
            values[r * PATCH_SIZE + c] = v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi > lo {
        let scale = 2.0 / (hi - lo);
        for v in values.iter_mut() {
            *v = (*v - lo) * scale - 1.0;
        }
    } else {
        values = [0.0; PATCH_SIZE * PATCH_SIZE];
    }

    Ok(Patch {
        values,
        source_alarm: AlarmId::new(bscan.lane_id, bscan.run_id, kp.downtrack_index as u32),
        source_keypoint: *kp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_scan(t_len: usize, x_len: usize) -> BScan {
        let samples: Vec<f64> = (0..t_len * x_len).map(|i| i as f64).collect();
        BScan::new(samples, t_len, x_len, 0.05, 0, 0).unwrap()
    }

    #[test]
    fn rejects_undersized_grids() {
        assert!(BScan::new(vec![0.0; 17 * 20], 17, 20, 0.05, 0, 0).is_err());
        assert!(BScan::new(vec![0.0; 20 * 17], 20, 17, 0.05, 0, 0).is_err());
        assert!(BScan::new(vec![f64::NAN; 18 * 18], 18, 18, 0.05, 0, 0).is_err());
        assert!(BScan::new(vec![0.0; 18 * 18], 18, 18, 0.0, 0, 0).is_err());
    }

    #[test]
    fn ramp_window_maps_to_unit_range_and_preserves_order() {
        let b = ramp_scan(20, 20);
        let kp = Keypoint::new(9, 9, 0.0);
        let p = extract_patch(&b, &kp).unwrap();
        let lo = p.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = p.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, -1.0);
        assert_eq!(hi, 1.0);
        // Monotone source window stays monotone in row-major order.
        for w in p.values().windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn constant_window_maps_to_zeros() {
        let b = BScan::new(vec![7.3; 18 * 18], 18, 18, 0.05, 1, 2).unwrap();
        let p = extract_patch(&b, &Keypoint::new(9, 9, 0.0)).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rescale_matches_elementwise_recomputation() {
        // Independent oracle: recompute 2*(v-min)/(max-min)-1 per element.
        let t_len = 40;
        let x_len = 40;
        let mut state = 0x1234_5678_u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 10.0 - 5.0
        };
        let samples: Vec<f64> = (0..t_len * x_len).map(|_| next()).collect();
        let b = BScan::new(samples.clone(), t_len, x_len, 0.05, 0, 0).unwrap();
        let kp = Keypoint::new(20, 17, 0.0); // downtrack 20, time 17
        let p = extract_patch(&b, &kp).unwrap();

        let mut window = Vec::new();
        for r in 0..PATCH_SIZE {
            for c in 0..PATCH_SIZE {
                window.push(samples[(17 - 9 + r) * x_len + (20 - 9 + c)]);
            }
        }
        let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (got, v) in p.values().iter().zip(&window) {
            let want = 2.0 * (v - lo) / (hi - lo) - 1.0;
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn margin_violations_are_rejected() {
        let b = ramp_scan(30, 30);
        for kp in [
            Keypoint::new(8, 15, 0.0),
            Keypoint::new(22, 15, 0.0),
            Keypoint::new(15, 8, 0.0),
            Keypoint::new(15, 22, 0.0),
        ] {
            assert!(matches!(
                extract_patch(&b, &kp),
                Err(Error::MarginViolation { .. })
            ));
        }
        // Extremes that still fit: t in [9, T-9].
        assert!(extract_patch(&b, &Keypoint::new(9, 21, 0.0)).is_ok());
        assert!(extract_patch(&b, &Keypoint::new(21, 9, 0.0)).is_ok());
    }

    #[test]
    fn provenance_round_trip() {
        let b = ramp_scan(25, 25);
        let kp = Keypoint::new(12, 13, 4.5);
        let p = extract_patch(&b, &kp).unwrap();
        assert_eq!(p.source_keypoint, kp);
        assert_eq!(p.source_alarm, AlarmId::new(0, 0, 12));
    }
}
