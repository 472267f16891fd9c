//! Patch feature extraction: raw rasterization, histogram of oriented
//! gradients, and the MPEG-7 edge histogram descriptor.
//!
//! Parameters follow the common GPR configuration: HOG in 6x6-pixel cells,
//! one 3x3-cell block, 9 unsigned angle bins; EHD with the five MPEG-7
//! edge filters on 2x2 blocks and a no-edge threshold of 0.15, which is
//! meaningful because patches are rescaled to [-1, 1].

use serde::{Deserialize, Serialize};

use crate::bscan::{Patch, PATCH_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Raw,
    Hog,
    Ehd,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::Raw, FeatureKind::Hog, FeatureKind::Ehd];

    pub fn len(self) -> usize {
        match self {
            FeatureKind::Raw => 324,
            FeatureKind::Hog => 81,
            FeatureKind::Ehd => 45,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Raw => "raw",
            FeatureKind::Hog => "hog",
            FeatureKind::Ehd => "ehd",
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(FeatureKind::Raw),
            "hog" => Ok(FeatureKind::Hog),
            "ehd" => Ok(FeatureKind::Ehd),
            other => Err(crate::Error::Config(format!("unknown feature kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

/// Dispatch to the extractor for `kind`.
pub fn extract(kind: FeatureKind, patch: &Patch) -> FeatureVector {
    match kind {
        FeatureKind::Raw => feat_raw(patch),
        FeatureKind::Hog => feat_hog(patch),
        FeatureKind::Ehd => feat_ehd(patch),
    }
}

/// Row-major flattening of the 18x18 patch; length 324.
pub fn feat_raw(patch: &Patch) -> FeatureVector {
    FeatureVector {
        kind: FeatureKind::Raw,
        values: patch.values().to_vec(),
    }
}

const HOG_CELL: usize = 6;
const HOG_GRID: usize = PATCH_SIZE / HOG_CELL; // 3
const HOG_BINS: usize = 9;
const HOG_BIN_WIDTH: f64 = 180.0 / HOG_BINS as f64;
const HOG_CLIP: f64 = 0.2;
const HOG_EPS: f64 = 1e-6;

/// HOG over the patch: central-difference gradients with replicated edges,
/// unsigned orientation in [0, 180), magnitude-weighted bilinear votes into
/// 9 bins per 6x6 cell, and a single 3x3-cell block L2-normalized, clipped
/// at 0.2, and renormalized. Output: 9 cells x 9 bins = 81 values.
pub fn feat_hog(patch: &Patch) -> FeatureVector {
    let mut hist = vec![0.0_f64; HOG_GRID * HOG_GRID * HOG_BINS];
    for r in 0..PATCH_SIZE {
        for c in 0..PATCH_SIZE {
            let left = patch.get(r, c.saturating_sub(1));
            let right = patch.get(r, (c + 1).min(PATCH_SIZE - 1));
            let up = patch.get(r.saturating_sub(1), c);
            let down = patch.get((r + 1).min(PATCH_SIZE - 1), c);
            let gx = right - left;
            let gy = down - up;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).to_degrees();
            angle = angle.rem_euclid(180.0);

            // bin centers at (b + 0.5) * 20 degrees, circular over [0, 180)
            let pos = angle / HOG_BIN_WIDTH - 0.5;
            let lower = pos.floor();
            let frac = pos - lower;
            let bin_lo = (lower.rem_euclid(HOG_BINS as f64)) as usize;
            let bin_hi = (bin_lo + 1) % HOG_BINS;

            let cell = (r / HOG_CELL) * HOG_GRID + c / HOG_CELL;
            hist[cell * HOG_BINS + bin_lo] += mag * (1.0 - frac);
            hist[cell * HOG_BINS + bin_hi] += mag * frac;
        }
    }

    // Single-block L2 norm, clip, renorm.
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in hist.iter_mut() {
        *v = (*v / (norm + HOG_EPS)).min(HOG_CLIP);
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in hist.iter_mut() {
        *v /= norm + HOG_EPS;
    }

    FeatureVector {
        kind: FeatureKind::Hog,
        values: hist,
    }
}

const EHD_CELL: usize = 6;
const EHD_GRID: usize = PATCH_SIZE / EHD_CELL; // 3
const EHD_BLOCK: usize = 2;
const EHD_BLOCKS_PER_CELL: usize = (EHD_CELL / EHD_BLOCK) * (EHD_CELL / EHD_BLOCK); // 9
const EHD_TYPES: usize = 5;
const EHD_THRESHOLD: f64 = 0.15;

// MPEG-7 edge filters over a 2x2 block [a b; c d] in order
// (vertical, horizontal, 45 deg, 135 deg, non-directional).
const EHD_FILTERS: [[f64; 4]; EHD_TYPES] = [
    [1.0, -1.0, 1.0, -1.0],
    [1.0, 1.0, -1.0, -1.0],
    [std::f64::consts::SQRT_2, 0.0, 0.0, -std::f64::consts::SQRT_2],
    [0.0, std::f64::consts::SQRT_2, -std::f64::consts::SQRT_2, 0.0],
    [2.0, -2.0, -2.0, 2.0],
];

/// MPEG-7 EHD over a 3x3 grid of 6x6 cells: each cell's nine 2x2 blocks
/// vote for the edge filter with the largest absolute response when that
/// response reaches 0.15, and each cell's five bins are normalized by the
/// blocks per cell. Output: 9 cells x 5 types = 45 values.
pub fn feat_ehd(patch: &Patch) -> FeatureVector {
    let mut bins = vec![0.0_f64; EHD_GRID * EHD_GRID * EHD_TYPES];
    for cell_r in 0..EHD_GRID {
        for cell_c in 0..EHD_GRID {
            let cell = cell_r * EHD_GRID + cell_c;
            for block_r in 0..EHD_CELL / EHD_BLOCK {
                for block_c in 0..EHD_CELL / EHD_BLOCK {
                    let r0 = cell_r * EHD_CELL + block_r * EHD_BLOCK;
                    let c0 = cell_c * EHD_CELL + block_c * EHD_BLOCK;
                    let quad = [
                        patch.get(r0, c0),
                        patch.get(r0, c0 + 1),
                        patch.get(r0 + 1, c0),
                        patch.get(r0 + 1, c0 + 1),
                    ];
                    let mut best_type = 0;
                    let mut best_resp = 0.0;
                    for (k, filter) in EHD_FILTERS.iter().enumerate() {
                        let resp: f64 = quad
                            .iter()
                            .zip(filter)
                            .map(|(v, f)| v * f)
                            .sum::<f64>()
                            .abs();
                        if resp > best_resp {
                            best_resp = resp;
                            best_type = k;
                        }
                    }
                    if best_resp >= EHD_THRESHOLD {
                        bins[cell * EHD_TYPES + best_type] += 1.0;
                    }
                }
            }
        }
    }
    for v in bins.iter_mut() {
        *v /= EHD_BLOCKS_PER_CELL as f64;
    }
    FeatureVector {
        kind: FeatureKind::Ehd,
        values: bins,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bscan::{extract_patch, BScan, Keypoint};

    fn patch_from(window: impl Fn(usize, usize) -> f64) -> Patch {
        let n = PATCH_SIZE;
        let samples: Vec<f64> = (0..n * n).map(|i| window(i / n, i % n)).collect();
        let b = BScan::new(samples, n, n, 0.05, 0, 0).unwrap();
        extract_patch(&b, &Keypoint::new(9, 9, 0.0)).unwrap()
    }

    #[test]
    fn raw_is_the_row_major_flattening() {
        let p = patch_from(|r, c| (r * 18 + c) as f64);
        let f = feat_raw(&p);
        assert_eq!(f.values.len(), 324);
        for r in 0..18 {
            for c in 0..18 {
                assert_eq!(f.values[18 * r + c], p.get(r, c));
            }
        }
        // Reshape-back oracle.
        let rebuilt: Vec<f64> = (0..324).map(|i| f.values[i]).collect();
        assert_eq!(rebuilt, p.values());
    }

    #[test]
    fn constant_patch_has_zero_hog_and_ehd() {
        let p = patch_from(|_, _| 3.25);
        assert!(feat_raw(&p).values.iter().all(|&v| v == 0.0));
        assert!(feat_hog(&p).values.iter().all(|&v| v == 0.0));
        assert!(feat_ehd(&p).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_ramp_votes_into_the_90_degree_bin() {
        // value = row index: gradient points down the rows, orientation 90
        // degrees, which is the center of bin 4 (centers at 10, 30, ..., 170).
        let p = patch_from(|r, _| r as f64);
        let f = feat_hog(&p);
        assert_eq!(f.values.len(), 81);
        for cell in 0..9 {
            for bin in 0..9 {
                let v = f.values[cell * 9 + bin];
                if bin == 4 {
                    assert!(v > 0.0, "cell {cell} bin 4 empty");
                } else {
                    assert_eq!(v, 0.0, "cell {cell} bin {bin} contaminated");
                }
            }
        }
    }

    #[test]
    fn hog_values_bounded_and_block_norm_at_most_one() {
        let p = patch_from(|r, c| ((r * 7 + c * 13) % 5) as f64 - 2.0);
        let f = feat_hog(&p);
        assert!(f.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let norm = f.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1.0 + 1e-6);
    }

    #[test]
    fn step_edge_fills_vertical_bins_in_straddling_cells() {
        // Left half -1, right half +1. Oracle: evaluate the five filters on
        // the only non-constant 2x2 block pattern [-1 +1; -1 +1]: vertical
        // responds |(-1)-(1)+(-1)-(1)| = 4, horizontal 0, diagonals 2*sqrt2,
        // non-directional 0, so vertical wins wherever the boundary crosses.
        let p = patch_from(|_, c| if c < 9 { -1.0 } else { 1.0 });
        let f = feat_ehd(&p);
        assert_eq!(f.values.len(), 45);
        for cell_r in 0..3 {
            for cell_c in 0..3 {
                let cell = cell_r * 3 + cell_c;
                let v = &f.values[cell * 5..cell * 5 + 5];
                if cell_c == 1 {
                    // boundary cell: exactly the 3 straddling blocks vote vertical
                    assert!((v[0] - 3.0 / 9.0).abs() < 1e-12, "cell {cell}: {v:?}");
                    assert!(v[1..].iter().all(|&x| x == 0.0));
                } else {
                    assert!(v.iter().all(|&x| x == 0.0), "cell {cell}: {v:?}");
                }
            }
        }
    }

    #[test]
    fn ehd_bins_are_normalized_counts() {
        let p = patch_from(|r, c| ((r as f64) - 8.5) * ((c as f64) - 8.5));
        let f = feat_ehd(&p);
        assert!(f.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for cell in 0..9 {
            let sum: f64 = f.values[cell * 5..cell * 5 + 5].iter().sum();
            assert!(sum <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn features_ignore_constant_offsets_in_the_source_window() {
        // Patch rescale removes offsets, so every extractor must agree
        // between windows w and w + 100.
        let base = patch_from(|r, c| ((r * 31 + c * 17) % 11) as f64);
        let offset = patch_from(|r, c| ((r * 31 + c * 17) % 11) as f64 + 100.0);
        for kind in FeatureKind::ALL {
            let a = extract(kind, &base);
            let b = extract(kind, &offset);
            assert_eq!(a, b, "{kind}");
        }
    }
}
