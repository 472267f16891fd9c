//! Random forest: 100 trees on bootstrap resamples, two candidate feature
//! axes per node, axis-aligned splits minimizing Gini impurity, grown
//! until pure or fewer than two samples. The decision statistic is the
//! fraction of trees voting target, so it takes values in {0, 0.01, ..., 1}.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::features::FeatureKind;
use crate::seeds;

use super::TrainingSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Feature axes evaluated per node.
    pub mtry: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        label: i8,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn vote(&self, x: &[f64]) -> i8 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature as usize] < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    pub feature_kind: FeatureKind,
    pub(crate) trees: Vec<Tree>,
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Fraction of trees voting target.
    pub fn decision(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.vote(x) > 0).count();
        votes as f64 / self.trees.len() as f64
    }

    pub(super) fn write<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.trees.len() as u32).to_le_bytes())?;
        for tree in &self.trees {
            w.write_all(&(tree.nodes.len() as u32).to_le_bytes())?;
            for node in &tree.nodes {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        w.write_all(&[0u8])?;
                        w.write_all(&feature.to_le_bytes())?;
                        w.write_all(&threshold.to_le_bytes())?;
                        w.write_all(&left.to_le_bytes())?;
                        w.write_all(&right.to_le_bytes())?;
                    }
                    Node::Leaf { label } => {
                        w.write_all(&[1u8])?;
                        w.write_all(&label.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub(super) fn read<R: std::io::Read>(kind: FeatureKind, mut r: R) -> Result<Self> {
        let truncated = || Error::Format("forest blob truncated".into());
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|_| truncated())?;
        let n_trees = u32::from_le_bytes(b4) as usize;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            r.read_exact(&mut b4).map_err(|_| truncated())?;
            let n_nodes = u32::from_le_bytes(b4) as usize;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let mut tag = [0u8; 1];
                r.read_exact(&mut tag).map_err(|_| truncated())?;
                match tag[0] {
                    0 => {
                        r.read_exact(&mut b4).map_err(|_| truncated())?;
                        let feature = u32::from_le_bytes(b4);
                        let mut b8 = [0u8; 8];
                        r.read_exact(&mut b8).map_err(|_| truncated())?;
                        let threshold = f64::from_le_bytes(b8);
                        r.read_exact(&mut b4).map_err(|_| truncated())?;
                        let left = u32::from_le_bytes(b4);
                        r.read_exact(&mut b4).map_err(|_| truncated())?;
                        let right = u32::from_le_bytes(b4);
                        nodes.push(Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        });
                    }
                    1 => {
                        let mut b1 = [0u8; 1];
                        r.read_exact(&mut b1).map_err(|_| truncated())?;
                        nodes.push(Node::Leaf {
                            label: b1[0] as i8,
                        });
                    }
                    other => {
                        return Err(Error::Format(format!("unknown node tag {other}")));
                    }
                }
            }
            trees.push(Tree { nodes });
        }
        Ok(Self {
            feature_kind: kind,
            trees,
        })
    }
}

/// Train the standard 100-tree forest; see [`train_rf_with`].
pub fn train_rf(ts: &TrainingSet, seed: u64) -> Result<ForestModel> {
    train_rf_with(
        ts,
        &ForestConfig {
            seed,
            ..ForestConfig::default()
        },
    )
}

/// Train a forest: each tree gets a bootstrap resample and a seed derived
/// from `config.seed` and its index, so training is deterministic and
/// trees can be fit in parallel.
pub fn train_rf_with(ts: &TrainingSet, config: &ForestConfig) -> Result<ForestModel> {
    ts.validate()?;
    if config.n_trees == 0 || config.mtry == 0 {
        return Err(Error::Config("n_trees and mtry must be >= 1".into()));
    }
    let dim = ts.kind().expect("validated").len();
    let tree_seeds: Vec<u64> = (0..config.n_trees)
        .map(|t| seeds::derive(config.seed, &[0x7265, t as u64]))
        .collect();
    let mtry = config.mtry.min(dim);
    let trees = exec::map(&tree_seeds, |&seed| build_tree(ts, dim, mtry, seed));
    Ok(ForestModel {
        feature_kind: ts.kind().expect("validated"),
        trees,
    })
}

fn build_tree(ts: &TrainingSet, dim: usize, mtry: usize, seed: u64) -> Tree {
    let n = ts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: Vec<u32> = (0..n).map(|_| rng.gen_range(0..n) as u32).collect();

    let mut nodes: Vec<Node> = vec![Node::Leaf { label: -1 }];
    let mut stack: Vec<(usize, Vec<u32>)> = vec![(0, sample)];
    while let Some((slot, idx)) = stack.pop() {
        let n_pos = idx.iter().filter(|&&i| ts.labels[i as usize] > 0).count();
        let n_neg = idx.len() - n_pos;
        if idx.len() < 2 || n_pos == 0 || n_neg == 0 {
            nodes[slot] = Node::Leaf {
                label: majority(n_pos, n_neg),
            };
            continue;
        }

        let candidates = rand::seq::index::sample(&mut rng, dim, mtry);
        let mut best: Option<(f64, usize, f64)> = None; // (gini, feature, threshold)
        let mut scratch: Vec<(f64, i8)> = Vec::with_capacity(idx.len());
        for feature in candidates.iter() {
            scratch.clear();
            scratch.extend(idx.iter().map(|&i| {
                (
                    ts.features[i as usize].values[feature],
                    ts.labels[i as usize],
                )
            }));
            scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total = idx.len() as f64;
            let total_pos = n_pos as f64;
            let mut left_n = 0.0;
            let mut left_pos = 0.0;
            for k in 0..scratch.len() - 1 {
                left_n += 1.0;
                if scratch[k].1 > 0 {
                    left_pos += 1.0;
                }
                if scratch[k + 1].0 > scratch[k].0 {
                    let right_n = total - left_n;
                    let right_pos = total_pos - left_pos;
                    let g = left_n * gini(left_pos, left_n) + right_n * gini(right_pos, right_n);
                    let threshold = scratch[k + 1].0;
                    if best.map_or(true, |(bg, _, _)| g < bg) {
                        best = Some((g, feature, threshold));
                    }
                }
            }
        }

        match best {
            None => {
                // Both candidate features are constant on this node.
                nodes[slot] = Node::Leaf {
                    label: majority(n_pos, n_neg),
                };
            }
            Some((_, feature, threshold)) => {
                let (left_idx, right_idx): (Vec<u32>, Vec<u32>) = idx
                    .iter()
                    .partition(|&&i| ts.features[i as usize].values[feature] < threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { label: -1 });
                let right = nodes.len();
                nodes.push(Node::Leaf { label: -1 });
                nodes[slot] = Node::Split {
                    feature: feature as u32,
                    threshold,
                    left: left as u32,
                    right: right as u32,
                };
                stack.push((right, right_idx));
                stack.push((left, left_idx));
            }
        }
    }
    Tree { nodes }
}

fn majority(n_pos: usize, n_neg: usize) -> i8 {
    if n_pos > n_neg {
        1
    } else {
        -1
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    let q = 1.0 - p;
    1.0 - p * p - q * q
}
