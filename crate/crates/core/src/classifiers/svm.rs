//! RBF-kernel soft-margin SVM trained by sequential pairwise optimization
//! of the dual (SMO with maximal-violating-pair working-set selection).
//!
//! The working pair is always the maximal KKT violation (ties toward the
//! smaller index), so training is deterministic. The Gram matrix is held
//! in f64 for small problems and f32 above `F32_GRAM_THRESHOLD` rows to
//! keep large fits inside memory; gradients and multipliers stay in f64.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};

use super::TrainingSet;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const F32_GRAM_THRESHOLD: usize = 2048;
const ETA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// RBF width; `None` uses 1 / (dim * mean feature variance).
    pub gamma: Option<f64>,
    pub c: f64,
    /// KKT tolerance for the stopping rule.
    pub tol: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            c: 1.0,
            tol: 1e-3,
        }
    }
}

/// Trained RBF SVM: decision statistic `f(x) = sum_i alpha_i y_i K(x_i, x) + b`.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub feature_kind: FeatureKind,
    pub gamma: f64,
    pub bias: f64,
    /// Box constraint the model was trained with.
    pub c: f64,
    /// Final dual objective in minimization form, `0.5 a'Qa - e'a`.
    pub objective: f64,
    pub dim: usize,
    /// Support vectors, row-major `n_sv x dim`.
    pub sv_features: Vec<f64>,
    pub sv_alpha: Vec<f64>,
    pub sv_label: Vec<f64>,
}

impl SvmModel {
    pub fn n_sv(&self) -> usize {
        self.sv_alpha.len()
    }

    /// Exact (f64) decision statistic for one feature vector.
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut f = self.bias;
        for i in 0..self.n_sv() {
            let row = &self.sv_features[i * self.dim..(i + 1) * self.dim];
            let d2: f64 = row
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            f += self.sv_alpha[i] * self.sv_label[i] * (-self.gamma * d2).exp();
        }
        f
    }

    /// Batched decision statistics via blocked matrix products.
    pub fn decision_batch(&self, xs: &[FeatureVector]) -> Vec<f64> {
        let n_sv = self.n_sv();
        if n_sv == 0 {
            return vec![self.bias; xs.len()];
        }
        if xs.is_empty() {
            return Vec::new();
        }
        let d = self.dim;
        let sv = ArrayView2::from_shape((n_sv, d), &self.sv_features).expect("sv shape");
        let sv_norms: Vec<f64> = (0..n_sv)
            .map(|i| self.sv_features[i * d..(i + 1) * d].iter().map(|v| v * v).sum())
            .collect();
        let ay: Vec<f64> = self
            .sv_alpha
            .iter()
            .zip(&self.sv_label)
            .map(|(a, y)| a * y)
            .collect();

        const BLOCK: usize = 256;
        let blocks: Vec<&[FeatureVector]> = xs.chunks(BLOCK).collect();
        let run_block = |chunk: &&[FeatureVector]| -> Vec<f64> {
            let p = chunk.len();
            let mut flat = Vec::with_capacity(p * d);
            for fv in chunk.iter() {
                flat.extend_from_slice(&fv.values);
            }
            let xm = ArrayView2::from_shape((p, d), &flat).expect("block shape");
            let dots = xm.dot(&sv.t());
            let mut out = Vec::with_capacity(p);
            for i in 0..p {
                let xn: f64 = flat[i * d..(i + 1) * d].iter().map(|v| v * v).sum();
                let mut f = self.bias;
                for j in 0..n_sv {
                    let d2 = (xn + sv_norms[j] - 2.0 * dots[[i, j]]).max(0.0);
                    f += ay[j] * (-self.gamma * d2).exp();
                }
                out.push(f);
            }
            out
        };
        let per_block = crate::exec::map(&blocks, run_block);
        per_block.into_iter().flatten().collect()
    }

    pub(super) fn write<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.gamma.to_le_bytes())?;
        w.write_all(&self.bias.to_le_bytes())?;
        w.write_all(&self.c.to_le_bytes())?;
        w.write_all(&self.objective.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.n_sv() as u32).to_le_bytes())?;
        for i in 0..self.n_sv() {
            w.write_all(&self.sv_alpha[i].to_le_bytes())?;
            w.write_all(&[if self.sv_label[i] > 0.0 { 1u8 } else { 0u8 }])?;
            for v in &self.sv_features[i * self.dim..(i + 1) * self.dim] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub(super) fn read<R: std::io::Read>(kind: FeatureKind, mut r: R) -> Result<Self> {
        let mut f8 = [0u8; 8];
        let mut read_f64 = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut f8)
                .map_err(|_| Error::Format("svm blob truncated".into()))?;
            Ok(f64::from_le_bytes(f8))
        };
        let gamma = read_f64(&mut r)?;
        let bias = read_f64(&mut r)?;
        let c = read_f64(&mut r)?;
        let objective = read_f64(&mut r)?;
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)
            .map_err(|_| Error::Format("svm blob truncated".into()))?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)
            .map_err(|_| Error::Format("svm blob truncated".into()))?;
        let n_sv = u32::from_le_bytes(b4) as usize;
        let mut sv_alpha = Vec::with_capacity(n_sv);
        let mut sv_label = Vec::with_capacity(n_sv);
        let mut sv_features = Vec::with_capacity(n_sv * dim);
        let mut f8b = [0u8; 8];
        let mut b1 = [0u8; 1];
        for _ in 0..n_sv {
            r.read_exact(&mut f8b)
                .map_err(|_| Error::Format("svm blob truncated".into()))?;
            sv_alpha.push(f64::from_le_bytes(f8b));
            r.read_exact(&mut b1)
                .map_err(|_| Error::Format("svm blob truncated".into()))?;
            sv_label.push(if b1[0] == 1 { 1.0 } else { -1.0 });
            for _ in 0..dim {
                r.read_exact(&mut f8b)
                    .map_err(|_| Error::Format("svm blob truncated".into()))?;
                sv_features.push(f64::from_le_bytes(f8b));
            }
        }
        Ok(Self {
            feature_kind: kind,
            gamma,
            bias,
            c,
            objective,
            dim,
            sv_features,
            sv_alpha,
            sv_label,
        })
    }
}

/// Default RBF width: `1 / (dim * mean per-feature variance)`.
pub fn gamma_heuristic(ts: &TrainingSet) -> f64 {
    let dim = ts.kind().map(|k| k.len()).unwrap_or(1);
    let n = ts.len() as f64;
    let mut mean_var = 0.0;
    for f in 0..dim {
        let mean: f64 = ts.features.iter().map(|r| r.values[f]).sum::<f64>() / n;
        let var: f64 = ts
            .features
            .iter()
            .map(|r| (r.values[f] - mean) * (r.values[f] - mean))
            .sum::<f64>()
            / n;
        mean_var += var;
    }
    mean_var /= dim as f64;
    if mean_var > 1e-12 {
        1.0 / (dim as f64 * mean_var)
    } else {
        1.0 / dim as f64
    }
}

/// Train an RBF SVM by SMO. Deterministic: the working pair is the maximal
/// KKT violation with ties broken toward the smaller index.
pub fn train_svm(ts: &TrainingSet, gamma: f64, c: f64, tol: f64) -> Result<SvmModel> {
    ts.validate().map_err(|e| match e {
        Error::DegenerateData(msg) => Error::DegenerateData(msg),
        other => other,
    })?;
    if !(gamma > 0.0) || !(c > 0.0) || !(tol > 0.0) {
        return Err(Error::Config("gamma, C, and tol must be positive".into()));
    }

    let n = ts.len();
    let dim = ts.kind().expect("validated").len();
    let labels: Vec<f64> = ts.labels.iter().map(|&y| y as f64).collect();
    let gram = build_rbf_gram(&ts.features, dim, gamma);
    let solution = smo_solve(&gram, &labels, c, tol);

    // Keep rows with nonzero multipliers as support vectors.
    let mut sv_features = Vec::new();
    let mut sv_alpha = Vec::new();
    let mut sv_label = Vec::new();
    for i in 0..n {
        if solution.alpha[i] > 1e-12 * c {
            sv_features.extend_from_slice(&ts.features[i].values);
            sv_alpha.push(solution.alpha[i]);
            sv_label.push(labels[i]);
        }
    }

    Ok(SvmModel {
        feature_kind: ts.kind().expect("validated"),
        gamma,
        bias: solution.bias,
        c,
        objective: solution.objective,
        dim,
        sv_features,
        sv_alpha,
        sv_label,
    })
}

pub(crate) enum Gram {
    F64(Vec<f64>),
    F32(Vec<f32>),
}

impl Gram {
    fn at(&self, n: usize, i: usize, j: usize) -> f64 {
        match self {
            Gram::F64(k) => k[i * n + j],
            Gram::F32(k) => k[i * n + j] as f64,
        }
    }
}

fn build_rbf_gram(features: &[FeatureVector], dim: usize, gamma: f64) -> Gram {
    let n = features.len();
    if n <= F32_GRAM_THRESHOLD {
        let mut k = vec![0.0_f64; n * n];
        let norms: Vec<f64> = features
            .iter()
            .map(|f| f.values.iter().map(|v| v * v).sum())
            .collect();
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in 0..i {
                let dot: f64 = features[i]
                    .values
                    .iter()
                    .zip(&features[j].values)
                    .map(|(a, b)| a * b)
                    .sum();
                let d2 = (norms[i] + norms[j] - 2.0 * dot).max(0.0);
                let v = (-gamma * d2).exp();
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Gram::F64(k)
    } else {
        // f32 storage: ~4 bytes per entry keeps 8k-row fits near 270 MB.
        let mut flat = Vec::with_capacity(n * dim);
        for f in features {
            flat.extend(f.values.iter().map(|&v| v as f32));
        }
        let x = ArrayView2::from_shape((n, dim), &flat).expect("gram input shape");
        let norms: Vec<f32> = (0..n)
            .map(|i| flat[i * dim..(i + 1) * dim].iter().map(|v| v * v).sum())
            .collect();
        let g32 = gamma as f32;
        let mut kernel = vec![0.0_f32; n * n];
        const BAND: usize = 512;
        let fill = |(band_index, chunk): (usize, &mut [f32])| {
            let r0 = band_index * BAND;
            let rows = chunk.len() / n;
            let block = x.slice(ndarray::s![r0..r0 + rows, ..]).dot(&x.t());
            for lr in 0..rows {
                let ni = norms[r0 + lr];
                let out = &mut chunk[lr * n..(lr + 1) * n];
                for j in 0..n {
                    let d2 = (ni + norms[j] - 2.0 * block[[lr, j]]).max(0.0);
                    out[j] = (-g32 * d2).exp();
                }
            }
        };
        #[cfg(feature = "parallel")]
        kernel
            .par_chunks_mut(BAND * n)
            .enumerate()
            .for_each(fill);
        #[cfg(not(feature = "parallel"))]
        kernel.chunks_mut(BAND * n).enumerate().for_each(fill);
        // Exact unit diagonal regardless of rounding.
        for i in 0..n {
            kernel[i * n + i] = 1.0;
        }
        Gram::F32(kernel)
    }
}

pub(crate) struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub iterations: usize,
}

/// Maximal-violating-pair SMO over a precomputed Gram matrix.
pub(crate) fn smo_solve(gram: &Gram, labels: &[f64], c: f64, tol: f64) -> SmoSolution {
    let n = labels.len();
    let mut alpha = vec![0.0_f64; n];
    let mut grad = vec![-1.0_f64; n]; // G = Q alpha - e
    let max_iter = (20 * n).max(100_000);
    let mut iterations = 0;

    let (final_m, final_big_m) = loop {
        // Maximal violating pair: i maximizes -y G over I_up, j minimizes
        // it over I_low; ties keep the smaller index.
        let mut m = f64::NEG_INFINITY;
        let mut big_m = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -labels[t] * grad[t];
            let in_up = (labels[t] > 0.0 && alpha[t] < c) || (labels[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (labels[t] < 0.0 && alpha[t] < c) || (labels[t] > 0.0 && alpha[t] > 0.0);
            if in_up && v > m {
                m = v;
                i = t;
            }
            if in_low && v < big_m {
                big_m = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || m - big_m <= tol {
            break (m, big_m);
        }
        if iterations >= max_iter {
            log::warn!("SMO hit the iteration cap ({max_iter}) at gap {}", m - big_m);
            break (m, big_m);
        }
        iterations += 1;

        let (yi, yj) = (labels[i], labels[j]);
        let e_i = yi * grad[i];
        let e_j = yj * grad[j];
        let eta = (gram.at(n, i, i) + gram.at(n, j, j) - 2.0 * gram.at(n, i, j)).max(ETA_FLOOR);

        let (lo, hi) = if yi != yj {
            ((alpha[j] - alpha[i]).max(0.0), (c + alpha[j] - alpha[i]).min(c))
        } else {
            ((alpha[i] + alpha[j] - c).max(0.0), (alpha[i] + alpha[j]).min(c))
        };
        let raw = alpha[j] + yj * (e_i - e_j) / eta;
        let new_aj = raw.clamp(lo, hi);
        let delta_j = new_aj - alpha[j];
        if delta_j.abs() < 1e-14 {
            // No representable progress on the most violating pair.
            break (m, big_m);
        }
        let new_ai = alpha[i] + yi * yj * (alpha[j] - new_aj);
        let delta_i = new_ai - alpha[i];
        alpha[i] = new_ai;
        alpha[j] = new_aj;

        let wi = delta_i * yi;
        let wj = delta_j * yj;
        match gram {
            Gram::F64(k) => {
                let ri = &k[i * n..(i + 1) * n];
                let rj = &k[j * n..(j + 1) * n];
                for t in 0..n {
                    grad[t] += labels[t] * (wi * ri[t] + wj * rj[t]);
                }
            }
            Gram::F32(k) => {
                let ri = &k[i * n..(i + 1) * n];
                let rj = &k[j * n..(j + 1) * n];
                for t in 0..n {
                    grad[t] += labels[t] * (wi * ri[t] as f64 + wj * rj[t] as f64);
                }
            }
        }
    };

    // Bias from free vectors when any exist, else the midpoint rule.
    let free: Vec<usize> = (0..n)
        .filter(|&t| alpha[t] > 1e-8 * c && alpha[t] < c * (1.0 - 1e-8))
        .collect();
    let bias = if free.is_empty() {
        -(final_m + final_big_m) / 2.0
    } else {
        free.iter().map(|&t| -labels[t] * grad[t]).sum::<f64>() / free.len() as f64
    };

    let objective = 0.5
        * alpha
            .iter()
            .zip(&grad)
            .map(|(a, g)| a * (g - 1.0))
            .sum::<f64>();

    SmoSolution {
        alpha,
        bias,
        objective,
        iterations,
    }
}
