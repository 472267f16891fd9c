//! From-scratch classifiers with a uniform real-valued decision-statistic
//! interface: an RBF-kernel SVM trained by sequential pairwise dual
//! optimization, and a random forest (100 trees, 2 candidate feature axes
//! per node, axis-aligned Gini splits).
//!
//! Higher decision statistics always mean "more target-like": the SVM
//! reports its signed margin, the forest the fraction of trees voting
//! target.

mod forest;
mod svm;

pub use forest::{train_rf, train_rf_with, ForestConfig, ForestModel};
pub use svm::{train_svm, SvmConfig, SvmModel};

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alarm::AlarmId;
use crate::error::{Error, Result};
use crate::exec;
use crate::features::{FeatureKind, FeatureVector};

/// Labeled feature rows. Labels are +1 (target) / -1 (non-target);
/// provenance records each row's source alarm for leakage audits.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<i8>,
    pub provenance: Vec<AlarmId>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn kind(&self) -> Option<FeatureKind> {
        self.features.first().map(|f| f.kind)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() || self.features.len() != self.provenance.len()
        {
            return Err(Error::DegenerateData(
                "features, labels, and provenance lengths differ".into(),
            ));
        }
        if self.is_empty() {
            return Err(Error::DegenerateData("empty training set".into()));
        }
        let kind = self.kind().expect("non-empty");
        if self
            .features
            .iter()
            .any(|f| f.kind != kind || f.values.len() != kind.len())
        {
            return Err(Error::DegenerateData(
                "training rows must share one feature kind and length".into(),
            ));
        }
        if !self.labels.iter().any(|&y| y > 0) || !self.labels.iter().any(|&y| y < 0) {
            return Err(Error::DegenerateData(
                "both classes must be present".into(),
            ));
        }
        Ok(())
    }
}

/// A trained classifier.
#[derive(Debug, Clone)]
pub enum Model {
    RbfSvm(SvmModel),
    RandomForest(ForestModel),
}

impl Model {
    pub fn feature_kind(&self) -> FeatureKind {
        match self {
            Model::RbfSvm(m) => m.feature_kind,
            Model::RandomForest(m) => m.feature_kind,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::RbfSvm(_) => "svm",
            Model::RandomForest(_) => "rf",
        }
    }
}

/// Decision statistic for one feature vector. SVM: signed margin `f(x)`;
/// forest: fraction of trees voting target, in [0, 1]. Higher is more
/// target-like for both.
pub fn predict(model: &Model, x: &FeatureVector) -> Result<f64> {
    if x.kind != model.feature_kind() {
        return Err(Error::KindMismatch {
            expected: model.feature_kind(),
            got: x.kind,
        });
    }
    Ok(match model {
        Model::RbfSvm(m) => m.decision(&x.values),
        Model::RandomForest(m) => m.decision(&x.values),
    })
}

/// Decision statistics for a batch, fanning out over the input.
pub fn predict_batch(model: &Model, xs: &[FeatureVector]) -> Result<Vec<f64>> {
    for x in xs {
        if x.kind != model.feature_kind() {
            return Err(Error::KindMismatch {
                expected: model.feature_kind(),
                got: x.kind,
            });
        }
    }
    Ok(match model {
        Model::RbfSvm(m) => m.decision_batch(xs),
        Model::RandomForest(m) => exec::map(xs, |x| m.decision(&x.values)),
    })
}

/// Which classifier to train, with hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassifierConfig {
    Svm(SvmConfig),
    Forest(ForestConfig),
}

impl ClassifierConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ClassifierConfig::Svm(_) => "svm",
            ClassifierConfig::Forest(_) => "rf",
        }
    }

    /// Re-seed the stochastic parts (the forest bootstrap) for a new
    /// training context; the SVM is deterministic and unaffected.
    pub fn reseeded(&self, seed: u64) -> Self {
        match self {
            ClassifierConfig::Svm(c) => ClassifierConfig::Svm(c.clone()),
            ClassifierConfig::Forest(c) => ClassifierConfig::Forest(ForestConfig {
                seed,
                ..c.clone()
            }),
        }
    }
}

/// Train the configured classifier on `ts`.
pub fn train(ts: &TrainingSet, config: &ClassifierConfig) -> Result<Model> {
    match config {
        ClassifierConfig::Svm(cfg) => Ok(Model::RbfSvm(train_svm_with(ts, cfg)?)),
        ClassifierConfig::Forest(cfg) => Ok(Model::RandomForest(train_rf_with(ts, cfg)?)),
    }
}

fn train_svm_with(ts: &TrainingSet, cfg: &SvmConfig) -> Result<SvmModel> {
    let gamma = cfg.gamma.unwrap_or_else(|| svm::gamma_heuristic(ts));
    train_svm(ts, gamma, cfg.c, cfg.tol)
}

// ---------------------------------------------------------------------------
// Model serialization: versioned little-endian binary blob ("GPRM")
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &[u8; 4] = b"GPRM";
const MODEL_VERSION: u16 = 1;

fn kind_tag(kind: FeatureKind) -> u8 {
    match kind {
        FeatureKind::Raw => 0,
        FeatureKind::Hog => 1,
        FeatureKind::Ehd => 2,
    }
}

fn kind_from_tag(tag: u8) -> Result<FeatureKind> {
    match tag {
        0 => Ok(FeatureKind::Raw),
        1 => Ok(FeatureKind::Hog),
        2 => Ok(FeatureKind::Ehd),
        other => Err(Error::Format(format!("unknown feature kind tag {other}"))),
    }
}

pub fn write_model<W: Write>(model: &Model, mut w: W) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&[kind_tag(model.feature_kind())])?;
    match model {
        Model::RbfSvm(m) => {
            w.write_all(&[0u8])?;
            m.write(&mut w)?;
        }
        Model::RandomForest(m) => {
            w.write_all(&[1u8])?;
            m.write(&mut w)?;
        }
    }
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<Model> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("model blob too short".into()))?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format("bad model magic, expected \"GPRM\"".into()));
    }
    let mut buf2 = [0u8; 2];
    r.read_exact(&mut buf2)?;
    let version = u16::from_le_bytes(buf2);
    if version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "unsupported model version {version}"
        )));
    }
    let mut tags = [0u8; 2];
    r.read_exact(&mut tags)?;
    let kind = kind_from_tag(tags[0])?;
    match tags[1] {
        0 => Ok(Model::RbfSvm(SvmModel::read(kind, r)?)),
        1 => Ok(Model::RandomForest(ForestModel::read(kind, r)?)),
        other => Err(Error::Format(format!("unknown model tag {other}"))),
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    read_model(BufReader::new(File::open(path)?))
}

#[cfg(test)]
pub(crate) fn toy_training_set(
    rows: &[(Vec<f64>, i8)],
    kind: FeatureKind,
) -> TrainingSet {
    TrainingSet {
        features: rows
            .iter()
            .map(|(v, _)| FeatureVector {
                kind,
                values: v.clone(),
            })
            .collect(),
        labels: rows.iter().map(|(_, y)| *y).collect(),
        provenance: rows
            .iter()
            .enumerate()
            .map(|(i, _)| AlarmId::new(0, 0, i as u32))
            .collect(),
    }
}
