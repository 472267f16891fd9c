//! Experiment configuration: one TOML file with sections for the scene
//! grid, prescreener, MSEK, classifiers, and evaluation settings, plus the
//! strategy/feature/classifier subsets the `single` experiment runs.
//! Command-line flags override file values; every output embeds a hash of
//! the resolved configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use patchselect_core::eval::experiments::{BenchConfig, ClfKind};
use patchselect_core::features::FeatureKind;
use patchselect_core::strategy::{registry_strategy, StrategySpec, TestPolicy, TrainPolicy};

/// Inline strategy definition using the canonical textual forms, e.g.
/// `target_sampler = "top_energy(4)"`, `selector = "top_l(12)"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyToml {
    pub index: u8,
    pub name: String,
    pub target_sampler: String,
    pub nontarget_sampler: String,
    pub ordering: String,
    pub selector: String,
    #[serde(default = "default_ds_stride")]
    pub ds_stride: usize,
}

fn default_ds_stride() -> usize {
    4
}

impl StrategyToml {
    fn resolve(&self) -> anyhow::Result<StrategySpec> {
        let ordering = match self.ordering.as_str() {
            "en" => patchselect_core::strategy::TestOrdering::En,
            "ds" => patchselect_core::strategy::TestOrdering::Ds,
            other => bail!("unknown ordering {other:?} (expected \"en\" or \"ds\")"),
        };
        let spec = StrategySpec {
            index: self.index,
            name: self.name.clone(),
            train: TrainPolicy {
                target_sampler: self.target_sampler.parse()?,
                nontarget_sampler: self.nontarget_sampler.parse()?,
            },
            test: TestPolicy {
                ordering,
                selector: self.selector.parse()?,
                ds_stride: self.ds_stride,
            },
        };
        spec.test.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    /// Registry indices run by the `single` experiment.
    pub strategies: Vec<u8>,
    /// Extra inline strategies for the `single` experiment.
    pub strategy: Vec<StrategyToml>,
    pub features: Vec<String>,
    pub classifiers: Vec<String>,
    #[serde(flatten)]
    pub bench: BenchConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            strategies: (1..=11).collect(),
            strategy: Vec::new(),
            features: vec!["raw".into(), "hog".into(), "ehd".into()],
            classifiers: vec!["svm".into(), "rf".into()],
            bench: BenchConfig::default_benchmark(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let config = match path {
            None => Self::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.strategies.is_empty() && self.strategy.is_empty() {
            bail!("config must select at least one strategy");
        }
        if self.features.is_empty() {
            bail!("config must select at least one feature kind");
        }
        if self.classifiers.is_empty() {
            bail!("config must select at least one classifier");
        }
        self.bench.validate()?;
        self.resolved_strategies()?;
        self.resolved_features()?;
        self.resolved_classifiers()?;
        Ok(())
    }

    pub fn resolved_strategies(&self) -> anyhow::Result<Vec<StrategySpec>> {
        let mut out = Vec::new();
        for &index in &self.strategies {
            out.push(registry_strategy(index)?);
        }
        for custom in &self.strategy {
            out.push(custom.resolve()?);
        }
        Ok(out)
    }

    pub fn resolved_features(&self) -> anyhow::Result<Vec<FeatureKind>> {
        self.features
            .iter()
            .map(|name| name.parse().map_err(anyhow::Error::from))
            .collect()
    }

    pub fn resolved_classifiers(&self) -> anyhow::Result<Vec<ClfKind>> {
        self.classifiers
            .iter()
            .map(|name| name.parse().map_err(anyhow::Error::from))
            .collect()
    }

    /// Hash of the resolved configuration; embedded in every output file so
    /// reports can refuse mixed inputs. The output directory does not
    /// affect results, so it is excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let text = toml::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}
