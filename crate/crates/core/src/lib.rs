//! Buried-threat detection in ground penetrating radar (GPR) B-scans.
//!
//! This crate implements the full desk-scale pipeline: synthetic radargram
//! generation with hyperbolic target signatures, an energy-anomaly
//! prescreener that produces spatial alarms, max-smoothed-energy keypoint
//! (MSEK) identification, patch feature extraction (raw / HOG / EHD),
//! from-scratch RBF-SVM and random-forest classifiers, the eleven keypoint
//! utilization strategies (including PatchSelect), and spatially-clustered
//! four-fold cross-validation with ROC / partial-AUC scoring in false
//! alarms per square meter.
//!
//! Everything is deterministic: all stochastic operations take explicit
//! 64-bit seeds and use a fixed, seedable generator (ChaCha8), so scenes,
//! trained models, and experiment tables are bit-reproducible.
//!
//! Data-parallel inner loops (batch feature extraction, model fitting,
//! alarm scoring) run on rayon when the default `parallel` feature is
//! enabled; disabling it falls back to equivalent sequential loops.

pub mod alarm;
pub mod bscan;
pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod io;
pub mod keypoint;
pub mod seeds;
pub mod strategy;
pub mod synth;

pub use error::{Error, Result};
