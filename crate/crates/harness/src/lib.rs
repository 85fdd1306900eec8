//! Experiment driver for the sensing chain: scenes, the proposed pipeline
//! and its two baselines, metrics, SNR sweeps and plot data.

pub mod config;
pub mod error;
pub mod metrics;
pub mod output;
pub mod pipeline;
pub mod sweep;
pub mod timing;

pub use config::{ExperimentConfig, Mode, RmaParams};
pub use error::{HarnessError, Result};
pub use pipeline::{controlled_noise_variance, Pipeline, TrialOutcome};
