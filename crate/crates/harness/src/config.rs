use std::path::{Path, PathBuf};

use pmn_core::scenario::{ClutterDoppler, ScenarioSpec};
use pmn_core::sbl::SolverParams;
use pmn_core::tracking::Gates;
use pmn_core::{Error, Result, SystemConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Multipulse canceller in front of the sparse solver.
    Proposed,
    /// Newest burst set straight into the solver.
    NoCancel,
    /// Recursive moving-average clutter subtraction in front of the solver.
    Rma,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Proposed => "proposed",
            Mode::NoCancel => "no_cancel",
            Mode::Rma => "rma",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Mode::Proposed),
            "no_cancel" => Ok(Mode::NoCancel),
            "rma" => Ok(Mode::Rma),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmaParams {
    /// Forgetting factor ρ.
    pub rho: f64,
    /// Burst sets averaged before the first estimate.
    pub warmup: usize,
}

impl Default for RmaParams {
    fn default() -> Self {
        Self { rho: 0.99, warmup: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub scenario: ScenarioSpec,
    pub solver: SolverParams,
    /// γ_rel for support detection.
    pub detection_threshold: f64,
    /// Forgetting factor α of the parameter smoothing filter.
    pub alpha: f64,
    /// Consecutive estimation windows per trial fed through the filter.
    pub windows: usize,
    pub track_gates: Gates,
    /// Gates used when scoring estimates against ground truth.
    pub metric_gates: Gates,
    pub rma: RmaParams,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_point: usize,
    pub mode: Mode,
    /// Modes compared by `sweep`.
    pub sweep_modes: Vec<Mode>,
    pub output_dir: PathBuf,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            scenario: ScenarioSpec {
                clutter_doppler: ClutterDoppler::WithinBound,
                ..ScenarioSpec::default()
            },
            solver: SolverParams::default(),
            detection_threshold: 0.1,
            alpha: 0.9,
            windows: 5,
            track_gates: Gates::default(),
            // |Δ sin θ| never exceeds 2, so this leaves only the bin gate.
            metric_gates: Gates {
                bins: 1,
                sin_theta: 2.0,
            },
            rma: RmaParams::default(),
            snr_grid_db: vec![0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0],
            trials_per_point: 50,
            mode: Mode::Proposed,
            sweep_modes: vec![Mode::Proposed, Mode::NoCancel],
            output_dir: PathBuf::from("out"),
            master_seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.scenario.validate()?;
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.trials_per_point == 0 {
            return fail("trials_per_point must be at least 1");
        }
        if self.snr_grid_db.is_empty() {
            return fail("snr_grid_db must not be empty");
        }
        if self.windows == 0 {
            return fail("windows must be at least 1");
        }
        if !(self.detection_threshold > 0.0 && self.detection_threshold < 1.0) {
            return fail("detection_threshold must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail("alpha must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.rma.rho) {
            return fail("rma.rho must lie in [0, 1)");
        }
        if self.sweep_modes.is_empty() {
            return fail("sweep_modes must not be empty");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
