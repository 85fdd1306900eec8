//! Plot data and run summaries.

use std::path::Path;

use pmn_core::config::SPEED_OF_LIGHT;
use pmn_core::extract::PathEstimate;
use pmn_core::scenario::Scenario;
use pmn_core::SystemConfig;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::metrics::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    TruthTarget,
    TruthClutter,
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub trial: usize,
    /// cτ/2
    pub distance_m: f64,
    /// f_D λ / 2 for the speed plot, π sin θ for the angle plot.
    pub value: f64,
    pub kind: PointKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scatter {
    pub speed: Vec<ScatterPoint>,
    pub angle: Vec<ScatterPoint>,
}

impl Scatter {
    pub fn estimate_count(&self) -> usize {
        self.speed.iter().filter(|p| p.kind == PointKind::Estimate).count()
    }

    /// Writes `speed_distance.csv` and `angle_distance.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_points(&self.speed, "speed_mps", dir.join("speed_distance.csv"))?;
        write_points(&self.angle, "pi_sin_theta", dir.join("angle_distance.csv"))
    }
}

fn write_points(points: &[ScatterPoint], value_name: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trial", "distance_m", value_name, "kind"])?;
    for p in points {
        let kind = match p.kind {
            PointKind::TruthTarget => "truth_target",
            PointKind::TruthClutter => "truth_clutter",
            PointKind::Estimate => "estimate",
        };
        w.write_record(&[p.trial.to_string(), p.distance_m.to_string(), p.value.to_string(), kind.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Speed–distance and angle–distance points for a set of trials.
pub fn emit_scatter(trials: &[(usize, &Scenario, &[PathEstimate])], cfg: &SystemConfig) -> Scatter {
    let half_lambda = cfg.wavelength() / 2.0;
    let mut out = Scatter::default();
    let mut push = |trial, delay_s: f64, doppler_hz: f64, sin_theta: f64, kind| {
        let distance_m = SPEED_OF_LIGHT * delay_s / 2.0;
        out.speed.push(ScatterPoint {
            trial,
            distance_m,
            value: doppler_hz * half_lambda,
            kind,
        });
        out.angle.push(ScatterPoint {
            trial,
            distance_m,
            value: std::f64::consts::PI * sin_theta,
            kind,
        });
    };
    for &(trial, scene, estimates) in trials {
        for p in &scene.paths {
            let kind = if p.is_clutter {
                PointKind::TruthClutter
            } else {
                PointKind::TruthTarget
            };
            push(trial, p.delay_s, p.doppler_hz, p.sin_theta(), kind);
        }
        for e in estimates {
            push(trial, e.delay_s, e.doppler_hz, e.sin_theta, PointKind::Estimate);
        }
    }
    out
}

/// JSON run summary with the resolved configuration embedded.
#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub reports: &'a [MetricsReport],
    pub diverged: bool,
}

impl Summary<'_> {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
