//! Monte-Carlo SNR sweeps with paired seeds.
//!
//! Trial `i` uses the same scene and the same unit-variance noise draw at
//! every SNR point and in every mode; only the noise scale changes.
//! Trials are independent and run on the rayon pool.

use std::collections::BTreeMap;
use std::path::Path;

use pmn_core::scenario::{generate, Scenario, ScenarioSpec};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};
use crate::error::{HarnessError, Result};
use crate::metrics::{score, MetricsReport, TrialMetrics};
use crate::pipeline::{controlled_noise_variance, Pipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub scene: u64,
    pub noise: u64,
}

/// Seeds of trial `trial` under `master_seed`.
pub fn trial_seeds(master_seed: u64, trial: usize) -> TrialSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial as u64);
    TrialSeeds {
        scene: rng.random(),
        noise: rng.random(),
    }
}

pub fn trial_scene(exp: &ExperimentConfig, trial: usize) -> Result<Scenario> {
    let seeds = trial_seeds(exp.master_seed, trial);
    let spec = ScenarioSpec {
        rng_seed: seeds.scene,
        ..exp.scenario.clone()
    };
    Ok(generate(&spec, &exp.system)?)
}

/// Per-trial results of a sweep, keyed by (mode, SNR index).
#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub reports: Vec<MetricsReport>,
    pub trials: BTreeMap<(Mode, usize), Vec<TrialMetrics>>,
}

impl SweepResult {
    pub fn report(&self, mode: Mode, snr_db: f64) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.mode == mode && r.snr_db == snr_db)
    }
}

/// Runs `exp.trials_per_point` trials at every SNR of `exp.snr_grid_db`
/// for every mode in `exp.sweep_modes`.
pub fn sweep_snr(pipe: &Pipeline) -> Result<SweepResult> {
    sweep_snr_with(pipe, |_, _, _| {})
}

/// One trial's results across all modes and SNR points.
struct TrialRuns {
    suppression: Vec<(Mode, f64)>,
    runs: Vec<(Mode, usize, TrialMetrics, f64)>,
}

fn run_trial(pipe: &Pipeline, trial: usize, progress: &(impl Fn(usize, f64, Mode) + Sync)) -> Result<TrialRuns> {
    let exp = &pipe.exp;
    let seeds = trial_seeds(exp.master_seed, trial);
    let scene = trial_scene(exp, trial)?;
    let wrap = |mode: Mode| {
        move |source| HarnessError::Trial {
            trial,
            mode: mode.name(),
            source,
        }
    };
    let mut out = TrialRuns {
        suppression: Vec::new(),
        runs: Vec::new(),
    };
    for &mode in &exp.sweep_modes {
        if let Some(s) = pipe.clutter_suppression(mode, &scene).map_err(wrap(mode))? {
            out.suppression.push((mode, s));
        }
        // One unit-variance draw per trial, rescaled per SNR point.
        let unit = pipe.receive(mode, &scene, 1.0, seeds.noise)?;
        let clean = pipe.receive(mode, &scene, 0.0, seeds.noise)?;
        for (si, &snr) in exp.snr_grid_db.iter().enumerate() {
            let sigma2 = controlled_noise_variance(&scene, snr);
            let mut cube = clean.clone();
            let sd = sigma2.sqrt();
            for ((y, u), c) in cube.samples.iter_mut().zip(&unit.samples).zip(&clean.samples) {
                *y = *c + (*u - *c) * sd;
            }
            cube.noise_variance = sigma2;
            let res = pipe.run_on_cube(mode, &scene, &cube).map_err(wrap(mode))?;
            let m = score(&scene, &res.estimates, &exp.system, &exp.metric_gates);
            out.runs.push((mode, si, m, res.runtime_s));
            progress(trial, snr, mode);
        }
    }
    Ok(out)
}

/// As [`sweep_snr`], calling `progress(trial, snr_db, mode)` after each run.
/// Trials run concurrently; results are gathered in trial order, so the
/// output does not depend on scheduling.
pub fn sweep_snr_with(pipe: &Pipeline, progress: impl Fn(usize, f64, Mode) + Sync) -> Result<SweepResult> {
    let exp = &pipe.exp;
    let per_trial: Vec<TrialRuns> = (0..exp.trials_per_point)
        .into_par_iter()
        .map(|trial| run_trial(pipe, trial, &progress))
        .collect::<Result<_>>()?;

    let mut trials: BTreeMap<(Mode, usize), Vec<TrialMetrics>> = BTreeMap::new();
    let mut runtimes: BTreeMap<(Mode, usize), Vec<f64>> = BTreeMap::new();
    let mut suppression: BTreeMap<Mode, Vec<f64>> = BTreeMap::new();
    for t in per_trial {
        for (mode, s) in t.suppression {
            suppression.entry(mode).or_default().push(s);
        }
        for (mode, si, m, rt) in t.runs {
            trials.entry((mode, si)).or_default().push(m);
            runtimes.entry((mode, si)).or_default().push(rt);
        }
    }

    let mut reports = Vec::new();
    for (si, &snr) in exp.snr_grid_db.iter().enumerate() {
        for &mode in &exp.sweep_modes {
            let t = trials.get(&(mode, si)).map(Vec::as_slice).unwrap_or(&[]);
            let rt = runtimes.get(&(mode, si)).cloned().unwrap_or_default();
            let sup = suppression.get(&mode).map(Vec::as_slice).unwrap_or(&[]);
            reports.push(MetricsReport::aggregate(snr, mode, t, rt, sup));
        }
    }
    Ok(SweepResult { reports, trials })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub mode: Mode,
    pub mse_db: f64,
    pub det_rate: f64,
    pub trials: usize,
}

/// Header: `snr_db,mode,mse_db,det_rate,trials`.
pub fn write_sweep_csv(reports: &[MetricsReport], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["snr_db", "mode", "mse_db", "det_rate", "trials"])?;
    for r in reports {
        w.serialize(SweepRow {
            snr_db: r.snr_db,
            mode: r.mode,
            mse_db: r.mse_db,
            det_rate: r.det_rate,
            trials: r.trials,
        })?;
    }
    w.flush()?;
    Ok(())
}
