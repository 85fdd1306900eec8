//! One trial of the estimation chain, for each of the three front ends.

use std::time::Instant;

use pmn_core::canceller::{assemble, cancel, demodulate, CancelledCube, MeasurementMatrix};
use pmn_core::dictionary::{build_dictionary, DelayDictionary};
use pmn_core::extract::{extract_paths, GainModel, PathEstimate, PrunedRows};
use pmn_core::sbl::{detect_support, solve_mmv, SparseEstimate};
use pmn_core::scenario::Scenario;
use pmn_core::signal::{transmit_receive, ReceiveOptions, ReceivedCube, SsbSchedule};
use pmn_core::tracking::{ParamVector, TrackStore};
use pmn_core::{Complex64, Error, Result, SystemConfig};

use crate::config::{ExperimentConfig, Mode};

/// Noise variance giving the weakest target a per-element SNR of `snr_db`
/// (|b_min|² / σ²). Falls back to the weakest path when there are no
/// targets.
pub fn controlled_noise_variance(scenario: &Scenario, snr_db: f64) -> f64 {
    let weakest = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
    let mut p = weakest(&mut scenario.targets().map(|p| p.power()));
    if !p.is_finite() {
        p = weakest(&mut scenario.paths.iter().map(|p| p.power()));
    }
    if !p.is_finite() || p == 0.0 {
        return 0.0;
    }
    p / 10f64.powf(snr_db / 10.0)
}

/// Output of the sparse stage for one processed burst set.
#[derive(Debug, Clone)]
pub struct FrameEstimate {
    pub measurement: MeasurementMatrix,
    pub sparse: SparseEstimate,
    pub support: Vec<usize>,
    pub paths: Vec<PathEstimate>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub mode: Mode,
    /// Estimates of the last window with track-smoothed parameters.
    pub estimates: Vec<PathEstimate>,
    /// Raw per-window estimates, oldest first.
    pub window_estimates: Vec<Vec<PathEstimate>>,
    pub iterations: Vec<usize>,
    pub converged: bool,
    pub runtime_s: f64,
    pub front_end_s: f64,
}

/// The estimation chain with its dictionary factorized once.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub exp: ExperimentConfig,
    pub dict: DelayDictionary,
}

impl Pipeline {
    pub fn new(exp: ExperimentConfig) -> Result<Self> {
        exp.validate()?;
        let dict = build_dictionary(&exp.system)?;
        Ok(Self { exp, dict })
    }

    pub fn cfg(&self) -> &SystemConfig {
        &self.exp.system
    }

    /// Demodulate, assemble, solve, prune and extract one frame.
    pub fn estimate_frame(&self, frame: &CancelledCube, schedule: &SsbSchedule, gain: GainModel) -> Result<FrameEstimate> {
        let cfg = self.cfg();
        let measurement = assemble(&demodulate(frame, schedule)?, cfg)?;
        let sparse = solve_mmv(&measurement.matrix, &self.dict, &self.exp.solver)?;
        let support = detect_support(&sparse, self.exp.detection_threshold);
        let pruned = PrunedRows::from_estimate(&sparse, &self.dict, &support, cfg.num_antennas, cfg.num_ssb)?;
        let paths = extract_paths(&pruned, schedule, cfg, gain)?;
        Ok(FrameEstimate {
            measurement,
            sparse,
            support,
            paths,
        })
    }

    /// Burst sets that have to be simulated for `mode`.
    pub fn bursts_needed(&self, mode: Mode) -> usize {
        self.warmup(mode) + self.exp.windows
    }

    fn warmup(&self, mode: Mode) -> usize {
        match mode {
            Mode::Proposed | Mode::NoCancel => self.cfg().canceller_order,
            Mode::Rma => self.exp.rma.warmup,
        }
    }

    pub fn gain_model(&self, mode: Mode) -> GainModel {
        match mode {
            Mode::Proposed => GainModel::Canceller {
                order: self.cfg().canceller_order,
            },
            Mode::NoCancel | Mode::Rma => GainModel::Unity,
        }
    }

    /// Simulates the burst sets a trial of `mode` consumes.
    pub fn receive(&self, mode: Mode, scenario: &Scenario, noise_variance: f64, seed: u64) -> Result<ReceivedCube> {
        let opts = ReceiveOptions {
            num_bursts: self.bursts_needed(mode),
            first_burst: 0,
            noise_variance,
            seed,
        };
        transmit_receive(&scenario.paths, &scenario.schedule, self.cfg(), &opts)
    }

    /// The `windows` frames handed to the sparse stage, oldest first.
    pub fn front_end(&self, mode: Mode, cube: &ReceivedCube) -> Result<Vec<CancelledCube>> {
        let warm = self.warmup(mode);
        let windows = self.exp.windows;
        if cube.num_bursts < warm + windows {
            return Err(Error::BurstCount {
                expected: warm + windows,
                actual: cube.num_bursts,
            });
        }
        match mode {
            Mode::Proposed => {
                let p = self.cfg().canceller_order;
                (0..windows).map(|w| cancel(&cube.window(w, p + 1)?, p)).collect()
            }
            Mode::NoCancel => Ok((0..windows).map(|w| CancelledCube::from_burst(cube, w + warm)).collect()),
            Mode::Rma => rma_frames(cube, self.exp.rma.rho, warm, windows),
        }
    }

    /// Runs `mode` on a scene: simulate, front end, sparse estimation per
    /// window, and the smoothing filter across windows.
    pub fn run(&self, mode: Mode, scenario: &Scenario, noise_variance: f64, seed: u64) -> Result<TrialOutcome> {
        let cube = self.receive(mode, scenario, noise_variance, seed)?;
        self.run_on_cube(mode, scenario, &cube)
    }

    pub fn run_on_cube(&self, mode: Mode, scenario: &Scenario, cube: &ReceivedCube) -> Result<TrialOutcome> {
        let start = Instant::now();
        let frames = self.front_end(mode, cube)?;
        let front_end_s = start.elapsed().as_secs_f64();
        let gain = self.gain_model(mode);

        let mut store = TrackStore::new(self.exp.alpha, self.exp.track_gates);
        let mut window_estimates = Vec::with_capacity(frames.len());
        let mut iterations = Vec::with_capacity(frames.len());
        let mut converged = true;
        let mut last_ids = Vec::new();
        for (w, frame) in frames.iter().enumerate() {
            let fe = self.estimate_frame(frame, &scenario.schedule, gain)?;
            iterations.push(fe.sparse.iterations);
            converged &= fe.sparse.converged;
            last_ids = store.update(w, &fe.paths);
            window_estimates.push(fe.paths);
        }

        let last = window_estimates.last().cloned().unwrap_or_default();
        let estimates = last
            .iter()
            .zip(&last_ids)
            .map(|(e, id)| match store.get(*id) {
                Some(t) => smoothed_estimate(e, &t.q),
                None => *e,
            })
            .collect();
        Ok(TrialOutcome {
            mode,
            estimates,
            window_estimates,
            iterations,
            converged,
            runtime_s: start.elapsed().as_secs_f64(),
            front_end_s,
        })
    }

    pub fn run_pipeline(&self, scenario: &Scenario, noise_variance: f64, seed: u64) -> Result<TrialOutcome> {
        self.run(Mode::Proposed, scenario, noise_variance, seed)
    }

    pub fn run_no_cancel_baseline(&self, scenario: &Scenario, noise_variance: f64, seed: u64) -> Result<TrialOutcome> {
        self.run(Mode::NoCancel, scenario, noise_variance, seed)
    }

    pub fn run_rma_baseline(&self, scenario: &Scenario, noise_variance: f64, seed: u64) -> Result<TrialOutcome> {
        self.run(Mode::Rma, scenario, noise_variance, seed)
    }

    /// Output-to-input energy ratio of the front end on the scene's clutter
    /// alone, noiseless, averaged over the windows. Returns `None` for a
    /// clutter-free scene.
    pub fn clutter_suppression(&self, mode: Mode, scenario: &Scenario) -> Result<Option<f64>> {
        let clutter: Vec<_> = scenario.clutter().copied().collect();
        if clutter.is_empty() {
            return Ok(None);
        }
        let opts = ReceiveOptions::noiseless(self.bursts_needed(mode));
        let cube = transmit_receive(&clutter, &scenario.schedule, self.cfg(), &opts)?;
        let frames = self.front_end(mode, &cube)?;
        let warm = self.warmup(mode);
        let mut out = 0.0;
        let mut inp = 0.0;
        for (w, f) in frames.iter().enumerate() {
            out += f.energy();
            inp += CancelledCube::from_burst(&cube, w + warm).energy();
        }
        Ok(Some(out / inp))
    }
}

fn smoothed_estimate(e: &PathEstimate, q: &ParamVector) -> PathEstimate {
    let sin_theta = q.sin_theta.clamp(-1.0, 1.0);
    PathEstimate {
        delay_s: q.delay_s,
        doppler_hz: q.doppler_hz,
        sin_theta,
        theta: sin_theta.asin(),
        power: q.power,
        ..*e
    }
}

/// Recursive-average clutter removal. The running mean
/// `ĉ(i) = ρ ĉ(i-1) + (1-ρ) y(i)`, started from zero, is divided by
/// `1 - ρ^{i+1}` to remove its start-up bias and then subtracted from burst
/// `i` for each of the `windows` bursts after `warmup`.
pub fn rma_frames(cube: &ReceivedCube, rho: f64, warmup: usize, windows: usize) -> Result<Vec<CancelledCube>> {
    if cube.num_bursts < warmup + windows {
        return Err(Error::BurstCount {
            expected: warmup + windows,
            actual: cube.num_bursts,
        });
    }
    let mut avg = vec![Complex64::new(0.0, 0.0); cube.burst_len()];
    let mut frames = Vec::with_capacity(windows);
    for i in 0..warmup + windows {
        let y = cube.burst(i);
        for (c, v) in avg.iter_mut().zip(y) {
            *c = *c * rho + *v * (1.0 - rho);
        }
        if i >= warmup {
            let debias = 1.0 / (1.0 - rho.powi(i as i32 + 1));
            let mut frame = CancelledCube::from_burst(cube, i);
            for (o, c) in frame.samples.iter_mut().zip(&avg) {
                *o -= *c * debias;
            }
            frames.push(frame);
        }
    }
    Ok(frames)
}
