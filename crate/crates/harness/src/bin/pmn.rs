use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use pmn_core::sbl::{solve_mmv, write_trace_csv, SolverParams};
use pmn_core::tracking::{write_records_csv, EstimateRecord};
use pmn_harness::metrics::{score, MetricsReport};
use pmn_harness::output::{emit_scatter, Summary};
use pmn_harness::sweep::{sweep_snr_with, trial_scene, trial_seeds, write_sweep_csv};
use pmn_harness::{controlled_noise_variance, ExperimentConfig, HarnessError, Mode, Pipeline};

#[derive(Parser)]
#[command(name = "pmn", about = "Clutter-cancelling sparse sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the mode: proposed, no_cancel or rma.
    #[arg(long)]
    mode: Option<Mode>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One trial: estimates, ground truth and a summary.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// AoA MSE and detection rate over the SNR grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Overrides trials per SNR point.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Speed–distance and angle–distance scatter data.
    Scatter {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        snr: f64,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Per-iteration solver convergence for one frame.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

fn load(common: &Common) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let mut exp = match &common.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        exp.master_seed = s;
    }
    if let Some(m) = common.mode {
        exp.mode = m;
    }
    if let Some(o) = &common.out {
        exp.output_dir = o.clone();
    }
    exp.validate()?;
    std::fs::create_dir_all(&exp.output_dir)?;
    let out = exp.output_dir.clone();
    Ok((exp, out))
}

fn write_summary(command: &str, exp: &ExperimentConfig, reports: &[MetricsReport], out: &Path) -> anyhow::Result<()> {
    Summary {
        command,
        config: exp,
        reports,
        diverged: false,
    }
    .write(out.join("summary.json"))?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { common, snr, trial } => {
            let (exp, out) = load(&common)?;
            let mode = exp.mode;
            let pipe = Pipeline::new(exp)?;
            let scene = trial_scene(&pipe.exp, trial)?;
            let sigma2 = controlled_noise_variance(&scene, snr);
            let res = pipe
                .run(mode, &scene, sigma2, trial_seeds(pipe.exp.master_seed, trial).noise)
                .map_err(|source| HarnessError::Trial {
                    trial,
                    mode: mode.name(),
                    source,
                })?;
            let records: Vec<EstimateRecord> = res
                .estimates
                .iter()
                .map(|e| EstimateRecord::from_estimate(pipe.exp.windows - 1, e, None))
                .collect();
            write_records_csv(&records, out.join("estimates.csv"))?;
            scene.save(out.join("scene.toml"))?;
            let m = score(&scene, &res.estimates, &pipe.exp.system, &pipe.exp.metric_gates);
            println!(
                "{} paths estimated, {}/{} targets matched",
                res.estimates.len(),
                m.detections(),
                m.targets
            );
            let report = MetricsReport::aggregate(snr, mode, &[m], vec![res.runtime_s], &[]);
            println!("AoA MSE {:.2} dB", report.mse_db);
            write_summary("run", &pipe.exp, &[report], &out)?;
        }
        Command::Sweep { common, trials } => {
            let (mut exp, out) = load(&common)?;
            if let Some(t) = trials {
                exp.trials_per_point = t;
            }
            let pipe = Pipeline::new(exp)?;
            let total = pipe.exp.trials_per_point;
            let result = sweep_snr_with(&pipe, |trial, snr, mode| {
                if snr == *pipe.exp.snr_grid_db.last().unwrap() && mode == *pipe.exp.sweep_modes.last().unwrap() {
                    eprintln!("trial {} of {} done", trial + 1, total);
                }
            })?;
            write_sweep_csv(&result.reports, out.join("sweep.csv"))?;
            for r in &result.reports {
                println!(
                    "snr {:>5.1} dB  {:<9}  mse {:>7.2} dB  det {:.3}  fa {}",
                    r.snr_db,
                    r.mode.name(),
                    r.mse_db,
                    r.det_rate,
                    r.false_alarms
                );
            }
            write_summary("sweep", &pipe.exp, &result.reports, &out)?;
        }
        Command::Scatter { common, snr, trials } => {
            let (exp, out) = load(&common)?;
            let mode = exp.mode;
            let pipe = Pipeline::new(exp)?;
            let mut scenes = Vec::new();
            let mut estimates = Vec::new();
            let mut metrics = Vec::new();
            for trial in 0..trials {
                let scene = trial_scene(&pipe.exp, trial)?;
                let sigma2 = controlled_noise_variance(&scene, snr);
                let res = pipe
                    .run(mode, &scene, sigma2, trial_seeds(pipe.exp.master_seed, trial).noise)
                    .map_err(|source| HarnessError::Trial {
                        trial,
                        mode: mode.name(),
                        source,
                    })?;
                metrics.push(score(&scene, &res.estimates, &pipe.exp.system, &pipe.exp.metric_gates));
                scenes.push(scene);
                estimates.push(res.estimates);
            }
            let refs: Vec<_> = (0..trials).map(|i| (i, &scenes[i], estimates[i].as_slice())).collect();
            let scatter = emit_scatter(&refs, &pipe.exp.system);
            scatter.write(&out)?;
            let report = MetricsReport::aggregate(snr, mode, &metrics, Vec::new(), &[]);
            println!("{} estimates over {} trials", scatter.estimate_count(), trials);
            write_summary("scatter", &pipe.exp, &[report], &out)?;
        }
        Command::Trace { common, snr, trial } => {
            let (exp, out) = load(&common)?;
            let mode = exp.mode;
            let pipe = Pipeline::new(exp)?;
            let scene = trial_scene(&pipe.exp, trial)?;
            let sigma2 = controlled_noise_variance(&scene, snr);
            let cube = pipe.receive(mode, &scene, sigma2, trial_seeds(pipe.exp.master_seed, trial).noise)?;
            let frames = pipe.front_end(mode, &cube)?;
            let r = pmn_core::canceller::assemble(
                &pmn_core::canceller::demodulate(&frames[0], &scene.schedule)?,
                &pipe.exp.system,
            )?;
            let params = SolverParams {
                record_trace: true,
                ..pipe.exp.solver.clone()
            };
            let est = solve_mmv(&r.matrix, &pipe.dict, &params).map_err(|source| HarnessError::Trial {
                trial,
                mode: mode.name(),
                source,
            })?;
            write_trace_csv(&est.trace, out.join("trace.csv"))?;
            println!("{} iterations, converged: {}", est.iterations, est.converged);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let diverged = e.chain().any(|c| {
                matches!(c.downcast_ref::<pmn_core::Error>(), Some(pmn_core::Error::Diverged { .. }))
                    || matches!(
                        c.downcast_ref::<HarnessError>(),
                        Some(HarnessError::Trial {
                            source: pmn_core::Error::Diverged { .. },
                            ..
                        })
                    )
            });
            if diverged {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
