//! Scoring estimates against ground truth.
//!
//! Targets that fall in the same delay bin are merged into one truth, since
//! one grid row can only report one path. An estimate matched to a merged
//! truth is scored against the member nearest to it in sin θ.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use pmn_core::extract::PathEstimate;
use pmn_core::scenario::Scenario;
use pmn_core::tracking::{associate, sin_difference, AssocKey, Gates};
use pmn_core::SystemConfig;
use serde::Serialize;

use crate::config::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truth {
    pub grid_bin: usize,
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub sin_theta: f64,
    pub power: f64,
    /// Paths folded into this bin.
    pub merged: usize,
}

/// The paths sharing one delay bin, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthGroup {
    pub grid_bin: usize,
    pub members: Vec<Truth>,
}

impl TruthGroup {
    pub fn dominant(&self) -> &Truth {
        &self.members[0]
    }

    /// Member closest to `sin_theta`.
    pub fn nearest(&self, sin_theta: f64) -> &Truth {
        self.members
            .iter()
            .min_by(|a, b| {
                let da = sin_difference(a.sin_theta, sin_theta).abs();
                let db = sin_difference(b.sin_theta, sin_theta).abs();
                da.total_cmp(&db)
            })
            .expect("groups are never empty")
    }
}

/// Paths grouped by delay bin, in bin order.
pub fn merged_truths<'a>(
    paths: impl Iterator<Item = &'a pmn_core::signal::PathParams>,
    cfg: &SystemConfig,
) -> Vec<TruthGroup> {
    let mut by_bin: BTreeMap<usize, Vec<Truth>> = BTreeMap::new();
    for p in paths {
        let bin = cfg.quantize_delay(p.delay_s);
        by_bin.entry(bin).or_default().push(Truth {
            grid_bin: bin,
            delay_s: p.delay_s,
            doppler_hz: p.doppler_hz,
            sin_theta: p.sin_theta(),
            power: p.power(),
            merged: 1,
        });
    }
    by_bin
        .into_iter()
        .map(|(grid_bin, mut members)| {
            members.sort_by(|a, b| b.power.total_cmp(&a.power));
            let n = members.len();
            for m in &mut members {
                m.merged = n;
            }
            TruthGroup { grid_bin, members }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub truth: Truth,
    pub estimate: PathEstimate,
}

impl MatchedPair {
    /// (π sin θ̂ − π sin θ)², with the difference taken modulo 2π since that
    /// phase is all the array observes.
    pub fn aoa_sq_error(&self) -> f64 {
        (PI * sin_difference(self.estimate.sin_theta, self.truth.sin_theta)).powi(2)
    }

    pub fn doppler_sq_error(&self) -> f64 {
        (self.estimate.doppler_hz - self.truth.doppler_hz).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub matched: Vec<MatchedPair>,
    /// Merged target truths in the scene.
    pub targets: usize,
    pub estimates: usize,
    /// Estimates landing on a clutter bin with no target nearby.
    pub clutter_detections: usize,
    /// Estimates matching neither a target nor clutter.
    pub false_alarms: usize,
}

impl TrialMetrics {
    pub fn detections(&self) -> usize {
        self.matched.len()
    }

    pub fn detection_rate(&self) -> f64 {
        if self.targets == 0 {
            1.0
        } else {
            self.detections() as f64 / self.targets as f64
        }
    }

    /// Mean of (π sin θ̂ − π sin θ)² over matched targets.
    pub fn aoa_mse(&self) -> Option<f64> {
        if self.matched.is_empty() {
            return None;
        }
        Some(self.matched.iter().map(MatchedPair::aoa_sq_error).sum::<f64>() / self.matched.len() as f64)
    }
}

/// Matches estimates to merged target truths, then leftovers to clutter
/// truths, within `gates`.
pub fn score(scenario: &Scenario, estimates: &[PathEstimate], cfg: &SystemConfig, gates: &Gates) -> TrialMetrics {
    let targets = merged_truths(scenario.targets(), cfg);
    let clutter = merged_truths(scenario.clutter(), cfg);
    let keys = |ts: &[TruthGroup]| -> Vec<AssocKey> {
        ts.iter()
            .map(|t| AssocKey {
                grid_bin: t.grid_bin,
                sin_theta: t.dominant().sin_theta,
            })
            .collect()
    };
    let est_keys: Vec<AssocKey> = estimates.iter().map(AssocKey::from).collect();

    let pairs = associate(&est_keys, &keys(&targets), gates);
    let mut used = vec![false; estimates.len()];
    let matched = pairs
        .iter()
        .map(|&(e, t)| {
            used[e] = true;
            MatchedPair {
                truth: *targets[t].nearest(estimates[e].sin_theta),
                estimate: estimates[e],
            }
        })
        .collect();

    let rest: Vec<usize> = (0..estimates.len()).filter(|&i| !used[i]).collect();
    let rest_keys: Vec<AssocKey> = rest.iter().map(|&i| est_keys[i]).collect();
    let clutter_detections = associate(&rest_keys, &keys(&clutter), gates).len();

    TrialMetrics {
        matched,
        targets: targets.len(),
        estimates: estimates.len(),
        clutter_detections,
        false_alarms: rest.len() - clutter_detections,
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Aggregate over the trials of one (SNR, mode) point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub snr_db: f64,
    pub mode: Mode,
    pub trials: usize,
    /// Median over trials of the per-trial AoA MSE, in dB.
    pub mse_db: f64,
    /// Mean over all matched targets of all trials, in dB.
    pub pooled_mse_db: f64,
    /// Half-width of the 95% normal interval on the pooled mean, in dB
    /// above it.
    pub pooled_ci_halfwidth_db: f64,
    pub det_rate: f64,
    pub false_alarms: usize,
    pub clutter_detections: usize,
    pub doppler_rmse_hz: f64,
    pub runtimes_s: Vec<f64>,
    /// Mean front-end clutter energy ratio in dB, when measured.
    pub clutter_suppression_db: Option<f64>,
}

impl MetricsReport {
    pub fn aggregate(
        snr_db: f64,
        mode: Mode,
        trials: &[TrialMetrics],
        runtimes_s: Vec<f64>,
        suppression: &[f64],
    ) -> Self {
        let mut per_trial: Vec<f64> = trials.iter().filter_map(TrialMetrics::aoa_mse).collect();
        let mse_db = median(&mut per_trial).map(to_db).unwrap_or(f64::NAN);

        let errs: Vec<f64> = trials
            .iter()
            .flat_map(|t| t.matched.iter().map(MatchedPair::aoa_sq_error))
            .collect();
        let n = errs.len() as f64;
        let (pooled_mse_db, pooled_ci_halfwidth_db) = if errs.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let mean = errs.iter().sum::<f64>() / n;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let hw = 1.96 * (var / n).sqrt();
            (to_db(mean), to_db(mean + hw) - to_db(mean))
        };

        let targets: usize = trials.iter().map(|t| t.targets).sum();
        let detections: usize = trials.iter().map(|t| t.detections()).sum();
        let dop: Vec<f64> = trials
            .iter()
            .flat_map(|t| t.matched.iter().map(MatchedPair::doppler_sq_error))
            .collect();
        let doppler_rmse_hz = if dop.is_empty() {
            f64::NAN
        } else {
            (dop.iter().sum::<f64>() / dop.len() as f64).sqrt()
        };
        let clutter_suppression_db = if suppression.is_empty() {
            None
        } else {
            Some(to_db(suppression.iter().sum::<f64>() / suppression.len() as f64))
        };

        Self {
            snr_db,
            mode,
            trials: trials.len(),
            mse_db,
            pooled_mse_db,
            pooled_ci_halfwidth_db,
            det_rate: if targets == 0 { 1.0 } else { detections as f64 / targets as f64 },
            false_alarms: trials.iter().map(|t| t.false_alarms).sum(),
            clutter_detections: trials.iter().map(|t| t.clutter_detections).sum(),
            doppler_rmse_hz,
            runtimes_s,
            clutter_suppression_db,
        }
    }
}
