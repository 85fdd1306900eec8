//! Per-path parameter extraction from the surviving rows of Â.
//!
//! Each surviving row is one path. Its Υ entries split into G blocks of 3M
//! (one per SSB), and each block into three M-vectors, one per sensing
//! symbol, following the column order of the measurement matrix.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::canceller::canceller_gain;
use crate::config::SystemConfig;
use crate::dictionary::DelayDictionary;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::sbl::SparseEstimate;
use crate::signal::{array_response, SsbSchedule};

/// Below this |â · aᵀw| the power estimate is reported as unreliable.
pub const NOTCH_EPS: f64 = 1e-9;

/// The detected rows A′ of Â together with their grid bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedRows {
    /// A′, L̂ × Υ.
    pub rows: CMatrix,
    /// Grid bin ℓ′ of each row of A′.
    pub grid_bins: Vec<usize>,
    pub num_antennas: usize,
    pub num_ssb: usize,
}

impl PrunedRows {
    /// Keeps the rows of `est` listed in `support` (dictionary column indices).
    pub fn from_estimate(
        est: &SparseEstimate,
        dict: &DelayDictionary,
        support: &[usize],
        num_antennas: usize,
        num_ssb: usize,
    ) -> Result<Self> {
        Self::from_matrix(&est.coefficients, dict, support, num_antennas, num_ssb)
    }

    pub fn from_matrix(
        a: &CMatrix,
        dict: &DelayDictionary,
        support: &[usize],
        num_antennas: usize,
        num_ssb: usize,
    ) -> Result<Self> {
        if a.ncols() != 3 * num_antennas * num_ssb {
            return Err(Error::Dimension(format!(
                "estimate has {} columns, expected 3·M·G = {}",
                a.ncols(),
                3 * num_antennas * num_ssb
            )));
        }
        if let Some(&bad) = support.iter().find(|&&i| i >= a.nrows()) {
            return Err(Error::Dimension(format!("support row {bad} outside the estimate")));
        }
        let rows = CMatrix::from_fn(support.len(), a.ncols(), |i, j| a[(support[i], j)]);
        Ok(Self {
            rows,
            grid_bins: support.iter().map(|&i| dict.grid_bins[i]).collect(),
            num_antennas,
            num_ssb,
        })
    }

    pub fn len(&self) -> usize {
        self.grid_bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_bins.is_empty()
    }

    /// d_{i,g}: the 3M entries of row `i` belonging to SSB `g` (1-based).
    pub fn block(&self, i: usize, g: usize) -> Vec<Complex64> {
        let w = 3 * self.num_antennas;
        (0..w).map(|c| self.rows[(i, (g - 1) * w + c)]).collect()
    }

    /// The three per-symbol M-vectors of block `g` in row `i`.
    pub fn symbols(&self, i: usize, g: usize) -> [Vec<Complex64>; 3] {
        let block = self.block(i, g);
        let m = self.num_antennas;
        [0, 1, 2].map(|k| block[k * m..(k + 1) * m].to_vec())
    }

    pub fn block_norms(&self, i: usize) -> Vec<f64> {
        (1..=self.num_ssb)
            .map(|g| self.block(i, g).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }
}

/// τ̂ = ℓ′ / (N_d Δf).
pub fn estimate_delay(bin: usize, cfg: &SystemConfig) -> Result<f64> {
    let range = cfg.grid_bins();
    if !range.contains(&bin) {
        return Err(Error::GridIndex {
            index: bin,
            min: *range.start(),
            max: *range.end(),
        });
    }
    Ok(cfg.bin_delay(bin))
}

/// 1-based index of the largest block norm; ties go to the smaller index.
pub fn select_beam(block_norms: &[f64]) -> usize {
    let mut best = 0;
    for (g, &v) in block_norms.iter().enumerate() {
        if v > block_norms[best] {
            best = g;
        }
    }
    best + 1
}

fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Doppler from the symbol-to-symbol phase rotation of the chosen block.
pub fn estimate_doppler(symbols: &[Vec<Complex64>; 3], symbol_period: f64) -> Result<f64> {
    let acc = dot_conj(&symbols[0], &symbols[1]) + dot_conj(&symbols[1], &symbols[2]);
    if acc.norm() == 0.0 {
        return Err(Error::ZeroAccumulator("doppler"));
    }
    Ok(-acc.arg() / (2.0 * PI * symbol_period))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AoaEstimate {
    /// sin θ̂ after clamping to [-1, 1].
    pub sin_theta: f64,
    pub theta: f64,
    /// The raw phase ratio fell outside [-1, 1].
    pub clamped: bool,
}

/// AoA from the element-to-element phase progression of the chosen block.
pub fn estimate_aoa(symbols: &[Vec<Complex64>; 3]) -> Result<AoaEstimate> {
    let mut acc = Complex64::new(0.0, 0.0);
    for v in symbols {
        for w in v.windows(2) {
            acc += w[0] * w[1].conj();
        }
    }
    if acc.norm() == 0.0 {
        return Err(Error::ZeroAccumulator("angle"));
    }
    let raw = -acc.arg() / PI;
    let sin_theta = raw.clamp(-1.0, 1.0);
    Ok(AoaEstimate {
        sin_theta,
        theta: sin_theta.asin(),
        clamped: raw.abs() > 1.0,
    })
}

/// `|b̂|² = |Σ_j b_{t′+1}ᵀ b*_{t′+2j}| / (2M |â aᵀ(θ̂) w|²)`.
///
/// For a clean path this returns |b|² cos(2π f_D T_s); the cosine factor is
/// left in.
pub fn estimate_power(
    symbols: &[Vec<Complex64>; 3],
    gain: Complex64,
    beam: &[Complex64],
    theta_hat: f64,
) -> Result<f64> {
    let m = beam.len();
    let a = array_response(m, theta_hat);
    let beam_gain: Complex64 = a.iter().zip(beam).map(|(x, w)| x * w).sum();
    let denom = (gain * beam_gain).norm();
    if denom < NOTCH_EPS {
        return Err(Error::Notch { magnitude: denom });
    }
    let acc = dot_conj(&symbols[1], &symbols[0]) + dot_conj(&symbols[1], &symbols[2]);
    Ok(acc.norm() / (2.0 * m as f64 * denom * denom))
}

/// How the processing in front of the solver scaled a path of Doppler f_D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainModel {
    /// P-th order canceller over bursts `burst_spacing` symbols apart.
    Canceller { order: usize },
    /// No slow-time filtering.
    Unity,
}

impl GainModel {
    pub fn gain(&self, doppler_hz: f64, cfg: &SystemConfig) -> Complex64 {
        match *self {
            GainModel::Canceller { order } => {
                canceller_gain(doppler_hz, order, cfg.burst_spacing, cfg.symbol_period())
            }
            GainModel::Unity => Complex64::new(1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathEstimate {
    pub grid_bin: usize,
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub sin_theta: f64,
    pub theta: f64,
    pub sin_clamped: bool,
    /// |b̂|²; `None` when f̂_D sits in a canceller notch.
    pub power: Option<f64>,
    /// Chosen SSB, 1-based.
    pub beam: usize,
}

/// Runs beam selection and the delay, Doppler, angle and power estimators
/// on every pruned row.
pub fn extract_paths(
    pruned: &PrunedRows,
    schedule: &SsbSchedule,
    cfg: &SystemConfig,
    gain: GainModel,
) -> Result<Vec<PathEstimate>> {
    let ts = cfg.symbol_period();
    (0..pruned.len())
        .map(|i| {
            let bin = pruned.grid_bins[i];
            let delay_s = estimate_delay(bin, cfg)?;
            let beam = select_beam(&pruned.block_norms(i));
            let symbols = pruned.symbols(i, beam);
            let doppler_hz = estimate_doppler(&symbols, ts)?;
            let aoa = estimate_aoa(&symbols)?;
            let power = match estimate_power(&symbols, gain.gain(doppler_hz, cfg), schedule.beam(beam), aoa.theta) {
                Ok(p) => Some(p),
                Err(Error::Notch { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(PathEstimate {
                grid_bin: bin,
                delay_s,
                doppler_hz,
                sin_theta: aoa.sin_theta,
                theta: aoa.theta,
                sin_clamped: aoa.clamped,
                power,
                beam,
            })
        })
        .collect()
}
