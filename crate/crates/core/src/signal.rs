//! Downlink echo model: ULA responses, per-subcarrier channel matrices, the
//! SSB beam sweep and noisy reception over consecutive burst sets.
//!
//! Symbol bookkeeping: SSB `g` (1-based) occupies symbols `4g .. 4g + 3` of a
//! burst set and only symbols `t = 4g + k`, `k = 1, 2, 3` are sensed. Burst
//! set `b` starts at absolute symbol `b * N_s`. Sensing symbols are stored in
//! slot order `(g - 1) * 3 + (k - 1)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Ground truth for one propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub delay_s: f64,
    pub doppler_hz: f64,
    /// AoD = AoA for monostatic downlink sensing.
    pub angle_rad: f64,
    pub amplitude: Complex64,
    pub is_clutter: bool,
}

impl PathParams {
    pub fn target(delay_s: f64, doppler_hz: f64, angle_rad: f64, amplitude: Complex64) -> Self {
        Self {
            delay_s,
            doppler_hz,
            angle_rad,
            amplitude,
            is_clutter: false,
        }
    }

    pub fn clutter(delay_s: f64, angle_rad: f64, amplitude: Complex64) -> Self {
        Self {
            delay_s,
            doppler_hz: 0.0,
            angle_rad,
            amplitude,
            is_clutter: true,
        }
    }

    pub fn power(&self) -> f64 {
        self.amplitude.norm_sqr()
    }

    pub fn sin_theta(&self) -> f64 {
        self.angle_rad.sin()
    }
}

/// ULA response with half-wavelength spacing: element `m` is `e^{jπ m sin θ}`.
pub fn array_response(num_antennas: usize, theta: f64) -> Vec<Complex64> {
    let phase = PI * theta.sin();
    (0..num_antennas)
        .map(|m| Complex64::cis(phase * m as f64))
        .collect()
}

/// Absolute symbol index of sensing symbol `(g, k)` in burst set `burst`.
pub fn symbol_index(cfg: &SystemConfig, burst: usize, g: usize, k: usize) -> usize {
    burst * cfg.burst_spacing + 4 * g + k
}

/// Frequency-domain M×M channel for subcarrier `n` and absolute symbol `t`.
pub fn channel_matrix(paths: &[PathParams], n: usize, t: usize, cfg: &SystemConfig) -> DMatrix<Complex64> {
    let m = cfg.num_antennas;
    let df = cfg.subcarrier_spacing();
    let ts = cfg.symbol_period();
    let mut h = DMatrix::zeros(m, m);
    for path in paths {
        let a = array_response(m, path.angle_rad);
        let coeff = path.amplitude
            * Complex64::cis(-2.0 * PI * n as f64 * path.delay_s * df)
            * Complex64::cis(2.0 * PI * t as f64 * path.doppler_hz * ts);
        for i in 0..m {
            for j in 0..m {
                h[(i, j)] += coeff * a[i] * a[j];
            }
        }
    }
    h
}

/// Beam sweep and pilot content of one burst set, repeated identically in
/// every burst set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsbSchedule {
    pub num_antennas: usize,
    pub num_ssb: usize,
    pub num_subcarriers: usize,
    pub beam_angles_rad: Vec<f64>,
    /// `beams[g - 1]` is the unit-norm beamformer of SSB `g`, held constant
    /// over its three sensing symbols.
    pub beams: Vec<Vec<Complex64>>,
    /// Unit-modulus pilots, slot-major: `pilots[slot * N_occ + n]`.
    pub pilots: Vec<Complex64>,
}

impl SsbSchedule {
    pub fn num_slots(&self) -> usize {
        3 * self.num_ssb
    }

    /// Beamformer of SSB `g` (1-based).
    pub fn beam(&self, g: usize) -> &[Complex64] {
        &self.beams[g - 1]
    }

    /// Beamformer used in slot `slot`.
    pub fn slot_beam(&self, slot: usize) -> &[Complex64] {
        &self.beams[slot / 3]
    }

    pub fn pilot(&self, slot: usize, n: usize) -> Complex64 {
        self.pilots[slot * self.num_subcarriers + n]
    }

    /// Same schedule with every pilot set to 1.
    pub fn with_unit_pilots(mut self) -> Self {
        self.pilots.fill(Complex64::new(1.0, 0.0));
        self
    }
}

/// Builds the SSB schedule: QPSK-phase pilots drawn from `pilot_seed`, and G
/// conjugate steering beams `a*(M, φ_g) / √M` spread uniformly over the
/// configured sector.
pub fn make_ssb_schedule(cfg: &SystemConfig, pilot_seed: u64) -> SsbSchedule {
    let m = cfg.num_antennas;
    let g_count = cfg.num_ssb;
    let [lo, hi] = cfg.beam_sector_deg;
    let beam_angles_rad: Vec<f64> = (0..g_count)
        .map(|g| {
            let deg = if g_count == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * g as f64 / (g_count - 1) as f64
            };
            deg.to_radians()
        })
        .collect();
    let norm = (m as f64).sqrt();
    let beams = beam_angles_rad
        .iter()
        .map(|&phi| array_response(m, phi).into_iter().map(|a| a.conj() / norm).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(pilot_seed);
    let n_pilots = 3 * g_count * cfg.occupied_subcarriers;
    let pilots = (0..n_pilots)
        .map(|_| {
            let quadrant = rng.random_range(0..4u32);
            Complex64::cis(PI / 4.0 + quadrant as f64 * PI / 2.0)
        })
        .collect();

    SsbSchedule {
        num_antennas: m,
        num_ssb: g_count,
        num_subcarriers: cfg.occupied_subcarriers,
        beam_angles_rad,
        beams,
        pilots,
    }
}

/// Received samples over consecutive burst sets, laid out
/// `[burst][slot][subcarrier][antenna]` with the antenna axis contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedCube {
    pub samples: Vec<Complex64>,
    pub num_antennas: usize,
    pub num_subcarriers: usize,
    pub num_slots: usize,
    pub num_bursts: usize,
    /// Absolute index of the first stored burst set.
    pub first_burst: usize,
    pub noise_variance: f64,
}

impl ReceivedCube {
    pub fn zeros(
        num_antennas: usize,
        num_subcarriers: usize,
        num_slots: usize,
        num_bursts: usize,
        first_burst: usize,
        noise_variance: f64,
    ) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); num_antennas * num_subcarriers * num_slots * num_bursts],
            num_antennas,
            num_subcarriers,
            num_slots,
            num_bursts,
            first_burst,
            noise_variance,
        }
    }

    pub fn burst_len(&self) -> usize {
        self.num_antennas * self.num_subcarriers * self.num_slots
    }

    fn offset(&self, burst: usize, slot: usize, n: usize) -> usize {
        ((burst * self.num_slots + slot) * self.num_subcarriers + n) * self.num_antennas
    }

    /// Antenna vector `y_{n,t}` of stored burst `burst` (0-based within the cube).
    pub fn vector(&self, burst: usize, slot: usize, n: usize) -> &[Complex64] {
        let o = self.offset(burst, slot, n);
        &self.samples[o..o + self.num_antennas]
    }

    pub fn get(&self, burst: usize, slot: usize, n: usize, m: usize) -> Complex64 {
        self.samples[self.offset(burst, slot, n) + m]
    }

    pub fn burst(&self, burst: usize) -> &[Complex64] {
        let len = self.burst_len();
        &self.samples[burst * len..(burst + 1) * len]
    }

    /// Copy of `len` consecutive bursts starting at stored burst `start`.
    pub fn window(&self, start: usize, len: usize) -> Result<ReceivedCube> {
        if start + len > self.num_bursts {
            return Err(Error::BurstCount {
                expected: start + len,
                actual: self.num_bursts,
            });
        }
        let bl = self.burst_len();
        Ok(ReceivedCube {
            samples: self.samples[start * bl..(start + len) * bl].to_vec(),
            num_antennas: self.num_antennas,
            num_subcarriers: self.num_subcarriers,
            num_slots: self.num_slots,
            num_bursts: len,
            first_burst: self.first_burst + start,
            noise_variance: self.noise_variance,
        })
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiveOptions {
    pub num_bursts: usize,
    pub first_burst: usize,
    /// Per-element noise variance; 0 gives a noiseless cube.
    pub noise_variance: f64,
    pub seed: u64,
}

impl ReceiveOptions {
    /// P + 1 burst sets at the configured thermal noise level.
    pub fn for_canceller(cfg: &SystemConfig, seed: u64) -> Self {
        Self {
            num_bursts: cfg.canceller_order + 1,
            first_burst: 0,
            noise_variance: cfg.noise_variance(),
            seed,
        }
    }

    pub fn noiseless(num_bursts: usize) -> Self {
        Self {
            num_bursts,
            first_burst: 0,
            noise_variance: 0.0,
            seed: 0,
        }
    }
}

/// Simulates `y_{n,t} = H_{n,t} w_t s_{n,t} + z_{n,t}` for every sensing
/// symbol of `opts.num_bursts` consecutive burst sets.
pub fn transmit_receive(
    paths: &[PathParams],
    schedule: &SsbSchedule,
    cfg: &SystemConfig,
    opts: &ReceiveOptions,
) -> Result<ReceivedCube> {
    let m = cfg.num_antennas;
    let n_occ = cfg.occupied_subcarriers;
    let slots = cfg.symbols_per_burst();
    if schedule.num_antennas != m || schedule.num_subcarriers != n_occ || schedule.num_ssb != cfg.num_ssb {
        return Err(Error::Dimension("schedule does not match the system config".into()));
    }
    let ts = cfg.symbol_period();
    let last_symbol = symbol_index(cfg, opts.first_burst + opts.num_bursts.max(1) - 1, cfg.num_ssb, 3);
    let span_s = last_symbol as f64 * ts;
    if span_s > cfg.max_coherence_s {
        return Err(Error::CoherenceGuard {
            span_s,
            limit_s: cfg.max_coherence_s,
        });
    }

    let df = cfg.subcarrier_spacing();
    let mut cube = ReceivedCube::zeros(m, n_occ, slots, opts.num_bursts, opts.first_burst, opts.noise_variance);

    // Per-path pieces that do not depend on time.
    struct Prepared {
        steering: Vec<Complex64>,
        delay_phasor: Vec<Complex64>,
        beam_gain: Vec<Complex64>,
        amplitude: Complex64,
        doppler_hz: f64,
    }
    let prepared: Vec<Prepared> = paths
        .iter()
        .map(|p| {
            let steering = array_response(m, p.angle_rad);
            let delay_phasor = (0..n_occ)
                .map(|n| {
                    let n_abs = (cfg.first_subcarrier + n) as f64;
                    Complex64::cis(-2.0 * PI * n_abs * p.delay_s * df)
                })
                .collect();
            // a^T(θ) w_g for every SSB
            let beam_gain = schedule
                .beams
                .iter()
                .map(|w| steering.iter().zip(w).map(|(a, w)| a * w).sum())
                .collect();
            Prepared {
                steering,
                delay_phasor,
                beam_gain,
                amplitude: p.amplitude,
                doppler_hz: p.doppler_hz,
            }
        })
        .collect();

    for b in 0..opts.num_bursts {
        for g in 1..=cfg.num_ssb {
            for k in 1..=3 {
                let slot = (g - 1) * 3 + (k - 1);
                let t = symbol_index(cfg, opts.first_burst + b, g, k);
                for path in &prepared {
                    let c = path.amplitude
                        * Complex64::cis(2.0 * PI * t as f64 * path.doppler_hz * ts)
                        * path.beam_gain[g - 1];
                    for n in 0..n_occ {
                        let scale = c * path.delay_phasor[n] * schedule.pilot(slot, n);
                        let o = cube.offset(b, slot, n);
                        for (y, a) in cube.samples[o..o + m].iter_mut().zip(&path.steering) {
                            *y += scale * a;
                        }
                    }
                }
            }
        }
    }

    if opts.noise_variance > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let sd = (opts.noise_variance / 2.0).sqrt();
        for y in cube.samples.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *y += Complex64::new(re * sd, im * sd);
        }
    }
    Ok(cube)
}
