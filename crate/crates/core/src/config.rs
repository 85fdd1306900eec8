//! Physical-layer and algorithm constants.
//!
//! Defaults reproduce the reference numerology: a 4-antenna RRU at 2.35 GHz
//! with 100 MHz bandwidth, 512 subcarriers of which 240 carry the SSB, four
//! SSBs per burst set and a 512-point delay grid giving 10 ns range bins.

use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Index origin of the delay grid columns.
///
/// `OneBased` uses bins `1..=N_p`, so a zero delay snaps to bin 1.
/// `ZeroBased` uses bins `0..N_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridOrigin {
    OneBased,
    ZeroBased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Antennas in the ULA (M).
    pub num_antennas: usize,
    /// Total subcarriers (N); sets the subcarrier spacing B/N.
    pub num_subcarriers: usize,
    /// Subcarriers occupied by the SSB; these are the rows of the measurement.
    pub occupied_subcarriers: usize,
    /// Index of the first occupied subcarrier.
    pub first_subcarrier: usize,
    pub bandwidth_hz: f64,
    /// Cyclic prefix duration (T_p).
    pub cp_duration_s: f64,
    pub carrier_freq_hz: f64,
    /// SSBs per burst set (G).
    pub num_ssb: usize,
    /// OFDM symbols between consecutive burst sets (N_s).
    pub burst_spacing: usize,
    /// Multipulse canceller order (P).
    pub canceller_order: usize,
    /// Delay grid size (N_d).
    pub delay_grid: usize,
    /// Dictionary columns (N_p).
    pub dict_cols: usize,
    pub grid_origin: GridOrigin,
    pub tx_power_dbm: f64,
    /// Noise power spectral density (N_0).
    pub noise_psd_dbm_hz: f64,
    /// Beam sweep sector `[min, max]` in degrees.
    pub beam_sector_deg: [f64; 2],
    /// Largest |f_D| a clutter path may have.
    pub clutter_doppler_bound_hz: f64,
    /// Longest simulated observation span for which the static-parameter
    /// model is accepted.
    pub max_coherence_s: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_antennas: 4,
            num_subcarriers: 512,
            occupied_subcarriers: 240,
            first_subcarrier: 0,
            bandwidth_hz: 100e6,
            cp_duration_s: 0.36e-6,
            carrier_freq_hz: 2.35e9,
            num_ssb: 4,
            burst_spacing: 128,
            canceller_order: 2,
            delay_grid: 512,
            dict_cols: 170,
            grid_origin: GridOrigin::OneBased,
            tx_power_dbm: 30.0,
            noise_psd_dbm_hz: -174.0,
            beam_sector_deg: [-60.0, 60.0],
            clutter_doppler_bound_hz: 1.0,
            max_coherence_s: 0.1,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

impl SystemConfig {
    /// Δf = B / N.
    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth_hz / self.num_subcarriers as f64
    }

    /// T_s = N / B + T_p.
    pub fn symbol_period(&self) -> f64 {
        self.num_subcarriers as f64 / self.bandwidth_hz + self.cp_duration_s
    }

    /// Duration of one delay bin, 1 / (N_d Δf).
    pub fn range_bin(&self) -> f64 {
        1.0 / (self.delay_grid as f64 * self.subcarrier_spacing())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Repetition interval of the burst sets, N_s T_s.
    pub fn burst_period(&self) -> f64 {
        self.burst_spacing as f64 * self.symbol_period()
    }

    /// Total receiver noise power N_0 + 10 log10(B) in dBm.
    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }

    /// Per-subcarrier, per-antenna noise variance in watts: the total noise
    /// power spread evenly over the N subcarriers.
    pub fn noise_variance(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm()) / self.num_subcarriers as f64
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Sensing symbols per burst set (the last three of each SSB).
    pub fn symbols_per_burst(&self) -> usize {
        3 * self.num_ssb
    }

    /// Columns of the measurement matrix, Υ = 3 M G.
    pub fn measurement_columns(&self) -> usize {
        3 * self.num_antennas * self.num_ssb
    }

    /// Grid indices ℓ′ carried by the dictionary columns, in column order.
    pub fn grid_bins(&self) -> RangeInclusive<usize> {
        match self.grid_origin {
            GridOrigin::OneBased => 1..=self.dict_cols,
            GridOrigin::ZeroBased => 0..=self.dict_cols - 1,
        }
    }

    /// Upper end (exclusive) of delays whose nearest grid point is a
    /// dictionary column.
    pub fn max_delay(&self) -> f64 {
        (*self.grid_bins().end() as f64 + 0.5) * self.range_bin()
    }

    pub fn delay_in_coverage(&self, delay_s: f64) -> bool {
        delay_s >= 0.0 && delay_s < self.max_delay()
    }

    /// Nearest grid index for a delay, clamped into the dictionary.
    pub fn quantize_delay(&self, delay_s: f64) -> usize {
        let bins = self.grid_bins();
        let raw = (delay_s / self.range_bin()).round().max(0.0) as usize;
        raw.clamp(*bins.start(), *bins.end())
    }

    /// Delay of grid index `bin`.
    pub fn bin_delay(&self, bin: usize) -> f64 {
        bin as f64 * self.range_bin()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_antennas < 2 {
            return fail(format!("num_antennas must be >= 2, got {}", self.num_antennas));
        }
        if self.num_ssb < 1 {
            return fail("num_ssb must be >= 1".into());
        }
        if self.canceller_order < 1 {
            return fail("canceller_order must be >= 1".into());
        }
        if self.dict_cols < 1 || self.dict_cols >= self.delay_grid {
            return fail(format!(
                "need 1 <= dict_cols < delay_grid, got {} and {}",
                self.dict_cols, self.delay_grid
            ));
        }
        if self.num_subcarriers == 0 || self.occupied_subcarriers == 0 {
            return fail("subcarrier counts must be positive".into());
        }
        if self.first_subcarrier + self.occupied_subcarriers > self.num_subcarriers {
            return fail(format!(
                "occupied block {}..{} exceeds {} subcarriers",
                self.first_subcarrier,
                self.first_subcarrier + self.occupied_subcarriers,
                self.num_subcarriers
            ));
        }
        if !(self.bandwidth_hz > 0.0) || !(self.carrier_freq_hz > 0.0) {
            return fail("bandwidth and carrier frequency must be positive".into());
        }
        if !(self.cp_duration_s >= 0.0) {
            return fail("cp_duration_s must be non-negative".into());
        }
        if self.burst_spacing < 4 * self.num_ssb {
            return fail(format!(
                "burst_spacing {} is shorter than a burst set of {} symbols",
                self.burst_spacing,
                4 * self.num_ssb
            ));
        }
        if !(self.beam_sector_deg[0] <= self.beam_sector_deg[1])
            || self.beam_sector_deg.iter().any(|d| d.abs() > 90.0)
        {
            return fail(format!("bad beam sector {:?}", self.beam_sector_deg));
        }
        if !(self.clutter_doppler_bound_hz >= 0.0) || !(self.max_coherence_s > 0.0) {
            return fail("clutter bound and coherence guard must be non-negative".into());
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
