//! Randomized multipath scenes with clutter and path-loss driven amplitudes.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{SystemConfig, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::signal::{make_ssb_schedule, PathParams, SsbSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClutterDoppler {
    /// Exactly static.
    Zero,
    /// Uniform within ± the configured clutter bound.
    WithinBound,
}

/// Whether drawn distances are the one-way target range (τ = 2d/c) or the
/// total propagation length (τ = d/c).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceConvention {
    OneWay,
    RoundTrip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub path_count: [usize; 2],
    pub angle_span_deg: [f64; 2],
    pub base_distance_m: [f64; 2],
    pub base_doppler_hz: [f64; 2],
    pub angle_offset_deg: [f64; 2],
    pub distance_offset_m: [f64; 2],
    pub speed_offset_mps: [f64; 2],
    pub pathloss_exponent: f64,
    pub rcs_m2: f64,
    /// Fraction of paths that are clutter, in [0, 1].
    pub clutter_fraction: f64,
    pub clutter_doppler: ClutterDoppler,
    pub distance_convention: DistanceConvention,
    /// Per-element SNR (dB) of a path at the farthest configured distance.
    pub snr_floor_db: f64,
    /// Snap generated delays onto the dictionary grid.
    pub quantize_delays: bool,
    pub pilot_seed: u64,
    pub rng_seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            path_count: [15, 25],
            angle_span_deg: [0.0, 45.0],
            base_distance_m: [0.0, 60.0],
            base_doppler_hz: [0.0, 600.0],
            angle_offset_deg: [-75.0, 75.0],
            distance_offset_m: [60.0, 120.0],
            speed_offset_mps: [-40.0, 40.0],
            pathloss_exponent: 4.0,
            rcs_m2: 1.0,
            clutter_fraction: 0.5,
            clutter_doppler: ClutterDoppler::Zero,
            distance_convention: DistanceConvention::OneWay,
            snr_floor_db: 0.0,
            quantize_delays: true,
            pilot_seed: 0,
            rng_seed: 0,
        }
    }
}

fn ordered(r: [f64; 2]) -> bool {
    r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("angle_span_deg", self.angle_span_deg),
            ("base_distance_m", self.base_distance_m),
            ("base_doppler_hz", self.base_doppler_hz),
            ("angle_offset_deg", self.angle_offset_deg),
            ("distance_offset_m", self.distance_offset_m),
            ("speed_offset_mps", self.speed_offset_mps),
        ];
        for (name, r) in ranges {
            if !ordered(r) {
                return Err(Error::InvalidConfig(format!("{name} range {r:?} is empty")));
            }
        }
        if self.path_count[0] > self.path_count[1] {
            return Err(Error::InvalidConfig(format!("path_count {:?} is empty", self.path_count)));
        }
        if self.min_distance() <= 0.0 {
            return Err(Error::InvalidConfig("distances must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.clutter_fraction) {
            return Err(Error::InvalidConfig("clutter_fraction must lie in [0, 1]".into()));
        }
        if !(self.pathloss_exponent >= 0.0) || !(self.rcs_m2 > 0.0) {
            return Err(Error::InvalidConfig("bad path-loss parameters".into()));
        }
        Ok(())
    }

    pub fn min_distance(&self) -> f64 {
        self.base_distance_m[0] + self.distance_offset_m[0]
    }

    pub fn max_distance(&self) -> f64 {
        self.base_distance_m[1] + self.distance_offset_m[1]
    }

    pub fn delay_for_distance(&self, distance_m: f64) -> f64 {
        match self.distance_convention {
            DistanceConvention::OneWay => 2.0 * distance_m / SPEED_OF_LIGHT,
            DistanceConvention::RoundTrip => distance_m / SPEED_OF_LIGHT,
        }
    }

    /// Large-scale power |b|² = K P_tx σ_rcs / d^κ, with K chosen so a path
    /// at the farthest configured distance sits at `snr_floor_db` above the
    /// per-element noise variance.
    pub fn path_power(&self, cfg: &SystemConfig, distance_m: f64) -> f64 {
        let floor = cfg.noise_variance() * 10f64.powf(self.snr_floor_db / 10.0);
        let k = floor * self.max_distance().powf(self.pathloss_exponent) / (cfg.tx_power_w() * self.rcs_m2);
        k * cfg.tx_power_w() * self.rcs_m2 / distance_m.powf(self.pathloss_exponent)
    }

    fn clutter_count(&self, paths: usize) -> usize {
        let n = (self.clutter_fraction * paths as f64).round() as usize;
        if self.clutter_fraction < 1.0 && paths > 0 {
            n.min(paths - 1)
        } else {
            n.min(paths)
        }
    }
}

/// A scene: ground-truth paths plus the SSB schedule that illuminates them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub paths: Vec<PathParams>,
    pub schedule: SsbSchedule,
}

impl Scenario {
    pub fn targets(&self) -> impl Iterator<Item = &PathParams> {
        self.paths.iter().filter(|p| !p.is_clutter)
    }

    pub fn clutter(&self) -> impl Iterator<Item = &PathParams> {
        self.paths.iter().filter(|p| p.is_clutter)
    }

    /// Multiplies every path amplitude by `factor`.
    pub fn scale_amplitudes(&mut self, factor: f64) {
        for p in &mut self.paths {
            p.amplitude *= factor;
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Writes the ground-truth sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// Maps an angle onto [-90°, 90°] with the same sine.
pub fn fold_angle_deg(deg: f64) -> f64 {
    let wrapped = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped > 90.0 {
        180.0 - wrapped
    } else if wrapped < -90.0 {
        -180.0 - wrapped
    } else {
        wrapped
    }
}

fn check_coverage(paths: &[PathParams], cfg: &SystemConfig) -> Result<()> {
    for (index, p) in paths.iter().enumerate() {
        if !cfg.delay_in_coverage(p.delay_s) {
            return Err(Error::Coverage {
                index,
                delay_s: p.delay_s,
                max_s: cfg.max_delay(),
            });
        }
    }
    Ok(())
}

/// Draws a random scene. Each path independently draws a base value and an
/// object offset and sums them; angles past ±90° are folded back into the
/// front half-plane, which leaves sin θ unchanged. A path whose
/// delay leaves the dictionary coverage is redrawn.
pub fn generate(spec: &ScenarioSpec, cfg: &SystemConfig) -> Result<Scenario> {
    spec.validate()?;
    cfg.validate()?;
    let max_delay = cfg.max_delay();
    if spec.delay_for_distance(spec.min_distance()) >= max_delay {
        return Err(Error::InvalidConfig(
            "no distance in the scenario spec falls within dictionary coverage".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let count = rng.random_range(spec.path_count[0]..=spec.path_count[1]);
    let n_clutter = spec.clutter_count(count);
    let lambda = cfg.wavelength();

    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let is_clutter = i < n_clutter;
        let (distance, mut delay) = loop {
            let d = uniform(&mut rng, spec.base_distance_m) + uniform(&mut rng, spec.distance_offset_m);
            let tau = spec.delay_for_distance(d);
            if tau < max_delay {
                break (d, tau);
            }
        };
        if spec.quantize_delays {
            delay = cfg.bin_delay(cfg.quantize_delay(delay));
        }
        let angle_deg = fold_angle_deg(uniform(&mut rng, spec.angle_span_deg) + uniform(&mut rng, spec.angle_offset_deg));
        let base_doppler = uniform(&mut rng, spec.base_doppler_hz);
        let speed = uniform(&mut rng, spec.speed_offset_mps);
        let doppler = if is_clutter {
            match spec.clutter_doppler {
                ClutterDoppler::Zero => 0.0,
                ClutterDoppler::WithinBound => {
                    let b = cfg.clutter_doppler_bound_hz;
                    uniform(&mut rng, [-b, b])
                }
            }
        } else {
            base_doppler + 2.0 * speed / lambda
        };
        let phase = rng.random_range(0.0..2.0 * PI);
        let amplitude = Complex64::from_polar(spec.path_power(cfg, distance).sqrt(), phase);
        paths.push(PathParams {
            delay_s: delay,
            doppler_hz: doppler,
            angle_rad: angle_deg.to_radians(),
            amplitude,
            is_clutter,
        });
    }

    Ok(Scenario {
        paths,
        schedule: make_ssb_schedule(cfg, spec.pilot_seed),
    })
}

/// Deterministic scene from explicit targets and clutter, passed through
/// unchanged apart from the clutter flag.
pub fn fixed_target_scene(
    targets: &[PathParams],
    clutter: &[PathParams],
    cfg: &SystemConfig,
    pilot_seed: u64,
) -> Result<Scenario> {
    let paths: Vec<PathParams> = targets
        .iter()
        .map(|p| PathParams { is_clutter: false, ..*p })
        .chain(clutter.iter().map(|p| PathParams { is_clutter: true, ..*p }))
        .collect();
    check_coverage(&paths, cfg)?;
    Ok(Scenario {
        paths,
        schedule: make_ssb_schedule(cfg, pilot_seed),
    })
}
