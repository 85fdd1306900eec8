//! Multipulse clutter cancellation on raw received burst sets, pilot
//! removal and assembly of the N×Υ measurement matrix.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::signal::{ReceivedCube, SsbSchedule};

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Canceller taps `(-1)^p C(P, p)`; tap `p` multiplies the burst set `p`
/// repetitions before the current one.
pub fn canceller_weights(order: usize) -> Vec<f64> {
    (0..=order)
        .map(|p| if p % 2 == 0 { 1.0 } else { -1.0 } * binomial(order, p))
        .collect()
}

/// Frequency response `(2j sin(π f_D N_s T_s))^P e^{-jπ P f_D N_s T_s}`.
pub fn canceller_gain(doppler_hz: f64, order: usize, burst_spacing: usize, symbol_period: f64) -> Complex64 {
    let x = PI * doppler_hz * burst_spacing as f64 * symbol_period;
    Complex64::new(0.0, 2.0 * x.sin()).powu(order as u32) * Complex64::cis(-(order as f64) * x)
}

/// Noise power gain of the canceller, Σ_p C(P,p)² = C(2P, P).
pub fn noise_gain(order: usize) -> f64 {
    binomial(2 * order, order)
}

/// One burst set's worth of processed samples, `[slot][subcarrier][antenna]`.
///
/// Produced by the canceller, and also by the baselines that bypass it.
#[derive(Debug, Clone, PartialEq)]
pub struct CancelledCube {
    pub samples: Vec<Complex64>,
    pub num_antennas: usize,
    pub num_subcarriers: usize,
    pub num_slots: usize,
    /// Absolute index of the burst set the output is aligned with.
    pub reference_burst: usize,
    pub effective_noise_var: f64,
}

impl CancelledCube {
    /// Takes stored burst `burst` of `cube` unprocessed.
    pub fn from_burst(cube: &ReceivedCube, burst: usize) -> Self {
        Self {
            samples: cube.burst(burst).to_vec(),
            num_antennas: cube.num_antennas,
            num_subcarriers: cube.num_subcarriers,
            num_slots: cube.num_slots,
            reference_burst: cube.first_burst + burst,
            effective_noise_var: cube.noise_variance,
        }
    }

    pub fn vector(&self, slot: usize, n: usize) -> &[Complex64] {
        let o = (slot * self.num_subcarriers + n) * self.num_antennas;
        &self.samples[o..o + self.num_antennas]
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `ỹ_{n,t} = Σ_{p=0}^{P} (-1)^p C(P,p) y_{n,t-pN_s}` over a cube holding
/// exactly P+1 burst sets in chronological order; the output is aligned with
/// the last one.
pub fn cancel(cube: &ReceivedCube, order: usize) -> Result<CancelledCube> {
    if cube.num_bursts != order + 1 {
        return Err(Error::BurstCount {
            expected: order + 1,
            actual: cube.num_bursts,
        });
    }
    let weights = canceller_weights(order);
    let newest = cube.num_bursts - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); cube.burst_len()];
    for (p, w) in weights.iter().enumerate() {
        for (o, y) in out.iter_mut().zip(cube.burst(newest - p)) {
            *o += *w * *y;
        }
    }
    Ok(CancelledCube {
        samples: out,
        num_antennas: cube.num_antennas,
        num_subcarriers: cube.num_subcarriers,
        num_slots: cube.num_slots,
        reference_burst: cube.first_burst + newest,
        effective_noise_var: cube.noise_variance * noise_gain(order),
    })
}

/// Removes the pilots: `r_{n,t} = s*_{n,t} ỹ_{n,t}`.
pub fn demodulate(frame: &CancelledCube, schedule: &SsbSchedule) -> Result<CancelledCube> {
    if schedule.num_slots() != frame.num_slots || schedule.num_subcarriers != frame.num_subcarriers {
        return Err(Error::Dimension("schedule does not match the frame".into()));
    }
    let mut out = frame.clone();
    let m = frame.num_antennas;
    for slot in 0..frame.num_slots {
        for n in 0..frame.num_subcarriers {
            let s = schedule.pilot(slot, n).conj();
            let o = (slot * frame.num_subcarriers + n) * m;
            for r in &mut out.samples[o..o + m] {
                *r *= s;
            }
        }
    }
    Ok(out)
}

/// The composite observation R = [R̃_1, …, R̃_G].
///
/// Row `n` is subcarrier `n`; column `((g-1)·3 + (k-1))·M + m` holds antenna
/// `m` of sensing symbol `k` of SSB `g`, i.e. SSB outermost, symbol next,
/// antenna innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    pub matrix: CMatrix,
    pub num_antennas: usize,
    pub num_ssb: usize,
}

impl MeasurementMatrix {
    /// Column of antenna `m` (0-based) in symbol `k` (1..=3) of SSB `g` (1-based).
    pub fn column_index(num_antennas: usize, g: usize, k: usize, m: usize) -> usize {
        ((g - 1) * 3 + (k - 1)) * num_antennas + m
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// CSV dump with header `row,col,re,im`, one line per entry, row-major.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row", "col", "re", "im"])?;
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                let z = self.matrix[(i, j)];
                w.write_record(&[i.to_string(), j.to_string(), z.re.to_string(), z.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Flat little-endian dump: `u64 rows, u64 cols`, then row-major
    /// `(re, im)` f64 pairs.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + 16 * self.rows() * self.cols());
        buf.extend_from_slice(&(self.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.cols() as u64).to_le_bytes());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                let z = self.matrix[(i, j)];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>, num_antennas: usize, num_ssb: usize) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let word = |i: usize| -> Result<[u8; 8]> {
            bytes
                .get(8 * i..8 * i + 8)
                .map(|b| b.try_into().unwrap())
                .ok_or_else(|| Error::Dimension("truncated measurement dump".into()))
        };
        let rows = u64::from_le_bytes(word(0)?) as usize;
        let cols = u64::from_le_bytes(word(1)?) as usize;
        if bytes.len() != 16 + 16 * rows * cols {
            return Err(Error::Dimension("measurement dump has the wrong length".into()));
        }
        let mut matrix = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let w = 2 + 2 * (i * cols + j);
                matrix[(i, j)] = Complex64::new(f64::from_le_bytes(word(w)?), f64::from_le_bytes(word(w + 1)?));
            }
        }
        Ok(Self {
            matrix,
            num_antennas,
            num_ssb,
        })
    }
}

/// Stacks the demodulated vectors into R (see [`MeasurementMatrix`] for the
/// column order).
pub fn assemble(frame: &CancelledCube, cfg: &SystemConfig) -> Result<MeasurementMatrix> {
    if frame.num_slots != cfg.symbols_per_burst() {
        return Err(Error::Dimension(format!(
            "frame holds {} sensing symbols, expected {}",
            frame.num_slots,
            cfg.symbols_per_burst()
        )));
    }
    if frame.num_antennas != cfg.num_antennas || frame.num_subcarriers != cfg.occupied_subcarriers {
        return Err(Error::Dimension("frame shape does not match the config".into()));
    }
    let m = frame.num_antennas;
    let matrix = CMatrix::from_fn(frame.num_subcarriers, frame.num_slots * m, |n, col| {
        frame.vector(col / m, n)[col % m]
    });
    Ok(MeasurementMatrix {
        matrix,
        num_antennas: m,
        num_ssb: cfg.num_ssb,
    })
}
