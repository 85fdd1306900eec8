//! Wall-clock scaling of the canceller.

use std::hint::black_box;
use std::time::Instant;

use pmn_core::canceller::cancel;
use pmn_core::signal::ReceivedCube;
use pmn_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best-of-`reps` time of one `cancel` call on a random cube with
/// `order + 1` burst sets of `slots × n × m` samples.
pub fn time_cancel(order: usize, n: usize, m: usize, slots: usize, reps: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cube = ReceivedCube::zeros(m, n, slots, order + 1, 0, 1.0);
    for z in cube.samples.iter_mut() {
        *z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    }
    let mut best = f64::INFINITY;
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let out = cancel(black_box(&cube), order).expect("cube holds order + 1 bursts");
        black_box(&out);
        best = best.min(start.elapsed().as_secs_f64());
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least-squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}
