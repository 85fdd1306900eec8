//! Multiple-measurement-vector UAMP-SBL.
//!
//! Solves `R = C′ A + Z` for a row-sparse `A` after the unitary transform
//! `F = Uᴴ R`, `Φ = ΛV`. Every column runs its own AMP recursion while all
//! columns share one precision vector γ̂ and one noise precision β̂; the
//! shared γ̂ is what ties the columns to a common support.
//!
//! Dimension convention: the measurement length is N (subcarriers) and the
//! sparse length is N_p (dictionary columns). β̂ therefore uses Υ·N
//! measurements, and the τ_q, τ_x, γ̂ and ε′ updates average over N_p.
//!
//! R is divided by its RMS entry before iterating and the results are
//! scaled back, so the unit initialization of γ̂ and β̂ is meaningful
//! whatever the physical power level.
//!
//! Rows whose precision has run far above the smallest one carry nothing a
//! detector could report. Once past a short warm-up they are pinned to zero
//! and left out of the two products with Φ, which is where the time goes.
//! Their γ̂ keeps updating so ε′ sees the same population as without pruning.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dictionary::DelayDictionary;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, matmul, matmul_into, CMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// δ_x: stop when the mean relative change of x̂ drops to this.
    pub tolerance: f64,
    /// t_max
    pub max_iterations: usize,
    /// Rows whose γ̂ exceeds this multiple of the smallest γ̂ are frozen at
    /// zero and dropped from the matrix products. `None` keeps every row.
    pub prune_ratio: Option<f64>,
    pub record_trace: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 2000,
            prune_ratio: Some(1e4),
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub relative_change: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct SparseEstimate {
    /// Â, N_p × Υ.
    pub coefficients: CMatrix,
    pub gamma: Vec<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl SparseEstimate {
    pub fn row_norms(&self) -> Vec<f64> {
        self.coefficients.row_iter().map(|r| r.norm()).collect()
    }
}

// Keeps ln γ̂ finite for rows that have been driven to zero.
const GAMMA_CEILING: f64 = 1e250;
// Iterations before any row may be pruned.
const PRUNE_WARMUP: usize = 20;

fn relative(diff: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        diff / norm
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn solve_mmv(r: &CMatrix, dict: &DelayDictionary, params: &SolverParams) -> Result<SparseEstimate> {
    let n = dict.rows();
    let np = dict.cols();
    let k = dict.rank();
    let cols = r.ncols();
    if r.nrows() != n {
        return Err(Error::Dimension(format!(
            "measurement has {} rows, dictionary has {}",
            r.nrows(),
            n
        )));
    }
    if !(params.tolerance > 0.0) || params.max_iterations == 0 {
        return Err(Error::InvalidConfig("solver needs tolerance > 0 and max_iterations >= 1".into()));
    }
    if cols == 0 {
        return Ok(SparseEstimate {
            coefficients: CMatrix::zeros(np, 0),
            gamma: vec![1.0; np],
            beta: 1.0,
            iterations: 0,
            converged: true,
            trace: Vec::new(),
        });
    }

    let energy = frobenius_sq(r);
    if !energy.is_finite() {
        return Err(Error::Diverged {
            iteration: 0,
            quantity: "measurement",
        });
    }
    let scale = if energy > 0.0 {
        (energy / (n * cols) as f64).sqrt()
    } else {
        1.0
    };

    // step 1: F = Uᴴ R, split into the rows Φ reaches and the null rows.
    let f_full = matmul(&dict.u_h, r).unscale(scale);
    let f = f_full.rows(0, k).into_owned();
    let null_energy: f64 = f_full.rows(k, n - k).iter().map(|z| z.norm_sqr()).sum();
    // step 2
    let lambda = &dict.lambda()[..k];

    // step 3
    let mut tau_x = vec![1.0; cols];
    let mut x = CMatrix::zeros(np, cols);
    let mut eps = 0.001;
    let mut gamma = vec![1.0; np];
    let mut beta = 1.0;
    let mut s = CMatrix::zeros(k, cols);
    let mut tau_q = vec![0.0; cols];

    let mut p = CMatrix::zeros(k, cols);
    // Live rows and the matching slices of Φ, Φᴴ and x̂.
    let mut active: Vec<usize> = (0..np).collect();
    let mut phi_a = dict.phi.clone();
    let mut phi_h_a = dict.phi_h.clone();
    let mut x_a = CMatrix::zeros(np, cols);
    let mut back = CMatrix::zeros(np, cols);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut t = 0;

    while t < params.max_iterations {
        // steps 5–8, accumulating the step-9 sums as we go
        for (a, &j) in active.iter().enumerate() {
            x_a.row_mut(a).copy_from(&x.row(j));
        }
        matmul_into(&phi_a, &x_a, &mut p);
        let mut resid = null_energy;
        let mut vh_sum = 0.0;
        for c in 0..cols {
            let tx = tau_x[c];
            for i in 0..k {
                let tp = tx * lambda[i];
                let pi = p[(i, c)] - s[(i, c)] * tp;
                p[(i, c)] = pi;
                let denom = 1.0 + beta * tp;
                let h = (f[(i, c)] * (beta * tp) + pi) / denom;
                resid += (f[(i, c)] - h).norm_sqr();
                vh_sum += tp / denom;
            }
        }
        // step 9
        beta = (cols * n) as f64 / (resid + vh_sum);
        if !beta.is_finite() {
            return Err(Error::Diverged {
                iteration: t,
                quantity: "noise precision",
            });
        }

        // steps 10–12
        let inv_beta = 1.0 / beta;
        for c in 0..cols {
            let tx = tau_x[c];
            let mut acc = 0.0;
            for i in 0..k {
                let ts = 1.0 / (tx * lambda[i] + inv_beta);
                s[(i, c)] = (f[(i, c)] - p[(i, c)]) * ts;
                acc += lambda[i] * ts;
            }
            tau_q[c] = np as f64 / acc;
            if !tau_q[c].is_finite() {
                return Err(Error::Diverged {
                    iteration: t,
                    quantity: "tau_q",
                });
            }
        }

        // steps 13–15
        matmul_into(&phi_h_a, &s, &mut back);
        let mut change = 0.0;
        for c in 0..cols {
            let tq = tau_q[c];
            let mut sum_inv = 0.0;
            let mut diff = 0.0;
            let mut norm = 0.0;
            for g in &gamma {
                sum_inv += 1.0 / (1.0 + tq * g);
            }
            for (a, &j) in active.iter().enumerate() {
                let updated = (x[(j, c)] + back[(a, c)] * tq) / (1.0 + tq * gamma[j]);
                diff += (updated - x[(j, c)]).norm_sqr();
                norm += updated.norm_sqr();
                x[(j, c)] = updated;
            }
            if !norm.is_finite() {
                return Err(Error::Diverged {
                    iteration: t,
                    quantity: "coefficients",
                });
            }
            tau_x[c] = tq / np as f64 * sum_inv;
            change += relative(diff, norm);
        }
        change /= cols as f64;

        // step 16, with ε′ from the previous pass
        let tau_x_mean = tau_x.iter().sum::<f64>() / cols as f64;
        for (j, g) in gamma.iter_mut().enumerate() {
            let power = x.row(j).iter().map(|z| z.norm_sqr()).sum::<f64>() / cols as f64;
            *g = ((2.0 * eps + 1.0) / (power + tau_x_mean)).min(GAMMA_CEILING);
        }
        if let Some(ratio) = params.prune_ratio {
            if t + 1 >= PRUNE_WARMUP {
                let floor = gamma.iter().copied().fold(f64::INFINITY, f64::min) * ratio;
                let before = active.len();
                active.retain(|&j| {
                    let keep = gamma[j] <= floor;
                    if !keep {
                        x.row_mut(j).fill(Complex64::new(0.0, 0.0));
                    }
                    keep
                });
                if active.len() != before {
                    phi_a = dict.phi.select_columns(&active);
                    phi_h_a = dict.phi_h.select_rows(&active);
                    x_a = CMatrix::zeros(active.len(), cols);
                    back = CMatrix::zeros(active.len(), cols);
                }
            }
        }

        // step 17
        let mean = gamma.iter().sum::<f64>() / np as f64;
        let mean_log = gamma.iter().map(|g| g.ln()).sum::<f64>() / np as f64;
        eps = 0.5 * (mean.ln() - mean_log).max(0.0).sqrt();
        if !eps.is_finite() {
            return Err(Error::Diverged {
                iteration: t,
                quantity: "shape parameter",
            });
        }

        t += 1;
        if params.record_trace {
            trace.push(TraceRow {
                iteration: t,
                relative_change: change,
                beta: beta / (scale * scale),
            });
        }
        if change <= params.tolerance {
            converged = true;
            break;
        }
    }

    let s2 = scale * scale;
    Ok(SparseEstimate {
        coefficients: x.scale(scale),
        gamma: gamma.into_iter().map(|g| g / s2).collect(),
        beta: beta / s2,
        iterations: t,
        converged,
        trace,
    })
}

/// Rows of Â whose 2-norm is at least `rel_threshold` times the largest row
/// norm, in ascending order. An all-zero Â yields no rows.
pub fn detect_support(est: &SparseEstimate, rel_threshold: f64) -> Vec<usize> {
    support_from_norms(&est.row_norms(), rel_threshold)
}

pub fn support_from_norms(norms: &[f64], rel_threshold: f64) -> Vec<usize> {
    let max = norms.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    norms
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= rel_threshold * max)
        .map(|(i, _)| i)
        .collect()
}

/// Least-squares fit of R on the dictionary columns in `support`; returns
/// the |support| × Υ coefficient block.
pub fn least_squares_on_support(r: &CMatrix, dict: &DelayDictionary, support: &[usize]) -> Result<CMatrix> {
    if support.is_empty() {
        return Ok(CMatrix::zeros(0, r.ncols()));
    }
    let sub = CMatrix::from_fn(dict.rows(), support.len(), |i, j| dict.matrix[(i, support[j])]);
    let svd = sub.svd(true, true);
    svd.solve(r, 1e-12)
        .map_err(|e| Error::Dimension(format!("least-squares refit failed: {e}")))
}

/// Writes `iteration,relative_change,beta` rows.
pub fn write_trace_csv(trace: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["iteration", "relative_change", "beta"])?;
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
