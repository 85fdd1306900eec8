//! On-grid delay dictionary C′ and its unitary factorization.

use std::f64::consts::PI;

use nalgebra::SVD;
use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// C′ with entries `e^{-j2π n ℓ′ / N_d}` plus its factorization
/// `C′ = U Λ V`, computed once and shared read-only by every solve.
///
/// `U` is the full N×N unitary. When N > N_p the SVD is taken of C′ padded
/// with zero columns, so the trailing N − N_p singular values are zero and
/// `λ` is zero there.
#[derive(Debug, Clone)]
pub struct DelayDictionary {
    /// C′, N × N_p.
    pub matrix: CMatrix,
    /// Grid index ℓ′ of each column.
    pub grid_bins: Vec<usize>,
    pub delay_grid: usize,
    /// U, N × N.
    pub u: CMatrix,
    /// Uᴴ, kept to avoid recomputing it per solve.
    pub u_h: CMatrix,
    /// Diagonal of Λ, length N (descending, zero-padded).
    pub singular_values: Vec<f64>,
    /// Top `rank()` rows of Φ = ΛV, shape rank × N_p.
    pub phi: CMatrix,
    /// Φᴴ restricted the same way, N_p × rank.
    pub phi_h: CMatrix,
}

impl DelayDictionary {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Rows of Φ that can be nonzero, min(N, N_p).
    pub fn rank(&self) -> usize {
        self.phi.nrows()
    }

    /// λ = Λ Λᴴ 1, length N.
    pub fn lambda(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s * s).collect()
    }

    /// Column index holding grid bin `bin`, if present.
    pub fn column_of_bin(&self, bin: usize) -> Option<usize> {
        self.grid_bins.iter().position(|&b| b == bin)
    }

    /// Frobenius norm of C′ − U Λ V.
    pub fn reconstruction_error(&self) -> f64 {
        let k = self.rank();
        let rebuilt = self.u.columns(0, k) * &self.phi;
        (&self.matrix - rebuilt).norm()
    }
}

// The accuracy of the complex SVD iteration depends erratically on its
// convergence threshold for these near-Vandermonde matrices, so a few are
// tried and the first that reconstructs to working precision wins.
const SVD_THRESHOLDS: [f64; 4] = [1e-18, 1e-17, f64::EPSILON, 1e-15];
const SVD_ACCEPT: f64 = 1e-12;

fn factorize(a: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let mut best: Option<(f64, (CMatrix, Vec<f64>, CMatrix))> = None;
    for eps in SVD_THRESHOLDS {
        let Some(svd) = SVD::try_new(a.clone(), true, true, eps, 0) else {
            continue;
        };
        let u = svd.u.expect("U requested");
        let v_t = svd.v_t.expect("V requested");
        let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        let mut us = u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= Complex64::new(sv[j], 0.0);
        }
        let err = (a - us * &v_t).norm() / scale;
        let orth = (u.adjoint() * &u - CMatrix::identity(u.ncols(), u.ncols())).norm();
        let score = err.max(orth);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, (u, sv, v_t)));
        }
        if score < SVD_ACCEPT {
            break;
        }
    }
    best.map(|(_, f)| f)
        .ok_or_else(|| Error::Dimension("dictionary SVD failed to converge".into()))
}

/// Dictionary over explicit subcarrier indices and grid bins.
pub fn build_dictionary_for(subcarriers: &[usize], grid_bins: &[usize], delay_grid: usize) -> Result<DelayDictionary> {
    let n = subcarriers.len();
    let np = grid_bins.len();
    if n == 0 || np == 0 {
        return Err(Error::Dimension("dictionary needs at least one row and column".into()));
    }
    let matrix = CMatrix::from_fn(n, np, |i, j| {
        Complex64::cis(-2.0 * PI * subcarriers[i] as f64 * grid_bins[j] as f64 / delay_grid as f64)
    });

    let padded_cols = np.max(n);
    let mut padded = CMatrix::zeros(n, padded_cols);
    padded.columns_mut(0, np).copy_from(&matrix);
    let (u, sv, v_t) = factorize(&padded)?;
    let rank = n.min(np);

    let mut singular_values = vec![0.0; n];
    singular_values[..rank].copy_from_slice(&sv[..rank]);

    let mut phi = v_t.view((0, 0), (rank, np)).into_owned();
    for (i, mut row) in phi.row_iter_mut().enumerate() {
        row *= Complex64::new(singular_values[i], 0.0);
    }
    let phi_h = phi.adjoint();
    let u_h = u.adjoint();

    Ok(DelayDictionary {
        matrix,
        grid_bins: grid_bins.to_vec(),
        delay_grid,
        u,
        u_h,
        singular_values,
        phi,
        phi_h,
    })
}

/// Dictionary for the configured occupied subcarriers and delay grid.
pub fn build_dictionary(cfg: &SystemConfig) -> Result<DelayDictionary> {
    cfg.validate()?;
    let subcarriers: Vec<usize> = (0..cfg.occupied_subcarriers).map(|n| cfg.first_subcarrier + n).collect();
    let bins: Vec<usize> = cfg.grid_bins().collect();
    build_dictionary_for(&subcarriers, &bins, cfg.delay_grid)
}
