//! Chebyshev semi-iteration accelerating a Jacobi splitting.
//!
//! For a fixed sweep count and fixed spectral bounds the map `b -> x` is
//! linear, so it can sit inside a plain (non-flexible) GMRES iteration.

use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// Reusable Chebyshev-Jacobi solver for a fixed matrix.
#[derive(Debug, Clone)]
pub struct ChebyshevJacobi<'a> {
    matrix: &'a SparseMatrix,
    inv_diag: Vec<f64>,
    theta: f64,
    rho: f64,
    sweeps: usize,
}

impl<'a> ChebyshevJacobi<'a> {
    /// `bounds = (lambda_lo, lambda_hi)` must enclose the spectrum of
    /// `diag(m)^{-1} m`.
    pub fn new(matrix: &'a SparseMatrix, bounds: (f64, f64), sweeps: usize) -> Result<Self> {
        let (lo, hi) = bounds;
        if !(lo > 0.0) || !(hi >= lo) {
            return Err(Error::Config(format!(
                "invalid Chebyshev bounds ({lo}, {hi}): need 0 < lo <= hi"
            )));
        }
        if sweeps == 0 {
            return Err(Error::Config("Chebyshev sweep count must be positive".into()));
        }
        let diag = matrix.diagonal();
        let mut inv_diag = Vec::with_capacity(diag.len());
        for (row, d) in diag.iter().enumerate() {
            if !(*d > 0.0) {
                return Err(Error::NonPositiveDiagonal { row, value: *d });
            }
            inv_diag.push(1.0 / d);
        }
        Ok(ChebyshevJacobi {
            matrix,
            inv_diag,
            theta: 2.0 / (lo + hi),
            rho: (hi - lo) / (hi + lo),
            sweeps,
        })
    }

    /// Runs the fixed number of sweeps from a zero initial guess.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.matrix.nrows();
        assert_eq!(b.len(), n, "chebyshev dimension mismatch");
        // First iterate from zero: y1 = theta D^{-1} b.
        let mut y: Vec<f64> = b
            .iter()
            .zip(&self.inv_diag)
            .map(|(bi, di)| self.theta * bi * di)
            .collect();
        if self.sweeps == 1 || self.rho == 0.0 {
            // Degenerate bounds: the single damped Jacobi step is exact.
            return y;
        }
        let mut y_prev = vec![0.0; n];
        let mut az = vec![0.0; n];
        let rho2 = self.rho * self.rho;
        let mut omega = 2.0 / (2.0 - rho2);
        for sweep in 1..self.sweeps {
            self.matrix.apply_into(&y, &mut az);
            // z = S y + g = y + theta D^{-1} (b - M y)
            for i in 0..n {
                let z = y[i] + self.theta * self.inv_diag[i] * (b[i] - az[i]);
                let next = omega * (z - y_prev[i]) + y_prev[i];
                y_prev[i] = y[i];
                y[i] = next;
            }
            if sweep + 1 < self.sweeps {
                omega = 1.0 / (1.0 - 0.25 * rho2 * omega);
            }
        }
        y
    }
}

/// One-shot Chebyshev-accelerated Jacobi iteration from a zero initial guess.
pub fn chebyshev_jacobi(
    m: &SparseMatrix,
    b: &[f64],
    bounds: (f64, f64),
    sweeps: usize,
) -> Result<Vec<f64>> {
    Ok(ChebyshevJacobi::new(m, bounds, sweeps)?.solve(b))
}
