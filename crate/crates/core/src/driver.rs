//! End-to-end solve helpers tying systems, preconditioners, and Krylov
//! solvers together.

use std::time::Instant;

use crate::kkt::SaddleSystem;
use crate::krylov::{fgmres, gmres, SolveReport};
use crate::precond::{build_block_triangular, PrecOptions};
use crate::Result;

/// Outer Krylov configuration.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub rtol: f64,
    pub restart: usize,
    pub maxit: usize,
    /// Use FGMRES even though the fixed-count preconditioner is a constant
    /// linear map.
    pub force_fgmres: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-6,
            restart: 10,
            maxit: 500,
            force_fgmres: false,
        }
    }
}

/// Full solve configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub solver: SolverOptions,
    pub prec: PrecOptions,
}

/// Solution of a saddle system split into its components.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub v: Vec<f64>,
    pub zeta: Vec<f64>,
    /// Recovered control `u = zeta / beta`.
    pub control: Vec<f64>,
}

/// Builds the block-triangular preconditioner and runs (F)GMRES on the
/// system. Setup and solve wall-clock times are recorded separately.
pub fn solve_system(sys: &SaddleSystem, opts: &SolveOptions) -> Result<(SaddleSolution, SolveReport)> {
    let setup_start = Instant::now();
    let prec = build_block_triangular(sys, &opts.prec)?;
    let setup_seconds = setup_start.elapsed().as_secs_f64();

    let op = sys.operator();
    let s = &opts.solver;
    let (x, mut report) = if prec.flexible || s.force_fgmres {
        fgmres(&op, &prec, &sys.rhs, s.rtol, s.restart, s.maxit)?
    } else {
        gmres(&op, &prec, &sys.rhs, s.rtol, s.restart, s.maxit)?
    };
    report.setup_seconds = setup_seconds;

    let ns = sys.n_state();
    let v = x[..ns].to_vec();
    let zeta = x[ns..].to_vec();
    let control = sys.recover_control(&zeta);
    Ok((SaddleSolution { v, zeta, control }, report))
}
