//! Picard (fixed-point relinearization) iteration for problems whose
//! forward operator depends on the current state.
//!
//! Each pass assembles the operator at the latest state, rebuilds the KKT
//! system (forward and adjoint blocks both refreshed, the adjoint as the
//! transpose of the fresh forward block), and solves it linearly. The
//! nonlinear residual is the Euclidean norm of the full stacked KKT residual
//! evaluated with the freshly assembled operator at the new state.

use crate::driver::{solve_system, SaddleSolution, SolveOptions};
use crate::kkt::{
    build_instationary_kkt_with_state, build_stationary_kkt_with_state, ControlProblem,
    TimeGrid, TimeScheme,
};
use crate::mesh::Mesh;
use crate::operator::norm;
use crate::Result;

/// Outer nonlinear iteration configuration.
#[derive(Debug, Clone, Copy)]
pub struct PicardConfig {
    pub max_iters: usize,
    /// Required reduction of the nonlinear residual.
    pub nl_rtol: f64,
    pub linear: SolveOptions,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            max_iters: 10,
            nl_rtol: 1e-5,
            linear: SolveOptions::default(),
        }
    }
}

/// Nonlinear iteration outcome.
#[derive(Debug, Clone)]
pub struct PicardReport {
    pub iterations: usize,
    /// Nonlinear residual history, starting with the residual of the zero
    /// initial guess.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Inner linear iteration counts per Picard step.
    pub linear_iterations: Vec<usize>,
}

impl PicardReport {
    /// `iter,residual` CSV of the nonlinear residual history.
    pub fn residuals_csv(&self) -> String {
        let mut out = String::from("iter,residual\n");
        for (i, r) in self.residual_history.iter().enumerate() {
            out.push_str(&format!("{},{:e}\n", i, r));
        }
        out
    }
}

/// Runs the Picard iteration from a zero state/adjoint guess. Reaching
/// `max_iters` without the required reduction is reported, not an error.
pub fn picard_solve(
    p: &ControlProblem,
    mesh: &Mesh,
    grid: Option<&TimeGrid>,
    scheme: TimeScheme,
    cfg: &PicardConfig,
) -> Result<(SaddleSolution, PicardReport)> {
    let build = |states: Option<&[Vec<f64>]>, flat: Option<&[f64]>| -> Result<crate::kkt::SaddleSystem> {
        match scheme {
            TimeScheme::Stationary => build_stationary_kkt_with_state(p, mesh, flat),
            _ => {
                let grid = grid.ok_or_else(|| {
                    crate::Error::Config("instationary Picard needs a time grid".into())
                })?;
                build_instationary_kkt_with_state(p, mesh, grid, scheme, states)
            }
        }
    };

    let n = mesh.n_nodes();
    let split_states = |v: &[f64]| -> Vec<Vec<f64>> {
        // Trajectory including the initial point (zeroth entry from the
        // initial condition, refreshed by the builder itself).
        let n_blocks = v.len() / n;
        let ic: Vec<f64> = match &p.initial_condition {
            Some(f) => mesh.nodes.iter().map(|q| f(q[0], q[1])).collect(),
            None => vec![0.0; n],
        };
        let mut out = vec![ic];
        for r in 0..n_blocks {
            out.push(v[r * n..(r + 1) * n].to_vec());
        }
        out
    };

    let mut sys = build(None, None)?;
    let r0 = norm(&sys.rhs);
    let mut history = vec![r0];
    let mut linear_iterations = Vec::new();
    let mut solution: Option<SaddleSolution> = None;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let (sol, rep) = solve_system(&sys, &cfg.linear)?;
        linear_iterations.push(rep.iterations);

        // Fresh system at the new state; its residual is the nonlinear one.
        let new_sys = match scheme {
            TimeScheme::Stationary => build(None, Some(&sol.v))?,
            _ => {
                let states = split_states(&sol.v);
                build(Some(&states), None)?
            }
        };
        let mut x = sol.v.clone();
        x.extend_from_slice(&sol.zeta);
        let res = norm(&new_sys.residual(&x));
        history.push(res);
        solution = Some(sol);
        sys = new_sys;

        if res <= cfg.nl_rtol * r0 {
            converged = true;
            break;
        }
    }

    Ok((
        solution.expect("at least one Picard iteration runs"),
        PicardReport {
            iterations,
            residual_history: history,
            converged,
            linear_iterations,
        },
    ))
}
