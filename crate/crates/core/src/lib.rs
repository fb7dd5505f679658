//! Solvers for the saddle-point systems arising in distributed optimal
//! control of PDEs.
//!
//! The library assembles the discretized first-order optimality (KKT)
//! conditions of problems of the form
//!
//! ```text
//!     min  1/2 ||v - v_d||^2 + beta/2 ||u||^2    s.t.   D v = u + f
//! ```
//!
//! on rectangles, both stationary and time-dependent (all-at-once, with
//! backward Euler or trapezoidal stepping), and solves them with restarted
//! GMRES/FGMRES under block-triangular preconditioners whose Schur
//! complement approximation follows the matching strategy.
//!
//! Module map:
//! - [`mesh`]: nested structured triangulations of rectangles
//! - [`sparse`]: CSR matrices and Matrix Market I/O
//! - [`dense`]: dense LU / Cholesky / Jacobi eigensolver (verification oracles)
//! - [`operator`]: apply-only linear operators and 2x2 block composition
//! - [`fem`]: P1 assembly (mass, stiffness, convection) and Dirichlet elimination
//! - [`chebyshev`]: Chebyshev semi-iteration with Jacobi splitting
//! - [`multigrid`]: geometric V-cycles on the nested mesh hierarchy
//! - [`krylov`]: restarted GMRES and FGMRES
//! - [`kkt`]: saddle-system construction and forward time stepping
//! - [`precond`]: ideal and matching-strategy block preconditioners
//! - [`problems`]: named benchmark problems
//! - [`picard`]: fixed-point relinearization for state-dependent operators
//! - [`driver`]: end-to-end solve helpers

pub mod chebyshev;
pub mod dense;
pub mod driver;
pub mod fem;
pub mod kkt;
pub mod krylov;
pub mod mesh;
pub mod multigrid;
pub mod operator;
pub mod picard;
pub mod precond;
pub mod problems;
pub mod sparse;

mod error;
pub use error::{Error, Result};
