//! Construction of the discretized KKT saddle-point systems.
//!
//! The stationary system couples state `v` and adjoint `zeta` through
//!
//! ```text
//!     [ A    B1^T ] [ v    ]   [ b_v    ]        A = M,  C = (1/beta) A,
//!     [ B2   -C   ] [ zeta ] = [ b_zeta ]        B2 = D, B1^T = D^T,
//! ```
//!
//! with the control recovered afterwards as `u = zeta / beta`. The
//! instationary all-at-once system has the same 2x2 shape with `A` a
//! block-diagonal of quadrature-weighted mass matrices and `B2` the block
//! lower-bidiagonal time-stepping operator (backward Euler or trapezoidal
//! rule); the adjoint block is its transpose. Dirichlet conditions are
//! imposed by symmetric elimination with lifting; the eliminated boundary
//! rows pin `v = g` and `zeta = 0` exactly.

use std::path::Path;

use crate::dense::DenseLu;
use crate::fem::{assemble_mass, eliminate, interpolate, lifting_vector, BoundaryDiag};
use crate::krylov::gmres;
use crate::mesh::Mesh;
use crate::multigrid::{MgConfig, MgHierarchy};
use crate::operator::LinearOperator;
use crate::sparse::{write_vector, SparseMatrix};
use crate::{Error, Result};

/// Time discretization of the state equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    Stationary,
    BackwardEuler,
    Trapezoidal,
}

impl TimeScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            TimeScheme::Stationary => "stationary",
            TimeScheme::BackwardEuler => "backward_euler",
            TimeScheme::Trapezoidal => "trapezoidal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stationary" => Ok(TimeScheme::Stationary),
            "backward_euler" => Ok(TimeScheme::BackwardEuler),
            "trapezoidal" => Ok(TimeScheme::Trapezoidal),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected stationary, backward_euler, trapezoidal)"
            ))),
        }
    }
}

/// Uniform time grid with `n_t` points including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub tf: f64,
    pub n_t: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, n_t: usize) -> Result<Self> {
        if n_t < 2 {
            return Err(Error::InvalidDimension(format!(
                "time grid needs at least 2 points, got {n_t}"
            )));
        }
        if !(tf > t0) {
            return Err(Error::InvalidDimension(format!(
                "empty time interval ({t0}, {tf})"
            )));
        }
        Ok(TimeGrid { t0, tf, n_t })
    }

    pub fn tau(&self) -> f64 {
        (self.tf - self.t0) / (self.n_t - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.tau()
    }
}

/// Spatial operator callback: `(mesh, current_state, t) -> D`. The state is
/// `None` for linear problems or when no iterate is available yet.
pub type OperatorFn = dyn Fn(&Mesh, Option<&[f64]>, f64) -> SparseMatrix + Send + Sync;
/// Scalar data callback `(x, y, t) -> value`.
pub type ScalarFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;
/// Time-independent scalar field `(x, y) -> value`.
pub type FieldFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Callback-based problem definition: the forward differential operator, the
/// data functions, boundary values, and the regularization weight.
pub struct ControlProblem {
    pub forward_operator: Box<OperatorFn>,
    pub desired_state: Box<ScalarFn>,
    pub force: Box<ScalarFn>,
    pub boundary_value: Box<ScalarFn>,
    /// Required for instationary problems.
    pub initial_condition: Option<Box<FieldFn>>,
    pub beta: f64,
}

/// Assembled 2x2 saddle system. Unknowns are the stacked state trajectory
/// followed by the stacked adjoint trajectory (one block per retained time
/// point; the initial state is folded into the right-hand side).
pub struct SaddleSystem {
    /// Nodes per time point.
    pub n_space: usize,
    /// Retained time points (1 for stationary).
    pub n_blocks: usize,
    pub beta: f64,
    pub scheme: TimeScheme,
    pub time: Option<TimeGrid>,
    /// Objective quadrature weights per retained point (1 for stationary).
    pub weights: Vec<f64>,
    /// Mass matrix with boundary rows/columns zeroed (no diagonal).
    pub mass0: SparseMatrix,
    /// Mass matrix with boundary rows/columns eliminated to a unit diagonal.
    pub mass_bc: SparseMatrix,
    /// Diagonal blocks of the forward operator, unit boundary diagonal.
    pub fwd_diag: Vec<SparseMatrix>,
    /// Subdiagonal blocks (block `(r, r-1)`), zero boundary rows/columns.
    pub fwd_sub: Vec<SparseMatrix>,
    /// Stacked right-hand side `(b_v, b_zeta)`, length `2 * n_state`.
    pub rhs: Vec<f64>,
    pub boundary: Vec<usize>,
    pub mesh: Mesh,
}

impl SaddleSystem {
    /// Total state dimension (`n_space * n_blocks`).
    pub fn n_state(&self) -> usize {
        self.n_space * self.n_blocks
    }

    /// Dimension of the full saddle system.
    pub fn n_total(&self) -> usize {
        2 * self.n_state()
    }

    /// `y = A x` with `A = blockdiag(w_r * mass_bc)`.
    pub fn a_apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n_space;
        for r in 0..self.n_blocks {
            let xs = &x[r * n..(r + 1) * n];
            let ys = &mut y[r * n..(r + 1) * n];
            self.mass_bc.apply_into(xs, ys);
            let w = self.weights[r];
            for v in ys.iter_mut() {
                *v *= w;
            }
        }
    }

    /// `y = C x` with `C = (1/beta) A` as an exact operator identity.
    pub fn c_apply(&self, x: &[f64], y: &mut [f64]) {
        self.a_apply(x, y);
        let inv = 1.0 / self.beta;
        for v in y.iter_mut() {
            *v *= inv;
        }
    }

    /// `y = B2 x`: the (block lower-bidiagonal) forward operator.
    pub fn b2_apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n_space;
        let mut tmp = vec![0.0; n];
        for r in 0..self.n_blocks {
            let xs = &x[r * n..(r + 1) * n];
            let ys = &mut y[r * n..(r + 1) * n];
            self.fwd_diag[r].apply_into(xs, ys);
            if r > 0 {
                let xp = &x[(r - 1) * n..r * n];
                self.fwd_sub[r - 1].apply_into(xp, &mut tmp);
                for (yi, ti) in ys.iter_mut().zip(&tmp) {
                    *yi += ti;
                }
            }
        }
    }

    /// `y = B1^T x = B2^T x`: the adjoint operator by transposition.
    pub fn b1t_apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n_space;
        let mut tmp = vec![0.0; n];
        for r in 0..self.n_blocks {
            let xs = &x[r * n..(r + 1) * n];
            let ys = &mut y[r * n..(r + 1) * n];
            let t = self.fwd_diag[r].tr_mul_vec(xs);
            ys.copy_from_slice(&t);
            if r + 1 < self.n_blocks {
                let xn = &x[(r + 1) * n..(r + 2) * n];
                let t2 = self.fwd_sub[r].tr_mul_vec(xn);
                tmp.copy_from_slice(&t2);
                for (yi, ti) in ys.iter_mut().zip(&tmp) {
                    *yi += ti;
                }
            }
        }
    }

    /// The full saddle operator.
    pub fn operator(&self) -> SaddleOperator<'_> {
        SaddleOperator { sys: self }
    }

    /// `b_v` part of the right-hand side.
    pub fn rhs_state(&self) -> &[f64] {
        &self.rhs[..self.n_state()]
    }

    /// `b_zeta` part of the right-hand side.
    pub fn rhs_adjoint(&self) -> &[f64] {
        &self.rhs[self.n_state()..]
    }

    /// Residual `b - A x` of the full system.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let op = self.operator();
        let mut ax = vec![0.0; self.n_total()];
        op.apply(x, &mut ax);
        self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
    }

    /// Recovers the control `u = zeta / beta`.
    pub fn recover_control(&self, zeta: &[f64]) -> Vec<f64> {
        zeta.iter().map(|z| z / self.beta).collect()
    }

    /// Writes all blocks in Matrix Market format plus the right-hand side as
    /// a plain vector file.
    pub fn export_blocks(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let write = |name: &str, m: &SparseMatrix| -> Result<()> {
            let mut f = std::fs::File::create(dir.join(name))?;
            m.write_matrix_market(&mut f)
        };
        write("mass.mtx", &self.mass_bc)?;
        for (r, m) in self.fwd_diag.iter().enumerate() {
            write(&format!("fwd_diag_{r}.mtx"), m)?;
        }
        for (r, m) in self.fwd_sub.iter().enumerate() {
            write(&format!("fwd_sub_{r}.mtx"), m)?;
        }
        let mut f = std::fs::File::create(dir.join("rhs.txt"))?;
        write_vector(&mut f, &self.rhs)
    }
}

/// Apply-only view of the full 2x2 saddle operator.
pub struct SaddleOperator<'a> {
    sys: &'a SaddleSystem,
}

impl LinearOperator for SaddleOperator<'_> {
    fn nrows(&self) -> usize {
        self.sys.n_total()
    }

    fn ncols(&self) -> usize {
        self.sys.n_total()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let ns = self.sys.n_state();
        let (xv, xz) = x.split_at(ns);
        let (yv, yz) = y.split_at_mut(ns);
        let mut tmp = vec![0.0; ns];
        // y_v = A x_v + B1^T x_z
        self.sys.a_apply(xv, yv);
        self.sys.b1t_apply(xz, &mut tmp);
        for (a, b) in yv.iter_mut().zip(&tmp) {
            *a += b;
        }
        // y_z = B2 x_v - C x_z
        self.sys.b2_apply(xv, yz);
        self.sys.c_apply(xz, &mut tmp);
        for (a, b) in yz.iter_mut().zip(&tmp) {
            *a -= b;
        }
    }

    fn supports_transpose(&self) -> bool {
        true
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        // B1^T = B2^T and A, C symmetric, so the saddle operator is
        // symmetric.
        self.apply(x, y);
    }
}

/// Exact transpose of an assembled forward block: the discrete adjoint.
pub fn derive_adjoint(forward_block: &SparseMatrix) -> SparseMatrix {
    forward_block.transpose()
}

/// Builds the stationary KKT system for the problem on the given mesh.
pub fn build_stationary_kkt(p: &ControlProblem, mesh: &Mesh) -> Result<SaddleSystem> {
    build_stationary_kkt_with_state(p, mesh, None)
}

/// Stationary KKT with the forward operator assembled at a given state
/// (used by the nonlinear driver).
pub fn build_stationary_kkt_with_state(
    p: &ControlProblem,
    mesh: &Mesh,
    state: Option<&[f64]>,
) -> Result<SaddleSystem> {
    if !(p.beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {}", p.beta)));
    }
    let n = mesh.n_nodes();
    let boundary = mesh.boundary_nodes.clone();

    let m_full = assemble_mass(mesh);
    let d_full = (p.forward_operator)(mesh, state, 0.0);
    if d_full.nrows() != n || d_full.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: d_full.nrows(),
        });
    }

    let g = interpolate(mesh, &|x, y| (p.boundary_value)(x, y, 0.0));
    let vd = interpolate(mesh, &|x, y| (p.desired_state)(x, y, 0.0));
    let f_nodes = interpolate(mesh, &|x, y| (p.force)(x, y, 0.0));

    let mass0 = eliminate(&m_full, &boundary, BoundaryDiag::Zero)?;
    let mass_bc = eliminate(&m_full, &boundary, BoundaryDiag::Unit)?;
    let fwd = eliminate(&d_full, &boundary, BoundaryDiag::Unit)?;

    let mut b_v = m_full.mul_vec(&vd);
    let lift_a = lifting_vector(&m_full, &boundary, &g);
    for i in 0..n {
        b_v[i] -= lift_a[i];
    }
    let mut b_z = m_full.mul_vec(&f_nodes);
    let lift_d = lifting_vector(&d_full, &boundary, &g);
    for i in 0..n {
        b_z[i] -= lift_d[i];
    }
    for &b in &boundary {
        b_v[b] = g[b];
        b_z[b] = g[b];
    }

    let mut rhs = b_v;
    rhs.extend_from_slice(&b_z);

    Ok(SaddleSystem {
        n_space: n,
        n_blocks: 1,
        beta: p.beta,
        scheme: TimeScheme::Stationary,
        time: None,
        weights: vec![1.0],
        mass0,
        mass_bc,
        fwd_diag: vec![fwd],
        fwd_sub: Vec::new(),
        rhs,
        boundary,
        mesh: mesh.clone(),
    })
}

/// Builds the all-at-once instationary KKT system.
pub fn build_instationary_kkt(
    p: &ControlProblem,
    mesh: &Mesh,
    grid: &TimeGrid,
    scheme: TimeScheme,
) -> Result<SaddleSystem> {
    build_instationary_kkt_with_state(p, mesh, grid, scheme, None)
}

/// Instationary KKT with the forward operator assembled at a given state
/// trajectory (`states[k]` at time point `k`, including the initial point).
pub fn build_instationary_kkt_with_state(
    p: &ControlProblem,
    mesh: &Mesh,
    grid: &TimeGrid,
    scheme: TimeScheme,
    states: Option<&[Vec<f64>]>,
) -> Result<SaddleSystem> {
    if scheme == TimeScheme::Stationary {
        return Err(Error::Config(
            "instationary builder requires backward_euler or trapezoidal".into(),
        ));
    }
    if !(p.beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {}", p.beta)));
    }
    let ic = p
        .initial_condition
        .as_ref()
        .ok_or_else(|| Error::Config("instationary problem needs an initial condition".into()))?;

    let n = mesh.n_nodes();
    let n_steps = grid.n_t - 1;
    let tau = grid.tau();
    let boundary = mesh.boundary_nodes.clone();

    let m_full = assemble_mass(mesh);
    let mass0 = eliminate(&m_full, &boundary, BoundaryDiag::Zero)?;
    let mass_bc = eliminate(&m_full, &boundary, BoundaryDiag::Unit)?;

    let state_at = |k: usize| -> Option<&[f64]> {
        states.map(|s| s[k].as_slice())
    };
    if let Some(s) = states {
        if s.len() != grid.n_t {
            return Err(Error::DimensionMismatch {
                expected: grid.n_t,
                got: s.len(),
            });
        }
    }

    // Spatial operators at each time point (index 0 used only by the
    // trapezoidal scheme).
    let d_full: Vec<SparseMatrix> = (0..grid.n_t)
        .map(|k| (p.forward_operator)(mesh, state_at(k), grid.point(k)))
        .collect();

    let g: Vec<Vec<f64>> = (0..grid.n_t)
        .map(|k| interpolate(mesh, &|x, y| (p.boundary_value)(x, y, grid.point(k))))
        .collect();
    let f_nodes: Vec<Vec<f64>> = (0..grid.n_t)
        .map(|k| interpolate(mesh, &|x, y| (p.force)(x, y, grid.point(k))))
        .collect();
    let v0 = interpolate(mesh, &|x, y| ic(x, y));

    // Objective quadrature weights on the retained points 1..=n_steps.
    let weights: Vec<f64> = (1..=n_steps)
        .map(|k| match scheme {
            TimeScheme::BackwardEuler => tau,
            TimeScheme::Trapezoidal => {
                if k == n_steps {
                    0.5 * tau
                } else {
                    tau
                }
            }
            TimeScheme::Stationary => unreachable!(),
        })
        .collect();

    let c_diag = match scheme {
        TimeScheme::BackwardEuler => tau,
        _ => 0.5 * tau,
    };

    let mut fwd_diag = Vec::with_capacity(n_steps);
    let mut fwd_sub = Vec::with_capacity(n_steps.saturating_sub(1));
    let mut b_v = vec![0.0; n * n_steps];
    let mut b_z = vec![0.0; n * n_steps];

    for k in 1..=n_steps {
        let r = k - 1;
        let diag_full = SparseMatrix::linear_comb(1.0, &m_full, c_diag, &d_full[k])?;
        fwd_diag.push(eliminate(&diag_full, &boundary, BoundaryDiag::Unit)?);

        let sub_full = match scheme {
            TimeScheme::BackwardEuler => m_full.scaled(-1.0),
            TimeScheme::Trapezoidal => {
                SparseMatrix::linear_comb(-1.0, &m_full, 0.5 * tau, &d_full[k - 1])?
            }
            TimeScheme::Stationary => unreachable!(),
        };
        if k >= 2 {
            fwd_sub.push(eliminate(&sub_full, &boundary, BoundaryDiag::Zero)?);
        }

        // Adjoint-row rhs: w_k * (M v_d(t_k) - lifting).
        let vd = interpolate(mesh, &|x, y| (p.desired_state)(x, y, grid.point(k)));
        let mut row_v = m_full.mul_vec(&vd);
        let lift_a = lifting_vector(&m_full, &boundary, &g[k]);
        let w = weights[r];
        for i in 0..n {
            row_v[i] = w * (row_v[i] - lift_a[i]);
        }

        // State-row rhs: load, initial data, and boundary lifting.
        let mut row_z = vec![0.0; n];
        match scheme {
            TimeScheme::BackwardEuler => {
                let load = m_full.mul_vec(&f_nodes[k]);
                for i in 0..n {
                    row_z[i] += tau * load[i];
                }
            }
            TimeScheme::Trapezoidal => {
                let load_k = m_full.mul_vec(&f_nodes[k]);
                let load_p = m_full.mul_vec(&f_nodes[k - 1]);
                for i in 0..n {
                    row_z[i] += 0.5 * tau * (load_k[i] + load_p[i]);
                }
            }
            TimeScheme::Stationary => unreachable!(),
        }
        if k == 1 {
            // -sub_full * v0 moved to the right-hand side.
            let sv = sub_full.mul_vec(&v0);
            for i in 0..n {
                row_z[i] -= sv[i];
            }
        } else {
            let lift_sub = lifting_vector(&sub_full, &boundary, &g[k - 1]);
            for i in 0..n {
                row_z[i] -= lift_sub[i];
            }
        }
        let lift_diag = lifting_vector(&diag_full, &boundary, &g[k]);
        for i in 0..n {
            row_z[i] -= lift_diag[i];
        }

        for &b in &boundary {
            row_v[b] = w * g[k][b];
            row_z[b] = g[k][b];
        }
        b_v[r * n..(r + 1) * n].copy_from_slice(&row_v);
        b_z[r * n..(r + 1) * n].copy_from_slice(&row_z);
    }

    let mut rhs = b_v;
    rhs.extend_from_slice(&b_z);

    Ok(SaddleSystem {
        n_space: n,
        n_blocks: n_steps,
        beta: p.beta,
        scheme,
        time: Some(*grid),
        weights,
        mass0,
        mass_bc,
        fwd_diag,
        fwd_sub,
        rhs,
        boundary,
        mesh: mesh.clone(),
    })
}

/// Sequential time stepping of the spatially discretized state equation
/// `M dv/dt + D v = M u + f` with the given control trajectory (`u[k]` at
/// time point `k`). Returns the trajectory including the initial point.
pub fn forward_march(
    p: &ControlProblem,
    mesh: &Mesh,
    grid: &TimeGrid,
    scheme: TimeScheme,
    u: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    if scheme == TimeScheme::Stationary {
        return Err(Error::Config("forward_march needs a time-stepping scheme".into()));
    }
    if u.len() != grid.n_t {
        return Err(Error::DimensionMismatch {
            expected: grid.n_t,
            got: u.len(),
        });
    }
    let ic = p
        .initial_condition
        .as_ref()
        .ok_or_else(|| Error::Config("forward_march needs an initial condition".into()))?;
    let n = mesh.n_nodes();
    let tau = grid.tau();
    let boundary = mesh.boundary_nodes.clone();
    let m_full = assemble_mass(mesh);
    let c_diag = match scheme {
        TimeScheme::BackwardEuler => tau,
        _ => 0.5 * tau,
    };

    let mut traj = Vec::with_capacity(grid.n_t);
    traj.push(interpolate(mesh, &|x, y| ic(x, y)));

    for k in 1..grid.n_t {
        let t_k = grid.point(k);
        let d_k = (p.forward_operator)(mesh, None, t_k);
        let diag_full = SparseMatrix::linear_comb(1.0, &m_full, c_diag, &d_k)?;
        let step = eliminate(&diag_full, &boundary, BoundaryDiag::Unit)?;
        let g_k = interpolate(mesh, &|x, y| (p.boundary_value)(x, y, t_k));
        let f_k = interpolate(mesh, &|x, y| (p.force)(x, y, t_k));

        let prev = traj.last().unwrap();
        let mut rhs = vec![0.0; n];
        match scheme {
            TimeScheme::BackwardEuler => {
                let mv = m_full.mul_vec(prev);
                let mut src = vec![0.0; n];
                for i in 0..n {
                    src[i] = u[k][i] + f_k[i];
                }
                let msrc = m_full.mul_vec(&src);
                for i in 0..n {
                    rhs[i] = mv[i] + tau * msrc[i];
                }
            }
            TimeScheme::Trapezoidal => {
                let t_p = grid.point(k - 1);
                let d_p = (p.forward_operator)(mesh, None, t_p);
                let prev_op = SparseMatrix::linear_comb(1.0, &m_full, -0.5 * tau, &d_p)?;
                let pv = prev_op.mul_vec(prev);
                let f_p = interpolate(mesh, &|x, y| (p.force)(x, y, t_p));
                let mut src = vec![0.0; n];
                for i in 0..n {
                    src[i] = u[k][i] + u[k - 1][i] + f_k[i] + f_p[i];
                }
                let msrc = m_full.mul_vec(&src);
                for i in 0..n {
                    rhs[i] = pv[i] + 0.5 * tau * msrc[i];
                }
            }
            TimeScheme::Stationary => unreachable!(),
        }
        let lift = lifting_vector(&diag_full, &boundary, &g_k);
        for i in 0..n {
            rhs[i] -= lift[i];
        }
        for &b in &boundary {
            rhs[b] = g_k[b];
        }

        let v_k = if n <= 600 {
            DenseLu::factor(&step.to_dense())?.solve(&rhs)
        } else {
            let hier = MgHierarchy::build(mesh, step.clone(), MgConfig::default())?;
            let prec = MgPrec { hier: &hier };
            let (x, rep) = gmres(&step, &prec, &rhs, 1e-13, 30, 400)?;
            if !rep.converged {
                return Err(Error::Config("forward_march inner solve did not converge".into()));
            }
            x
        };
        traj.push(v_k);
    }
    Ok(traj)
}

struct MgPrec<'a> {
    hier: &'a MgHierarchy,
}

impl LinearOperator for MgPrec<'_> {
    fn nrows(&self) -> usize {
        self.hier.fine_matrix().nrows()
    }

    fn ncols(&self) -> usize {
        self.hier.fine_matrix().ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let out = self.hier.vcycle(x, 2);
        y.copy_from_slice(&out);
    }
}
