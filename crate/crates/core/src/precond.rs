//! Block preconditioners for the saddle systems.
//!
//! The ideal block-triangular preconditioner solves the (1,1) block and the
//! exact Schur complement `S = C + B2 A^{-1} B1^T`; it is a dense
//! verification tool. The practical preconditioner replaces the mass-block
//! solve by Chebyshev semi-iteration and the Schur complement by the
//! matching approximation
//!
//! ```text
//!     S_hat = (B + Lambda) A^{-1} (B + Lambda)^T,   Lambda = A / sqrt(beta),
//! ```
//!
//! whose factors are applied by a fixed number of multigrid V-cycles (block
//! forward/backward substitution in the instationary case). With fixed sweep
//! and cycle counts every inner map is linear, so the composite is a valid
//! preconditioner for plain GMRES.

use crate::chebyshev::ChebyshevJacobi;
use crate::dense::{cholesky, dense_symmetric_eig, solve_lower_triangular, DenseLu, DenseMatrix};
use crate::kkt::{SaddleSystem, TimeScheme};
use crate::multigrid::{MgConfig, MgHierarchy};
use crate::operator::LinearOperator;
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// Inner-solve configuration for the practical preconditioner.
#[derive(Debug, Clone, Copy)]
pub struct PrecOptions {
    pub cheb_sweeps: usize,
    pub cheb_bounds: (f64, f64),
    pub mg_cycles: usize,
    /// Replace Chebyshev/multigrid by exact dense factorizations (small
    /// instances only).
    pub exact_inner: bool,
    pub mg: MgConfig,
}

impl Default for PrecOptions {
    fn default() -> Self {
        PrecOptions {
            cheb_sweeps: 20,
            cheb_bounds: (0.5, 2.0),
            mg_cycles: 2,
            exact_inner: false,
            mg: MgConfig::default(),
        }
    }
}

const IDEAL_DIM_LIMIT: usize = 400;

/// Exact block-triangular preconditioner; spectrum of the preconditioned
/// matrix is `{1}` with minimal polynomial degree two.
pub struct IdealPrec {
    n_state: usize,
    a_lu: DenseLu,
    s_lu: DenseLu,
    b2: DenseMatrix,
}

/// Builds the ideal preconditioner densely. Restricted to total dimension
/// 400 as a verification tool.
pub fn ideal_prec(sys: &SaddleSystem) -> Result<IdealPrec> {
    if sys.n_total() > IDEAL_DIM_LIMIT {
        return Err(Error::Config(format!(
            "ideal preconditioner is a dense verification tool (dimension {} > {})",
            sys.n_total(),
            IDEAL_DIM_LIMIT
        )));
    }
    let ns = sys.n_state();
    let a = probe_dense(ns, |x, y| sys.a_apply(x, y));
    let b2 = probe_dense(ns, |x, y| sys.b2_apply(x, y));
    let b1t = probe_dense(ns, |x, y| sys.b1t_apply(x, y));
    let a_lu = DenseLu::factor(&a)?;

    // S = C + B2 A^{-1} B1^T with C = A / beta.
    let mut s = a.scaled(1.0 / sys.beta);
    for j in 0..ns {
        let col: Vec<f64> = (0..ns).map(|i| b1t.get(i, j)).collect();
        let ainv_col = a_lu.solve(&col);
        let b2col = b2.matvec(&ainv_col);
        for i in 0..ns {
            s.add_at(i, j, b2col[i]);
        }
    }
    let s_lu = DenseLu::factor(&s)?;
    Ok(IdealPrec {
        n_state: ns,
        a_lu,
        s_lu,
        b2,
    })
}

impl LinearOperator for IdealPrec {
    fn nrows(&self) -> usize {
        2 * self.n_state
    }

    fn ncols(&self) -> usize {
        2 * self.n_state
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let ns = self.n_state;
        let (rv, rz) = x.split_at(ns);
        let zv = self.a_lu.solve(rv);
        let mut t = self.b2.matvec(&zv);
        for (ti, ri) in t.iter_mut().zip(rz) {
            *ti = ri - *ti;
        }
        let zz = self.s_lu.solve(&t);
        for i in 0..ns {
            y[i] = zv[i];
            y[ns + i] = -zz[i];
        }
    }
}

enum FactorSolve {
    Exact { lus: Vec<DenseLu>, lus_t: Vec<DenseLu> },
    Multigrid { hiers: Vec<MgHierarchy>, cycles: usize },
}

/// Matching-strategy Schur complement approximation
/// `S_hat^{-1} = (B + Lambda)^{-T} A (B + Lambda)^{-1}`.
pub struct MatchingSchur<'a> {
    sys: &'a SaddleSystem,
    factor: FactorSolve,
    /// `1 / sqrt(beta)`.
    pub lambda_scale: f64,
}

fn build_matching<'a>(sys: &'a SaddleSystem, opts: &PrecOptions) -> Result<MatchingSchur<'a>> {
    let lambda_scale = 1.0 / sys.beta.sqrt();
    // Per-block factor diagonal: fwd_diag[r] + (w_r / sqrt(beta)) mass_bc.
    let mut factors = Vec::with_capacity(sys.n_blocks);
    for r in 0..sys.n_blocks {
        let shift = sys.weights[r] * lambda_scale;
        factors.push(SparseMatrix::linear_comb(
            1.0,
            &sys.fwd_diag[r],
            shift,
            &sys.mass_bc,
        )?);
    }
    let factor = if opts.exact_inner {
        let mut lus = Vec::with_capacity(factors.len());
        let mut lus_t = Vec::with_capacity(factors.len());
        for f in &factors {
            let d = f.to_dense();
            lus.push(DenseLu::factor(&d)?);
            lus_t.push(DenseLu::factor(&d.transpose())?);
        }
        FactorSolve::Exact { lus, lus_t }
    } else {
        let mut hiers = Vec::with_capacity(factors.len());
        for f in factors {
            hiers.push(MgHierarchy::build(&sys.mesh, f, opts.mg)?);
        }
        FactorSolve::Multigrid {
            hiers,
            cycles: opts.mg_cycles,
        }
    };
    Ok(MatchingSchur {
        sys,
        factor,
        lambda_scale,
    })
}

/// Matching Schur approximation for a stationary system: factor solves are
/// multigrid cycles on `D + M / sqrt(beta)` (or dense when `exact_inner`).
pub fn matching_schur_stationary<'a>(
    sys: &'a SaddleSystem,
    opts: &PrecOptions,
) -> Result<MatchingSchur<'a>> {
    if sys.scheme != TimeScheme::Stationary {
        return Err(Error::Config("matching_schur_stationary needs a stationary system".into()));
    }
    build_matching(sys, opts)
}

/// Matching Schur approximation for an all-at-once system: the factor
/// `L + Lambda` is block lower-bidiagonal and applied by block forward
/// substitution, each diagonal block solved by multigrid cycles.
pub fn matching_schur_instationary<'a>(
    sys: &'a SaddleSystem,
    opts: &PrecOptions,
) -> Result<MatchingSchur<'a>> {
    if sys.scheme == TimeScheme::Stationary {
        return Err(Error::Config(
            "matching_schur_instationary needs a time-dependent system".into(),
        ));
    }
    build_matching(sys, opts)
}

impl MatchingSchur<'_> {
    fn solve_diag(&self, r: usize, b: &[f64]) -> Vec<f64> {
        match &self.factor {
            FactorSolve::Exact { lus, .. } => lus[r].solve(b),
            FactorSolve::Multigrid { hiers, cycles } => hiers[r].vcycle(b, *cycles),
        }
    }

    fn solve_diag_t(&self, r: usize, b: &[f64]) -> Vec<f64> {
        match &self.factor {
            FactorSolve::Exact { lus_t, .. } => lus_t[r].solve(b),
            FactorSolve::Multigrid { hiers, cycles } => hiers[r].vcycle_transposed(b, *cycles),
        }
    }

    /// Solves `(B + Lambda) x = b` by block forward substitution.
    pub fn factor_apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.sys.n_space;
        let mut x = vec![0.0; b.len()];
        let mut rhs = vec![0.0; n];
        for r in 0..self.sys.n_blocks {
            rhs.copy_from_slice(&b[r * n..(r + 1) * n]);
            if r > 0 {
                let coupled = self.sys.fwd_sub[r - 1].mul_vec(&x[(r - 1) * n..r * n]);
                for (ri, ci) in rhs.iter_mut().zip(&coupled) {
                    *ri -= ci;
                }
            }
            let xr = self.solve_diag(r, &rhs);
            x[r * n..(r + 1) * n].copy_from_slice(&xr);
        }
        x
    }

    /// Solves `(B + Lambda)^T x = b` by block backward substitution.
    pub fn factor_t_apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.sys.n_space;
        let nb = self.sys.n_blocks;
        let mut x = vec![0.0; b.len()];
        let mut rhs = vec![0.0; n];
        for r in (0..nb).rev() {
            rhs.copy_from_slice(&b[r * n..(r + 1) * n]);
            if r + 1 < nb {
                let coupled = self.sys.fwd_sub[r].tr_mul_vec(&x[(r + 1) * n..(r + 2) * n]);
                for (ri, ci) in rhs.iter_mut().zip(&coupled) {
                    *ri -= ci;
                }
            }
            let xr = self.solve_diag_t(r, &rhs);
            x[r * n..(r + 1) * n].copy_from_slice(&xr);
        }
        x
    }
}

impl LinearOperator for MatchingSchur<'_> {
    fn nrows(&self) -> usize {
        self.sys.n_state()
    }

    fn ncols(&self) -> usize {
        self.sys.n_state()
    }

    /// `y = S_hat^{-1} x`.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let u = self.factor_apply(x);
        let mut w = vec![0.0; u.len()];
        self.sys.a_apply(&u, &mut w);
        let z = self.factor_t_apply(&w);
        y.copy_from_slice(&z);
    }
}

enum MassSolve<'a> {
    Exact(DenseLu),
    Chebyshev(ChebyshevJacobi<'a>),
}

/// Practical block-triangular preconditioner: approximate mass solve on the
/// (1,1) block, matching Schur approximation below the diagonal.
pub struct BlockTriangularPrec<'a> {
    sys: &'a SaddleSystem,
    a_solve: MassSolve<'a>,
    schur: MatchingSchur<'a>,
    /// True when any inner map varies between applications; all fixed-count
    /// configurations here are fixed linear maps, so plain GMRES applies.
    pub flexible: bool,
}

/// Builds the practical preconditioner for either the stationary or the
/// all-at-once system.
pub fn build_block_triangular<'a>(
    sys: &'a SaddleSystem,
    opts: &PrecOptions,
) -> Result<BlockTriangularPrec<'a>> {
    let a_solve = if opts.exact_inner {
        MassSolve::Exact(DenseLu::factor(&sys.mass_bc.to_dense())?)
    } else {
        MassSolve::Chebyshev(ChebyshevJacobi::new(
            &sys.mass_bc,
            opts.cheb_bounds,
            opts.cheb_sweeps,
        )?)
    };
    let schur = build_matching(sys, opts)?;
    Ok(BlockTriangularPrec {
        sys,
        a_solve,
        schur,
        flexible: false,
    })
}

impl BlockTriangularPrec<'_> {
    fn a_block_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.sys.n_space;
        let mut x = vec![0.0; b.len()];
        for r in 0..self.sys.n_blocks {
            let br = &b[r * n..(r + 1) * n];
            let mut xr = match &self.a_solve {
                MassSolve::Exact(lu) => lu.solve(br),
                MassSolve::Chebyshev(ch) => ch.solve(br),
            };
            let inv_w = 1.0 / self.sys.weights[r];
            for v in xr.iter_mut() {
                *v *= inv_w;
            }
            x[r * n..(r + 1) * n].copy_from_slice(&xr);
        }
        x
    }
}

impl LinearOperator for BlockTriangularPrec<'_> {
    fn nrows(&self) -> usize {
        self.sys.n_total()
    }

    fn ncols(&self) -> usize {
        self.sys.n_total()
    }

    /// `z_v = A_tilde^{-1} r_v`, then `z_zeta = -S_tilde^{-1} (r_zeta - B2 z_v)`.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let ns = self.sys.n_state();
        let (rv, rz) = x.split_at(ns);
        let zv = self.a_block_solve(rv);
        let mut t = vec![0.0; ns];
        self.sys.b2_apply(&zv, &mut t);
        for (ti, ri) in t.iter_mut().zip(rz) {
            *ti = ri - *ti;
        }
        let mut zz = vec![0.0; ns];
        self.schur.apply(&t, &mut zz);
        for i in 0..ns {
            y[i] = zv[i];
            y[ns + i] = -zz[i];
        }
    }
}

/// Applies the block-triangular preconditioner to a stacked residual.
pub fn prec_apply(p: &BlockTriangularPrec<'_>, r: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; r.len()];
    p.apply(r, &mut y);
    y
}

fn probe_dense(n: usize, apply: impl Fn(&[f64], &mut [f64])) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            out.set(i, j, col[i]);
        }
    }
    out
}

/// Dense spectrum of `S_hat^{-1} S` with exact factor solves: returns
/// `(lambda_min, lambda_max)` of the generalized symmetric problem
/// `S x = lambda S_hat x`.
pub fn matching_spectrum_bounds(sys: &SaddleSystem) -> Result<(f64, f64)> {
    let ns = sys.n_state();
    let a = probe_dense(ns, |x, y| sys.a_apply(x, y));
    let b2 = probe_dense(ns, |x, y| sys.b2_apply(x, y));
    let b1t = probe_dense(ns, |x, y| sys.b1t_apply(x, y));
    let a_lu = DenseLu::factor(&a)?;

    // S = C + B2 A^{-1} B1^T, C = A / beta.
    let mut s = a.scaled(1.0 / sys.beta);
    for j in 0..ns {
        let col: Vec<f64> = (0..ns).map(|i| b1t.get(i, j)).collect();
        let y = a_lu.solve(&col);
        let b2y = b2.matvec(&y);
        for i in 0..ns {
            s.add_at(i, j, b2y[i]);
        }
    }

    // S_hat = F A^{-1} F^T with F = B2 + A / sqrt(beta).
    let f = b2.add_scaled(1.0 / sys.beta.sqrt(), &a);
    let ft = f.transpose();
    let mut s_hat = DenseMatrix::zeros(ns, ns);
    for j in 0..ns {
        let col: Vec<f64> = (0..ns).map(|i| ft.get(i, j)).collect();
        let y = a_lu.solve(&col);
        let fy = f.matvec(&y);
        for i in 0..ns {
            s_hat.set(i, j, fy[i]);
        }
    }

    // Generalized symmetric eigenproblem via the Cholesky transform.
    let l = cholesky(&symmetrize(&s_hat))?;
    let ss = symmetrize(&s);
    let mut w = DenseMatrix::zeros(ns, ns);
    for j in 0..ns {
        let col: Vec<f64> = (0..ns).map(|i| ss.get(i, j)).collect();
        let y = solve_lower_triangular(&l, &col);
        for i in 0..ns {
            w.set(i, j, y[i]);
        }
    }
    // Now w = L^{-1} S; apply L^{-T} from the right: rows of w.
    let mut z = DenseMatrix::zeros(ns, ns);
    for i in 0..ns {
        let row: Vec<f64> = (0..ns).map(|j| w.get(i, j)).collect();
        let y = solve_lower_triangular(&l, &row);
        for j in 0..ns {
            z.set(i, j, y[j]);
        }
    }
    let eig = dense_symmetric_eig(&symmetrize(&z))?;
    Ok((eig[0], eig[ns - 1]))
}

fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    let n = m.nrows();
    DenseMatrix::from_fn(n, n, |i, j| 0.5 * (m.get(i, j) + m.get(j, i)))
}
