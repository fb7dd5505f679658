//! Geometric multigrid V-cycles on the nested structured hierarchy.
//!
//! Coarse operators are Galerkin products `R A P` with the standard P1
//! interpolation on the nested meshes (for nested P1 spaces this coincides
//! with re-discretization). Transfers vanish on Dirichlet nodes; constrained
//! rows are decoupled, handled exactly by a pre-pass, and stay untouched by
//! the smoother because their residual is identically zero afterwards.

use crate::dense::DenseLu;
use crate::mesh::{build_rect_mesh, Mesh};
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// Smoother choice. Point-Jacobi smoothing in 2D cannot push a V(1,1)
/// contraction below about 0.36 (the mixed modes near `(pi/2, 0)` are damped
/// by at most `1 - omega/2` per sweep); symmetric Gauss-Seidel is the
/// default so that two cycles give a tight factor solve. Both are fixed
/// linear maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoother {
    DampedJacobi { omega: f64 },
    /// Forward sweep before coarse correction, backward sweep after.
    SymmetricGaussSeidel,
}

/// Smoother and cycle shape configuration.
#[derive(Debug, Clone, Copy)]
pub struct MgConfig {
    pub smoother: Smoother,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    /// Stop coarsening once a level has at most this many nodes.
    pub coarse_node_limit: usize,
}

impl Default for MgConfig {
    fn default() -> Self {
        MgConfig {
            smoother: Smoother::SymmetricGaussSeidel,
            pre_sweeps: 1,
            post_sweeps: 1,
            coarse_node_limit: 40,
        }
    }
}

impl MgConfig {
    /// The V(1,1) damped-Jacobi variant with the classical weight 2/3.
    pub fn damped_jacobi() -> Self {
        MgConfig {
            smoother: Smoother::DampedJacobi { omega: 2.0 / 3.0 },
            ..MgConfig::default()
        }
    }
}

struct Level {
    matrix: SparseMatrix,
    matrix_t: SparseMatrix,
    inv_diag: Vec<f64>,
}

/// Mesh hierarchy with per-level operators, transfers, and a dense coarse
/// solver.
pub struct MgHierarchy {
    /// Coarsest first.
    levels: Vec<Level>,
    /// `prolong[l]` maps level `l` to level `l + 1`.
    prolong: Vec<SparseMatrix>,
    restrict: Vec<SparseMatrix>,
    coarse_lu: DenseLu,
    coarse_lu_t: DenseLu,
    fine_boundary_nodes: Vec<usize>,
    config: MgConfig,
}

/// Interpolation from the coarse grid to its uniform refinement, zeroed on
/// Dirichlet rows and columns: coincident nodes copy, edge nodes average
/// their two ends, cell centers average the four cell corners. Constant
/// vectors prolongate to constant vectors away from the boundary.
fn prolongation(coarse: &Mesh, fine: &Mesh) -> SparseMatrix {
    assert_eq!(fine.nx, 2 * coarse.nx);
    assert_eq!(fine.ny, 2 * coarse.ny);
    let fine_bdry = fine.boundary_mask();
    let coarse_bdry = coarse.boundary_mask();
    let mut triplets = Vec::new();
    let mut push = |f: usize, c: usize, w: f64| {
        if !fine_bdry[f] && !coarse_bdry[c] {
            triplets.push((f, c, w));
        }
    };
    for j in 0..=fine.ny {
        for i in 0..=fine.nx {
            let f = fine.node_index(i, j);
            match (i % 2, j % 2) {
                (0, 0) => push(f, coarse.node_index(i / 2, j / 2), 1.0),
                (1, 0) => {
                    push(f, coarse.node_index((i - 1) / 2, j / 2), 0.5);
                    push(f, coarse.node_index((i + 1) / 2, j / 2), 0.5);
                }
                (0, 1) => {
                    push(f, coarse.node_index(i / 2, (j - 1) / 2), 0.5);
                    push(f, coarse.node_index(i / 2, (j + 1) / 2), 0.5);
                }
                _ => {
                    push(f, coarse.node_index((i - 1) / 2, (j - 1) / 2), 0.25);
                    push(f, coarse.node_index((i + 1) / 2, (j - 1) / 2), 0.25);
                    push(f, coarse.node_index((i - 1) / 2, (j + 1) / 2), 0.25);
                    push(f, coarse.node_index((i + 1) / 2, (j + 1) / 2), 0.25);
                }
            }
        }
    }
    SparseMatrix::from_triplets(fine.n_nodes(), coarse.n_nodes(), &triplets)
        .expect("prolongation indices in range")
}

impl MgHierarchy {
    /// Builds the hierarchy for `fine_matrix`, which must be assembled on
    /// `fine_mesh` with its Dirichlet rows/columns already eliminated.
    pub fn build(fine_mesh: &Mesh, fine_matrix: SparseMatrix, config: MgConfig) -> Result<Self> {
        if fine_matrix.nrows() != fine_mesh.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: fine_mesh.n_nodes(),
                got: fine_matrix.nrows(),
            });
        }
        // Mesh sizes from fine down to the coarsest structured factor-2 level.
        let mut sizes = vec![(fine_mesh.nx, fine_mesh.ny)];
        loop {
            let &(nx, ny) = sizes.last().unwrap();
            let can_halve = nx % 2 == 0 && ny % 2 == 0 && nx >= 2 && ny >= 2;
            if can_halve && (nx + 1) * (ny + 1) > config.coarse_node_limit {
                sizes.push((nx / 2, ny / 2));
            } else {
                break;
            }
        }
        sizes.reverse(); // coarsest first
        let meshes: Vec<Mesh> = sizes
            .iter()
            .map(|&(nx, ny)| build_rect_mesh(nx, ny, fine_mesh.domain))
            .collect::<Result<_>>()?;

        let n_levels = meshes.len();
        let mut prolong = Vec::with_capacity(n_levels - 1);
        let mut restrict = Vec::with_capacity(n_levels - 1);
        for l in 0..n_levels - 1 {
            let p = prolongation(&meshes[l], &meshes[l + 1]);
            restrict.push(p.transpose());
            prolong.push(p);
        }

        // Galerkin coarse operators, with a unit diagonal restored on the
        // constrained rows that the zeroed transfers annihilate.
        let mut mats: Vec<Option<SparseMatrix>> = vec![None; n_levels];
        mats[n_levels - 1] = Some(fine_matrix);
        for l in (0..n_levels - 1).rev() {
            let fine = mats[l + 1].as_ref().unwrap();
            let ap = fine.matmul(&prolong[l])?;
            let rap = restrict[l].matmul(&ap)?;
            let mut triplets = Vec::with_capacity(rap.nnz() + meshes[l].boundary_nodes.len());
            for r in 0..rap.nrows() {
                let (cols, vals) = rap.row(r);
                for (c, v) in cols.iter().zip(vals) {
                    triplets.push((r, *c, *v));
                }
            }
            for &b in &meshes[l].boundary_nodes {
                triplets.push((b, b, 1.0));
            }
            mats[l] = Some(SparseMatrix::from_triplets(rap.nrows(), rap.ncols(), &triplets)?);
        }

        let mut levels = Vec::with_capacity(n_levels);
        for m in mats.into_iter() {
            let matrix = m.unwrap();
            let diag = matrix.diagonal();
            let mut inv_diag = Vec::with_capacity(diag.len());
            for (row, d) in diag.iter().enumerate() {
                if *d == 0.0 {
                    return Err(Error::NonPositiveDiagonal { row, value: *d });
                }
                inv_diag.push(1.0 / d);
            }
            levels.push(Level {
                matrix_t: matrix.transpose(),
                matrix,
                inv_diag,
            });
        }

        let coarse_dense = levels[0].matrix.to_dense();
        let coarse_lu = DenseLu::factor(&coarse_dense)?;
        let coarse_lu_t = DenseLu::factor(&coarse_dense.transpose())?;

        Ok(MgHierarchy {
            levels,
            prolong,
            restrict,
            coarse_lu,
            coarse_lu_t,
            fine_boundary_nodes: fine_mesh.boundary_nodes.clone(),
            config,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn fine_matrix(&self) -> &SparseMatrix {
        &self.levels[self.levels.len() - 1].matrix
    }

    fn level_matrix(&self, l: usize, transposed: bool) -> &SparseMatrix {
        if transposed {
            &self.levels[l].matrix_t
        } else {
            &self.levels[l].matrix
        }
    }

    fn smooth(
        &self,
        l: usize,
        transposed: bool,
        x: &mut [f64],
        b: &[f64],
        sweeps: usize,
        backward: bool,
    ) {
        let m = self.level_matrix(l, transposed);
        let inv_diag = &self.levels[l].inv_diag;
        match self.config.smoother {
            Smoother::DampedJacobi { omega } => {
                let mut ax = vec![0.0; x.len()];
                for _ in 0..sweeps {
                    m.apply_into(x, &mut ax);
                    for i in 0..x.len() {
                        x[i] += omega * inv_diag[i] * (b[i] - ax[i]);
                    }
                }
            }
            Smoother::SymmetricGaussSeidel => {
                let n = x.len();
                for _ in 0..sweeps {
                    let mut sweep_row = |i: usize| {
                        let (cols, vals) = m.row(i);
                        let mut acc = b[i];
                        for (c, v) in cols.iter().zip(vals) {
                            acc -= v * x[*c];
                        }
                        x[i] += inv_diag[i] * acc;
                    };
                    if backward {
                        (0..n).rev().for_each(&mut sweep_row);
                    } else {
                        (0..n).for_each(&mut sweep_row);
                    }
                }
            }
        }
    }

    fn cycle(&self, l: usize, b: &[f64], transposed: bool) -> Vec<f64> {
        if l == 0 {
            return if transposed {
                self.coarse_lu_t.solve(b)
            } else {
                self.coarse_lu.solve(b)
            };
        }
        let m = self.level_matrix(l, transposed);
        let mut x = vec![0.0; b.len()];
        self.smooth(l, transposed, &mut x, b, self.config.pre_sweeps, false);
        let mut r = vec![0.0; b.len()];
        m.apply_into(&x, &mut r);
        for i in 0..r.len() {
            r[i] = b[i] - r[i];
        }
        // Transposed Galerkin hierarchy shares the transfers.
        let rc = self.restrict[l - 1].mul_vec(&r);
        let ec = self.cycle(l - 1, &rc, transposed);
        let ef = self.prolong[l - 1].mul_vec(&ec);
        for i in 0..x.len() {
            x[i] += ef[i];
        }
        self.smooth(l, transposed, &mut x, b, self.config.post_sweeps, true);
        x
    }

    fn run(&self, b: &[f64], cycles: usize, transposed: bool) -> Vec<f64> {
        let top = self.levels.len() - 1;
        let m = self.level_matrix(top, transposed);
        assert_eq!(b.len(), m.nrows(), "mg dimension mismatch");
        if self.levels.len() == 1 {
            // Degenerate hierarchy: the coarse solve is exact.
            return if transposed {
                self.coarse_lu_t.solve(b)
            } else {
                self.coarse_lu.solve(b)
            };
        }
        let mut x = vec![0.0; b.len()];
        // Constrained rows are decoupled; solve them exactly up front so every
        // subsequent residual vanishes there.
        for &i in &self.fine_boundary_nodes {
            x[i] = b[i] * self.levels[top].inv_diag[i];
        }
        let mut r = vec![0.0; b.len()];
        for _ in 0..cycles {
            m.apply_into(&x, &mut r);
            for i in 0..r.len() {
                r[i] = b[i] - r[i];
            }
            let e = self.cycle(top, &r, transposed);
            for i in 0..x.len() {
                x[i] += e[i];
            }
        }
        x
    }

    /// Applies `cycles` V-cycles with zero initial guess.
    pub fn vcycle(&self, b: &[f64], cycles: usize) -> Vec<f64> {
        self.run(b, cycles, false)
    }

    /// Same cycle on the transposed hierarchy.
    pub fn vcycle_transposed(&self, b: &[f64], cycles: usize) -> Vec<f64> {
        self.run(b, cycles, true)
    }
}

/// Applies `cycles` V(1,1) cycles from a zero initial guess; a fixed linear
/// map for fixed inputs.
pub fn mg_vcycle(h: &MgHierarchy, b: &[f64], cycles: usize) -> Vec<f64> {
    h.vcycle(b, cycles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::dense_solve;
    use crate::fem::{assemble_mass, assemble_stiffness, eliminate, BoundaryDiag};
    use crate::mesh::{build_rect_mesh, Rectangle};
    use crate::operator::norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson_matrix(k: u32) -> (crate::mesh::Mesh, SparseMatrix) {
        let n = 1usize << k;
        let mesh = build_rect_mesh(n, n, Rectangle::symmetric_unit()).unwrap();
        let stiff = assemble_stiffness(&mesh, 1.0);
        let a = eliminate(&stiff, &mesh.boundary_nodes, BoundaryDiag::Unit).unwrap();
        (mesh, a)
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (mesh, a) = poisson_matrix(4);
        let h = MgHierarchy::build(&mesh, a, MgConfig::default()).unwrap();
        assert!(h.n_levels() > 1);
        let x = mg_vcycle(&h, &vec![0.0; mesh.n_nodes()], 2);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_level_hierarchy_is_exact_dense_solve() {
        let (mesh, a) = poisson_matrix(2);
        let h = MgHierarchy::build(&mesh, a.clone(), MgConfig::default()).unwrap();
        assert_eq!(h.n_levels(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let b: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = mg_vcycle(&h, &b, 1);
        let oracle = dense_solve(&a.to_dense(), &b).unwrap();
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() <= 1e-11 * (1.0 + oi.abs()));
        }
    }

    #[test]
    fn per_cycle_contraction_below_quarter() {
        let (mesh, a) = poisson_matrix(5);
        let h = MgHierarchy::build(&mesh, a.clone(), MgConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let b: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut x = vec![0.0; b.len()];
        let mut prev = norm(&b);
        let mut worst: f64 = 0.0;
        for cycle in 0..8 {
            let r: Vec<f64> = {
                let ax = a.mul_vec(&x);
                b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
            };
            let e = h.vcycle(&r, 1);
            for i in 0..x.len() {
                x[i] += e[i];
            }
            let rn: f64 = {
                let ax = a.mul_vec(&x);
                norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>())
            };
            let ratio = rn / prev;
            if cycle >= 1 {
                worst = worst.max(ratio);
            }
            prev = rn;
            if rn < 1e-14 {
                break;
            }
        }
        assert!(worst <= 0.25, "contraction factor {worst}");
    }

    #[test]
    fn prolongation_preserves_constants_in_the_interior() {
        let (mesh, a) = poisson_matrix(4);
        let h = MgHierarchy::build(&mesh, a, MgConfig::default()).unwrap();
        for (l, p) in h.prolong.iter().enumerate() {
            let coarse_interior = vec![1.0; p.ncols()];
            let fine = p.mul_vec(&coarse_interior);
            // Rows of interior fine nodes away from the boundary ring sum to
            // one; rows touching eliminated coarse nodes sum to less.
            let nx = mesh.nx >> (h.prolong.len() - 1 - l);
            let fine_mesh = build_rect_mesh(nx, nx, mesh.domain).unwrap();
            for j in 2..fine_mesh.ny.saturating_sub(1) {
                for i in 2..fine_mesh.nx.saturating_sub(1) {
                    let idx = fine_mesh.node_index(i, j);
                    assert!(
                        (fine[idx] - 1.0).abs() <= 1e-14,
                        "level {l} node ({i}, {j}): {}",
                        fine[idx]
                    );
                }
            }
        }
    }

    #[test]
    fn cycle_is_linear_map() {
        let (mesh, a) = poisson_matrix(3);
        let h = MgHierarchy::build(&mesh, a, MgConfig::default()).unwrap();
        let n = mesh.n_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (ca, cb) = (0.8, -1.3);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| ca * a + cb * b).collect();
        let lhs = h.vcycle(&combo, 2);
        let vx = h.vcycle(&x, 2);
        let vy = h.vcycle(&y, 2);
        for i in 0..n {
            let rhs = ca * vx[i] + cb * vy[i];
            assert!((lhs[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn transposed_cycle_solves_transposed_operator() {
        // Convection-diffusion factor: mildly nonsymmetric.
        let n = 8;
        let mesh = build_rect_mesh(n, n, Rectangle::symmetric_unit()).unwrap();
        let k = assemble_stiffness(&mesh, 1.0);
        let c = crate::fem::assemble_convection(&mesh, &|x, y| (y, -x));
        let m = assemble_mass(&mesh);
        let op = SparseMatrix::linear_comb(1.0, &k, 1.0, &c).unwrap();
        let op = SparseMatrix::linear_comb(1.0, &op, 3.0, &m).unwrap();
        let a = eliminate(&op, &mesh.boundary_nodes, BoundaryDiag::Unit).unwrap();
        let h = MgHierarchy::build(&mesh, a.clone(), MgConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let b: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Enough cycles to converge; compare against the dense transpose solve.
        let x = h.vcycle_transposed(&b, 30);
        let oracle = dense_solve(&a.to_dense().transpose(), &b).unwrap();
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() <= 1e-8 * (1.0 + oi.abs()), "{xi} vs {oi}");
        }
    }
}
