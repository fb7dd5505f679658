//! P1 (continuous piecewise-linear) finite element assembly on triangles.
//!
//! Mass and stiffness use exact closed-form local matrices; convection and
//! anything data-dependent use the 3-point edge-midpoint rule, which is exact
//! for quadratic integrands and hence for all P1 products appearing here.
//! Element loops run in mesh order, so assembled matrices are
//! bit-reproducible.

use crate::mesh::Mesh;
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// A matrix with Dirichlet rows/columns eliminated, together with the
/// right-hand-side contribution that elimination moved out of it.
#[derive(Debug, Clone)]
pub struct AssembledForm {
    pub matrix: SparseMatrix,
    /// Per-row contribution `sum_{j in boundary} A_ij g_j` removed from
    /// interior rows (zero at boundary rows).
    pub lifting: Vec<f64>,
    /// The boundary index set that was eliminated.
    pub constrained: Vec<usize>,
}

/// What elimination leaves on the diagonal of constrained rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryDiag {
    /// Unit diagonal: the block pins the boundary unknown.
    Unit,
    /// Zero diagonal: used for off-diagonal coupling blocks whose boundary
    /// action is handled elsewhere.
    Zero,
}

fn triangle_geometry(mesh: &Mesh, e: usize) -> ([usize; 3], [[f64; 2]; 3], f64) {
    let idx = mesh.elements[e];
    let p = [
        mesh.nodes[idx[0]],
        mesh.nodes[idx[1]],
        mesh.nodes[idx[2]],
    ];
    let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    (idx, p, 0.5 * two_area)
}

/// Gradients of the three barycentric basis functions (constant per element).
fn basis_gradients(p: &[[f64; 2]; 3], area: f64) -> [[f64; 2]; 3] {
    let s = 1.0 / (2.0 * area);
    [
        [(p[1][1] - p[2][1]) * s, (p[2][0] - p[1][0]) * s],
        [(p[2][1] - p[0][1]) * s, (p[0][0] - p[2][0]) * s],
        [(p[0][1] - p[1][1]) * s, (p[1][0] - p[0][0]) * s],
    ]
}

/// Exact local mass matrix `(area/12) [[2,1,1],[1,2,1],[1,1,2]]`.
pub(crate) fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

pub(crate) fn local_stiffness(p: &[[f64; 2]; 3], area: f64, diffusivity: f64) -> [[f64; 3]; 3] {
    let g = basis_gradients(p, area);
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = diffusivity * area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    k
}

/// Local convection matrix `N_ab = integral (w . grad phi_b) phi_a` by the
/// 3-point edge-midpoint rule.
pub(crate) fn local_convection(
    p: &[[f64; 2]; 3],
    area: f64,
    wind: &dyn Fn(f64, f64) -> (f64, f64),
) -> [[f64; 3]; 3] {
    let g = basis_gradients(p, area);
    // Edge midpoints between local vertices (0,1), (1,2), (2,0).
    let mids = [
        [(p[0][0] + p[1][0]) * 0.5, (p[0][1] + p[1][1]) * 0.5],
        [(p[1][0] + p[2][0]) * 0.5, (p[1][1] + p[2][1]) * 0.5],
        [(p[2][0] + p[0][0]) * 0.5, (p[2][1] + p[0][1]) * 0.5],
    ];
    // phi_a at the midpoints: vertex a is on two of the three edges.
    let phi = [
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
    ];
    let w = area / 3.0;
    let winds: Vec<(f64, f64)> = mids.iter().map(|m| wind(m[0], m[1])).collect();
    let mut n = [[0.0; 3]; 3];
    for a in 0..3 {
        // integral of w phi_a over the element, per component
        let mut wx = 0.0;
        let mut wy = 0.0;
        for q in 0..3 {
            wx += w * winds[q].0 * phi[a][q];
            wy += w * winds[q].1 * phi[a][q];
        }
        for b in 0..3 {
            n[a][b] = wx * g[b][0] + wy * g[b][1];
        }
    }
    n
}

fn assemble_local(
    mesh: &Mesh,
    local: impl Fn(&[[f64; 2]; 3], f64) -> [[f64; 3]; 3],
) -> SparseMatrix {
    let n = mesh.n_nodes();
    let mut triplets = Vec::with_capacity(9 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let (idx, p, area) = triangle_geometry(mesh, e);
        let m = local(&p, area);
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((idx[a], idx[b], m[a][b]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets).expect("element indices in range")
}

/// P1 mass matrix (symmetric positive definite).
pub fn assemble_mass(mesh: &Mesh) -> SparseMatrix {
    assemble_local(mesh, |_, area| local_mass(area))
}

/// P1 stiffness matrix scaled by `diffusivity` (symmetric positive
/// semidefinite before boundary conditions, annihilates constants).
pub fn assemble_stiffness(mesh: &Mesh, diffusivity: f64) -> SparseMatrix {
    assert!(diffusivity > 0.0, "diffusivity must be positive");
    assemble_local(mesh, |p, area| local_stiffness(p, area, diffusivity))
}

/// P1 convection matrix for the given wind field (annihilates constants).
pub fn assemble_convection(mesh: &Mesh, wind: &dyn Fn(f64, f64) -> (f64, f64)) -> SparseMatrix {
    assemble_local(mesh, |p, area| local_convection(p, area, wind))
}

/// Nodal interpolation of a scalar function.
pub fn interpolate(mesh: &Mesh, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    mesh.nodes.iter().map(|p| f(p[0], p[1])).collect()
}

/// Zeroes the given rows and columns; `diag` selects the diagonal left on
/// constrained rows.
pub fn eliminate(matrix: &SparseMatrix, boundary: &[usize], diag: BoundaryDiag) -> Result<SparseMatrix> {
    let n = matrix.nrows();
    let mut mask = vec![false; n];
    for &b in boundary {
        if b >= n {
            return Err(Error::IndexOutOfRange { index: b, dim: n });
        }
        mask[b] = true;
    }
    let mut triplets = Vec::with_capacity(matrix.nnz() + boundary.len());
    for r in 0..n {
        if mask[r] {
            if diag == BoundaryDiag::Unit {
                triplets.push((r, r, 1.0));
            }
            continue;
        }
        let (cols, vals) = matrix.row(r);
        for (c, v) in cols.iter().zip(vals) {
            if !mask[*c] {
                triplets.push((r, *c, *v));
            }
        }
    }
    SparseMatrix::from_triplets(n, matrix.ncols(), &triplets)
}

/// `sum_{j in boundary} A_ij g_j` on unconstrained rows, zero on constrained
/// rows: the contribution elimination moves to the right-hand side.
pub fn lifting_vector(matrix: &SparseMatrix, boundary: &[usize], values: &[f64]) -> Vec<f64> {
    let n = matrix.nrows();
    let mut mask = vec![false; n];
    for &b in boundary {
        mask[b] = true;
    }
    let mut padded = vec![0.0; matrix.ncols()];
    for &b in boundary {
        padded[b] = values[b];
    }
    let mut lift = matrix.mul_vec(&padded);
    for (i, l) in lift.iter_mut().enumerate() {
        if mask[i] {
            *l = 0.0;
        }
    }
    lift
}

/// Symmetric Dirichlet elimination with lifting. Boundary rows and columns
/// are zeroed with a unit diagonal, the column contribution times the
/// boundary values is subtracted from the right-hand side, and boundary
/// right-hand-side entries are set to the boundary values.
pub fn apply_dirichlet(
    matrix: &SparseMatrix,
    rhs: &[f64],
    boundary: &[usize],
    values: &[f64],
) -> Result<(AssembledForm, Vec<f64>)> {
    let n = matrix.nrows();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: values.len(),
        });
    }
    for &b in boundary {
        if b >= n {
            return Err(Error::IndexOutOfRange { index: b, dim: n });
        }
    }
    let eliminated = eliminate(matrix, boundary, BoundaryDiag::Unit)?;
    let lifting = lifting_vector(matrix, boundary, values);
    let mut out_rhs: Vec<f64> = rhs.iter().zip(&lifting).map(|(r, l)| r - l).collect();
    for &b in boundary {
        out_rhs[b] = values[b];
    }
    Ok((
        AssembledForm {
            matrix: eliminated,
            lifting,
            constrained: boundary.to_vec(),
        },
        out_rhs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{dense_solve, dense_symmetric_eig, DenseMatrix};
    use crate::mesh::{build_rect_mesh, Rectangle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Degree-5 Dunavant rule on a triangle, used as an independent
    /// quadrature oracle for the closed-form local matrices.
    fn quadrature_oracle(p: &[[f64; 2]; 3], f: impl Fn(f64, f64) -> f64) -> f64 {
        let w0 = 0.225;
        let w1 = 0.132394152788506;
        let w2 = 0.125939180544827;
        let a1 = 0.059715871789770;
        let b1 = 0.470142064105115;
        let a2 = 0.797426985353087;
        let b2 = 0.101286507323456;
        let pts = [
            (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, w0),
            (a1, b1, b1, w1),
            (b1, a1, b1, w1),
            (b1, b1, a1, w1),
            (a2, b2, b2, w2),
            (b2, a2, b2, w2),
            (b2, b2, a2, w2),
        ];
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let mut acc = 0.0;
        for (l0, l1, l2, w) in pts {
            let x = l0 * p[0][0] + l1 * p[1][0] + l2 * p[2][0];
            let y = l0 * p[0][1] + l1 * p[1][1] + l2 * p[2][1];
            acc += w * f(x, y);
        }
        acc * area
    }

    fn barycentric(p: &[[f64; 2]; 3], a: usize, x: f64, y: f64) -> f64 {
        let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
            - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let (i, j) = ((a + 1) % 3, (a + 2) % 3);
        ((p[j][0] - p[i][0]) * (y - p[i][1]) - (x - p[i][0]) * (p[j][1] - p[i][1])) / area2
    }

    #[test]
    fn unit_right_triangle_local_mass() {
        // Exact value (1/24) [[2,1,1],[1,2,1],[1,1,2]] for the unit right
        // triangle, cross-checked against the quadrature oracle.
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let m = local_mass(0.5);
        for a in 0..3 {
            for b in 0..3 {
                let expected = if a == b { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!((m[a][b] - expected).abs() <= 1e-15);
                let oracle =
                    quadrature_oracle(&p, |x, y| barycentric(&p, a, x, y) * barycentric(&p, b, x, y));
                assert!((m[a][b] - oracle).abs() <= 1e-14, "mass[{a}][{b}]");
            }
        }
    }

    #[test]
    fn local_stiffness_matches_quadrature_oracle() {
        // A skewed triangle; gradients are constant so the oracle integrates
        // a constant, but it is computed through an independent path.
        let p = [[0.2, -0.1], [1.3, 0.4], [0.5, 1.1]];
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let k = local_stiffness(&p, area, 1.0);
        let h = 1e-6;
        for a in 0..3 {
            for b in 0..3 {
                let oracle = quadrature_oracle(&p, |x, y| {
                    // central-difference gradients of the barycentric functions
                    let ga = (
                        (barycentric(&p, a, x + h, y) - barycentric(&p, a, x - h, y)) / (2.0 * h),
                        (barycentric(&p, a, x, y + h) - barycentric(&p, a, x, y - h)) / (2.0 * h),
                    );
                    let gb = (
                        (barycentric(&p, b, x + h, y) - barycentric(&p, b, x - h, y)) / (2.0 * h),
                        (barycentric(&p, b, x, y + h) - barycentric(&p, b, x, y - h)) / (2.0 * h),
                    );
                    ga.0 * gb.0 + ga.1 * gb.1
                });
                assert!(
                    (k[a][b] - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
                    "stiffness[{a}][{b}]: {} vs {oracle}",
                    k[a][b]
                );
            }
        }
    }

    #[test]
    fn mass_partition_of_unity() {
        // 1^T M 1 = |domain| at any resolution.
        for k in [1usize, 2, 4, 8] {
            let mesh = build_rect_mesh(k, k, Rectangle::symmetric_unit()).unwrap();
            let m = assemble_mass(&mesh);
            let ones = vec![1.0; mesh.n_nodes()];
            let total: f64 = m.mul_vec(&ones).iter().sum();
            assert!((total - 4.0).abs() <= 1e-12 * 4.0, "k = {k}: {total}");
        }
    }

    #[test]
    fn mass_is_spd_and_bit_symmetric() {
        let mesh = build_rect_mesh(4, 3, Rectangle::UNIT).unwrap();
        let m = assemble_mass(&mesh);
        assert_eq!(m, m.transpose());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let x: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let quad: f64 = m.mul_vec(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!(quad > 0.0);
        }
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let mesh = build_rect_mesh(5, 7, Rectangle::new(-2.0, 1.0, 0.0, 3.0)).unwrap();
        let k = assemble_stiffness(&mesh, 1.7);
        let ones = vec![1.0; mesh.n_nodes()];
        for v in k.mul_vec(&ones) {
            assert!(v.abs() <= 1e-13);
        }
        assert_eq!(k, k.transpose());
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let x: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let quad: f64 = k.mul_vec(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!(quad >= -1e-12);
        }
    }

    #[test]
    fn stiffness_interior_diagonal_is_four() {
        // Five-point-equivalent stencil on the right-triangle mesh; verified
        // against the quadrature oracle through the local matrices.
        let mesh = build_rect_mesh(2, 2, Rectangle::UNIT).unwrap();
        let k = assemble_stiffness(&mesh, 1.0);
        let center = mesh.node_index(1, 1);
        assert!((k.get(center, center) - 4.0).abs() <= 1e-13);
    }

    #[test]
    fn convection_annihilates_constants_and_zero_wind() {
        let mesh = build_rect_mesh(4, 4, Rectangle::UNIT).unwrap();
        let n = assemble_convection(&mesh, &|x, y| (x * y, x - y));
        let ones = vec![1.0; mesh.n_nodes()];
        for v in n.mul_vec(&ones) {
            assert!(v.abs() <= 1e-13);
        }
        let z = assemble_convection(&mesh, &|_, _| (0.0, 0.0));
        assert_eq!(z.mul_vec(&ones), vec![0.0; mesh.n_nodes()]);
        for r in 0..mesh.n_nodes() {
            let (_, vals) = z.row(r);
            for v in vals {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn constant_wind_skew_symmetric_on_interior() {
        // Integration by parts: N + N^T acts as a boundary term only, so it
        // vanishes on functions supported away from the boundary.
        let mesh = build_rect_mesh(6, 6, Rectangle::UNIT).unwrap();
        let n = assemble_convection(&mesh, &|_, _| (1.0, 0.0));
        let nt = n.transpose();
        let sum = SparseMatrix::linear_comb(1.0, &n, 1.0, &nt).unwrap();
        let mask = mesh.boundary_mask();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let x: Vec<f64> = (0..mesh.n_nodes())
                .map(|i| if mask[i] { 0.0 } else { rng.gen_range(-1.0..1.0) })
                .collect();
            let q: f64 = sum.mul_vec(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!(q.abs() <= 1e-12, "interior skew-symmetry violated: {q}");
        }
    }

    #[test]
    fn convection_matches_quadrature_oracle_entrywise() {
        // Linear wind keeps the integrand quadratic, where the 3-point
        // edge-midpoint rule is exact and comparable to the oracle.
        let p = [[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]];
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let wind = |x: f64, y: f64| (1.0 + x, x - 2.0 * y);
        let n = local_convection(&p, area, &wind);
        let h = 1e-6;
        for a in 0..3 {
            for b in 0..3 {
                let oracle = quadrature_oracle(&p, |x, y| {
                    let (wx, wy) = wind(x, y);
                    let gb = (
                        (barycentric(&p, b, x + h, y) - barycentric(&p, b, x - h, y)) / (2.0 * h),
                        (barycentric(&p, b, x, y + h) - barycentric(&p, b, x, y - h)) / (2.0 * h),
                    );
                    (wx * gb.0 + wy * gb.1) * barycentric(&p, a, x, y)
                });
                assert!(
                    (n[a][b] - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
                    "convection[{a}][{b}]: {} vs {oracle}",
                    n[a][b]
                );
            }
        }
    }

    #[test]
    fn interpolate_values() {
        let mesh = build_rect_mesh(2, 2, Rectangle::symmetric_unit()).unwrap();
        let ones = interpolate(&mesh, &|_, _| 1.0);
        assert!(ones.iter().all(|&v| v == 1.0));

        let vd = interpolate(&mesh, &|x, y| {
            (std::f64::consts::PI * x / 2.0).cos() * (std::f64::consts::PI * y / 2.0).cos() + 1.0
        });
        let center = mesh.node_index(1, 1);
        assert!((vd[center] - 2.0).abs() <= 1e-15);

        let xs = interpolate(&mesh, &|x, _| x);
        let left = mesh.node_index(0, 1);
        assert_eq!(xs[left], -1.0);
    }

    #[test]
    fn jacobi_scaled_mass_eigenvalues_within_bounds() {
        for (nx, ny) in [(2usize, 2usize), (3, 4), (5, 2)] {
            let mesh = build_rect_mesh(nx, ny, Rectangle::new(-1.0, 1.5, 0.0, 2.0)).unwrap();
            let m = assemble_mass(&mesh);
            let d = m.diagonal();
            let n = mesh.n_nodes();
            // Symmetrized D^{-1/2} M D^{-1/2} shares the spectrum of D^{-1} M.
            let dm = DenseMatrix::from_fn(n, n, |i, j| m.get(i, j) / (d[i] * d[j]).sqrt());
            let eig = dense_symmetric_eig(&dm).unwrap();
            let lo = eig.first().copied().unwrap();
            let hi = eig.last().copied().unwrap();
            assert!(lo >= 0.5 - 1e-10, "lambda_min = {lo}");
            assert!(hi <= 2.0 + 1e-10, "lambda_max = {hi}");
        }
    }

    #[test]
    fn dirichlet_identity_matrix_untouched() {
        let n = 6;
        let eye = SparseMatrix::identity(n);
        let rhs = vec![5.0; n];
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let (form, out) = apply_dirichlet(&eye, &rhs, &[0, 5], &values).unwrap();
        assert_eq!(form.matrix, eye);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[5], 5.0);
        for i in 1..5 {
            assert_eq!(out[i], 5.0);
        }
    }

    #[test]
    fn dirichlet_homogeneous_keeps_interior_rhs() {
        let mesh = build_rect_mesh(3, 3, Rectangle::UNIT).unwrap();
        let k = assemble_stiffness(&mesh, 1.0);
        let rhs: Vec<f64> = (0..mesh.n_nodes()).map(|i| i as f64).collect();
        let zeros = vec![0.0; mesh.n_nodes()];
        let (form, out) = apply_dirichlet(&k, &rhs, &mesh.boundary_nodes, &zeros).unwrap();
        let mask = mesh.boundary_mask();
        for i in 0..mesh.n_nodes() {
            if mask[i] {
                assert_eq!(out[i], 0.0);
                let (cols, vals) = form.matrix.row(i);
                assert_eq!(cols, &[i]);
                assert_eq!(vals, &[1.0]);
            } else {
                assert_eq!(out[i], rhs[i]);
            }
        }
    }

    #[test]
    fn dirichlet_constant_solution() {
        // -lap v = 0 with v = 1 on the boundary has v = 1 everywhere.
        let mesh = build_rect_mesh(4, 4, Rectangle::UNIT).unwrap();
        let k = assemble_stiffness(&mesh, 1.0);
        let rhs = vec![0.0; mesh.n_nodes()];
        let ones = vec![1.0; mesh.n_nodes()];
        let (form, out) = apply_dirichlet(&k, &rhs, &mesh.boundary_nodes, &ones).unwrap();
        let x = dense_solve(&form.matrix.to_dense(), &out).unwrap();
        for v in x {
            assert!((v - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dirichlet_rejects_bad_index() {
        let eye = SparseMatrix::identity(3);
        let r = apply_dirichlet(&eye, &[0.0; 3], &[7], &[0.0; 3]);
        assert!(matches!(r, Err(Error::IndexOutOfRange { .. })));
    }
}
