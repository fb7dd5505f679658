//! Nested structured triangulations of axis-aligned rectangles.
//!
//! Each grid cell is split into two triangles along the diagonal from its
//! lower-left to its upper-right corner. Node numbering is row-major with x
//! running fastest, so node `(i, j)` has index `j * (nx + 1) + i`. Refinement
//! halves the cell size on the same domain; because coordinates are always
//! computed as `lo + i * (width / n)`, coarse nodes coincide bit-exactly with
//! fine nodes and the coarse-to-fine parent relation is pure index
//! arithmetic.

use crate::{Error, Result};

/// Axis-aligned rectangle `(x_lo, x_hi) x (y_lo, y_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rectangle {
    /// The unit square `(0,1)^2`.
    pub const UNIT: Rectangle = Rectangle {
        x_lo: 0.0,
        x_hi: 1.0,
        y_lo: 0.0,
        y_hi: 1.0,
    };

    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Self {
        Rectangle { x_lo, x_hi, y_lo, y_hi }
    }

    /// The square `(-1,1)^2`.
    pub fn symmetric_unit() -> Self {
        Rectangle::new(-1.0, 1.0, -1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Structured triangular mesh of a rectangle.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Cell counts per axis.
    pub nx: usize,
    pub ny: usize,
    pub domain: Rectangle,
    /// Node coordinates, row-major (x fastest).
    pub nodes: Vec<[f64; 2]>,
    /// Node-index triples, counter-clockwise.
    pub elements: Vec<[usize; 3]>,
    /// Sorted indices of nodes on the rectangle boundary.
    pub boundary_nodes: Vec<usize>,
    /// Refinement depth (0 for a directly built mesh).
    pub level: usize,
}

/// Builds a structured triangulation with `nx * ny` cells, two triangles per
/// cell, split along the lower-left to upper-right diagonal.
pub fn build_rect_mesh(nx: usize, ny: usize, domain: Rectangle) -> Result<Mesh> {
    if nx < 1 || ny < 1 {
        return Err(Error::InvalidDimension(format!(
            "cell counts must be positive, got {nx} x {ny}"
        )));
    }
    if !(domain.x_lo < domain.x_hi) || !(domain.y_lo < domain.y_hi) {
        return Err(Error::InvalidDimension(format!(
            "degenerate rectangle ({}, {}) x ({}, {})",
            domain.x_lo, domain.x_hi, domain.y_lo, domain.y_hi
        )));
    }
    let n_nodes = (nx + 1)
        .checked_mul(ny + 1)
        .ok_or_else(|| Error::Overflow(format!("node count for {nx} x {ny} mesh")))?;

    let dx = domain.width() / nx as f64;
    let dy = domain.height() / ny as f64;

    let mut nodes = Vec::with_capacity(n_nodes);
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([domain.x_lo + i as f64 * dx, domain.y_lo + j as f64 * dy]);
        }
    }

    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let ll = idx(i, j);
            let lr = idx(i + 1, j);
            let ul = idx(i, j + 1);
            let ur = idx(i + 1, j + 1);
            elements.push([ll, lr, ur]);
            elements.push([ll, ur, ul]);
        }
    }

    let mut boundary_nodes = Vec::with_capacity(2 * (nx + ny));
    for j in 0..=ny {
        for i in 0..=nx {
            if i == 0 || i == nx || j == 0 || j == ny {
                boundary_nodes.push(idx(i, j));
            }
        }
    }

    Ok(Mesh {
        nx,
        ny,
        domain,
        nodes,
        elements,
        boundary_nodes,
        level: 0,
    })
}

/// Returns the mesh with `nx`, `ny` doubled on the same domain. Coarse nodes
/// coincide bit-exactly with the corresponding fine nodes.
pub fn refine(mesh: &Mesh) -> Result<Mesh> {
    let nx = mesh
        .nx
        .checked_mul(2)
        .ok_or_else(|| Error::Overflow("refined cell count".into()))?;
    let ny = mesh
        .ny
        .checked_mul(2)
        .ok_or_else(|| Error::Overflow("refined cell count".into()))?;
    let mut fine = build_rect_mesh(nx, ny, mesh.domain)?;
    fine.level = mesh.level + 1;
    Ok(fine)
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Row-major node index of grid position `(i, j)`.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn refine(&self) -> Result<Mesh> {
        refine(self)
    }

    /// Boolean mask over nodes, true on the rectangle boundary.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_nodes()];
        for &b in &self.boundary_nodes {
            mask[b] = true;
        }
        mask
    }

    /// Twice the signed area of element `e` (positive for counter-clockwise
    /// orientation).
    pub fn element_double_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.elements[e];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pc = self.nodes[c];
        (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_mesh_counts() {
        let m = build_rect_mesh(1, 1, Rectangle::UNIT).unwrap();
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.n_elements(), 2);
        assert_eq!(m.boundary_nodes.len(), 4);
    }

    #[test]
    fn benchmark_grid_node_count() {
        // 2^k + 1 points per dimension at k = 5.
        let m = build_rect_mesh(32, 32, Rectangle::symmetric_unit()).unwrap();
        assert_eq!(m.n_nodes(), 1089);
        assert_eq!(m.n_elements(), 2 * 32 * 32);
        assert_eq!(m.boundary_nodes.len(), 2 * (32 + 32));
    }

    #[test]
    fn two_by_two_counts() {
        let m = build_rect_mesh(2, 2, Rectangle::UNIT).unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.boundary_nodes.len(), 8);
        let mask = m.boundary_mask();
        let interior: Vec<usize> = (0..9).filter(|&i| !mask[i]).collect();
        assert_eq!(interior, vec![4]);
    }

    #[test]
    fn orientation_and_total_area() {
        let domain = Rectangle::new(-1.0, 2.5, 0.25, 1.75);
        let m = build_rect_mesh(7, 3, domain).unwrap();
        let mut total = 0.0;
        for e in 0..m.n_elements() {
            let a2 = m.element_double_area(e);
            assert!(a2 > 0.0, "element {e} not counter-clockwise");
            total += 0.5 * a2;
        }
        assert!((total - domain.area()).abs() <= 1e-13 * domain.area());
    }

    #[test]
    fn refine_doubles() {
        let m = build_rect_mesh(1, 1, Rectangle::UNIT).unwrap();
        let f = refine(&m).unwrap();
        assert_eq!((f.nx, f.ny), (2, 2));
        assert_eq!(f.n_nodes(), 9);
        assert_eq!(f.level, 1);
        let ff = refine(&f).unwrap();
        assert_eq!(ff.n_nodes(), 25);
        assert_eq!(ff.level, 2);
    }

    #[test]
    fn refinement_is_nested_bit_exactly() {
        let domain = Rectangle::new(-1.0, 1.0, 0.3, 2.7);
        let coarse = build_rect_mesh(3, 5, domain).unwrap();
        let fine = refine(&coarse).unwrap();
        for j in 0..=coarse.ny {
            for i in 0..=coarse.nx {
                let c = coarse.nodes[coarse.node_index(i, j)];
                let f = fine.nodes[fine.node_index(2 * i, 2 * j)];
                assert_eq!(c[0].to_bits(), f[0].to_bits());
                assert_eq!(c[1].to_bits(), f[1].to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_rect_mesh(0, 1, Rectangle::UNIT).is_err());
        assert!(build_rect_mesh(1, 0, Rectangle::UNIT).is_err());
        assert!(build_rect_mesh(1, 1, Rectangle::new(0.0, 0.0, 0.0, 1.0)).is_err());
        assert!(build_rect_mesh(1, 1, Rectangle::new(1.0, 0.0, 0.0, 1.0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn area_sum_matches_rectangle(
            nx in 1usize..12,
            ny in 1usize..12,
            x_lo in -5.0f64..5.0,
            w in 0.1f64..10.0,
            y_lo in -5.0f64..5.0,
            h in 0.1f64..10.0,
        ) {
            let domain = Rectangle::new(x_lo, x_lo + w, y_lo, y_lo + h);
            let m = build_rect_mesh(nx, ny, domain).unwrap();
            prop_assert_eq!(m.n_nodes(), (nx + 1) * (ny + 1));
            prop_assert_eq!(m.n_elements(), 2 * nx * ny);
            prop_assert_eq!(m.boundary_nodes.len(), 2 * (nx + ny));
            let total: f64 = (0..m.n_elements()).map(|e| 0.5 * m.element_double_area(e)).sum();
            prop_assert!((total - domain.area()).abs() <= 1e-13 * domain.area());
        }
    }
}
