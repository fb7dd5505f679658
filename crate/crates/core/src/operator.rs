//! Apply-only linear operators and 2x2 block composition.
//!
//! Saddle systems and preconditioners are composed from operators without
//! materializing them; the dense probe [`operator_to_dense`] turns any small
//! operator into an explicit matrix for verification.

use crate::dense::DenseMatrix;
use crate::sparse::SparseMatrix;

/// An apply-only linear map `y = Op x`.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn supports_transpose(&self) -> bool {
        false
    }

    fn apply_transpose(&self, _x: &[f64], _y: &mut [f64]) {
        panic!("operator does not support transpose application");
    }

    /// `Op x` as a fresh vector.
    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.apply(x, &mut y);
        y
    }
}

impl LinearOperator for SparseMatrix {
    fn nrows(&self) -> usize {
        SparseMatrix::nrows(self)
    }

    fn ncols(&self) -> usize {
        SparseMatrix::ncols(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y);
    }

    fn supports_transpose(&self) -> bool {
        true
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let t = self.tr_mul_vec(x);
        y.copy_from_slice(&t);
    }
}

/// The identity map.
pub struct IdentityOp(pub usize);

impl LinearOperator for IdentityOp {
    fn nrows(&self) -> usize {
        self.0
    }

    fn ncols(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }

    fn supports_transpose(&self) -> bool {
        true
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// `c * Op`.
pub struct Scaled<'a> {
    pub op: &'a dyn LinearOperator,
    pub factor: f64,
}

impl LinearOperator for Scaled<'_> {
    fn nrows(&self) -> usize {
        self.op.nrows()
    }

    fn ncols(&self) -> usize {
        self.op.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply(x, y);
        for v in y.iter_mut() {
            *v *= self.factor;
        }
    }

    fn supports_transpose(&self) -> bool {
        self.op.supports_transpose()
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_transpose(x, y);
        for v in y.iter_mut() {
            *v *= self.factor;
        }
    }
}

/// 2x2 block operator; `None` blocks are zero.
pub struct BlockOperator<'a> {
    row_sizes: [usize; 2],
    col_sizes: [usize; 2],
    blocks: [[Option<&'a dyn LinearOperator>; 2]; 2],
}

impl<'a> BlockOperator<'a> {
    pub fn new(
        row_sizes: [usize; 2],
        col_sizes: [usize; 2],
        blocks: [[Option<&'a dyn LinearOperator>; 2]; 2],
    ) -> Self {
        for (i, row) in blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if let Some(op) = b {
                    assert_eq!(op.nrows(), row_sizes[i], "block ({i},{j}) row size");
                    assert_eq!(op.ncols(), col_sizes[j], "block ({i},{j}) col size");
                }
            }
        }
        BlockOperator {
            row_sizes,
            col_sizes,
            blocks,
        }
    }
}

impl LinearOperator for BlockOperator<'_> {
    fn nrows(&self) -> usize {
        self.row_sizes[0] + self.row_sizes[1]
    }

    fn ncols(&self) -> usize {
        self.col_sizes[0] + self.col_sizes[1]
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        let (x0, x1) = x.split_at(self.col_sizes[0]);
        y.fill(0.0);
        let (y0, y1) = y.split_at_mut(self.row_sizes[0]);
        let mut tmp = vec![0.0; self.row_sizes[0].max(self.row_sizes[1])];
        for (i, ydst) in [y0, y1].into_iter().enumerate() {
            for (j, xsrc) in [x0, x1].into_iter().enumerate() {
                if let Some(op) = self.blocks[i][j] {
                    let t = &mut tmp[..self.row_sizes[i]];
                    op.apply(xsrc, t);
                    for (d, s) in ydst.iter_mut().zip(t.iter()) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// Materializes an operator column by column. Intended for small
/// verification instances.
pub fn operator_to_dense(op: &dyn LinearOperator) -> DenseMatrix {
    let (m, n) = (op.nrows(), op.ncols());
    let mut out = DenseMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..m {
            out.set(i, j, col[i]);
        }
    }
    out
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
