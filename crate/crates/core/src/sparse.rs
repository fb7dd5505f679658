//! Compressed sparse row matrices over `f64` and Matrix Market I/O.
//!
//! Column indices are strictly increasing within each row and duplicates are
//! merged at construction time in insertion order, so assembly loops that
//! visit elements in a fixed order produce bit-identical matrices.

use std::io::{BufRead, Write};

use crate::dense::DenseMatrix;
use crate::{Error, Result};

/// CSR matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from `(row, col, value)` triplets. Duplicate
    /// entries are summed in insertion order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows {
                return Err(Error::IndexOutOfRange { index: r, dim: nrows });
            }
            if c >= ncols {
                return Err(Error::IndexOutOfRange { index: c, dim: ncols });
            }
        }
        // Stable sort keeps insertion order among duplicates, which makes the
        // accumulation below deterministic.
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_counts = vec![0usize; nrows];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;

        for &(r, c, v) in &sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_counts[r] += 1;
                last = Some((r, c));
            }
        }
        let mut row_offsets = vec![0usize; nrows + 1];
        for r in 0..nrows {
            row_offsets[r + 1] = row_offsets[r] + row_counts[r];
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// All-zero matrix with the given shape.
    pub fn zero(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[r];
        let hi = self.row_offsets[r + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Entry `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// `y = M x`, accumulated in stored order.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "spmv dimension mismatch");
        assert_eq!(y.len(), self.nrows, "spmv dimension mismatch");
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
    }

    /// `M x` as a fresh vector.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.apply_into(x, &mut y);
        y
    }

    /// `M^T x` without materializing the transpose.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "spmv dimension mismatch");
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * x[r];
            }
        }
        y
    }

    /// Exact structural transpose.
    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = counts.clone();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                let p = next[*c];
                col_indices[p] = r;
                values[p] = *v;
                next[*c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Main diagonal as a vector.
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.nrows.min(self.ncols);
        (0..n).map(|i| self.get(i, i)).collect()
    }

    /// `c * M` with the same sparsity.
    pub fn scaled(&self, c: f64) -> SparseMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }

    /// `ca * A + cb * B`.
    pub fn linear_comb(ca: f64, a: &SparseMatrix, cb: f64, b: &SparseMatrix) -> Result<SparseMatrix> {
        if a.nrows != b.nrows || a.ncols != b.ncols {
            return Err(Error::DimensionMismatch {
                expected: a.nrows,
                got: b.nrows,
            });
        }
        let mut triplets = Vec::with_capacity(a.nnz() + b.nnz());
        for r in 0..a.nrows {
            let (cols, vals) = a.row(r);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((r, *c, ca * v));
            }
            let (cols, vals) = b.row(r);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((r, *c, cb * v));
            }
        }
        SparseMatrix::from_triplets(a.nrows, a.ncols, &triplets)
    }

    /// Sparse product `A * B` with rows accumulated left to right.
    pub fn matmul(&self, b: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols != b.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: b.nrows,
            });
        }
        let mut row_offsets = vec![0usize; self.nrows + 1];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0f64; b.ncols];
        let mut mark = vec![false; b.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (k, v) in cols.iter().zip(vals) {
                let (bcols, bvals) = b.row(*k);
                for (c, bv) in bcols.iter().zip(bvals) {
                    if !mark[*c] {
                        mark[*c] = true;
                        touched.push(*c);
                    }
                    acc[*c] += v * bv;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                col_indices.push(c);
                values.push(acc[c]);
                acc[c] = 0.0;
                mark[c] = false;
            }
            row_offsets[r + 1] = row_offsets[r] + touched.len();
            touched.clear();
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: b.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                d.set(r, *c, *v);
            }
        }
        d
    }

    /// Writes the matrix in Matrix Market coordinate format (1-based,
    /// `real general`, 17 significant digits).
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.16e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    /// Reads a `real general` coordinate-format Matrix Market file.
    pub fn read_matrix_market<R: BufRead>(r: &mut R) -> Result<SparseMatrix> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty Matrix Market stream".into()))??;
        let h = header.to_ascii_lowercase();
        if !h.starts_with("%%matrixmarket matrix coordinate real general") {
            return Err(Error::Parse(format!("unsupported Matrix Market header: {header}")));
        }
        let mut dims: Option<(usize, usize, usize)> = None;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            match dims {
                None => {
                    if fields.len() != 3 {
                        return Err(Error::Parse(format!("bad size line: {t}")));
                    }
                    let nr = parse_usize(fields[0])?;
                    let nc = parse_usize(fields[1])?;
                    let nz = parse_usize(fields[2])?;
                    dims = Some((nr, nc, nz));
                    triplets.reserve(nz);
                }
                Some((nr, nc, _)) => {
                    if fields.len() != 3 {
                        return Err(Error::Parse(format!("bad entry line: {t}")));
                    }
                    let i = parse_usize(fields[0])?;
                    let j = parse_usize(fields[1])?;
                    let v: f64 = fields[2]
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad value: {}", fields[2])))?;
                    if i == 0 || j == 0 || i > nr || j > nc {
                        return Err(Error::Parse(format!("entry ({i}, {j}) out of bounds")));
                    }
                    triplets.push((i - 1, j - 1, v));
                }
            }
        }
        let (nr, nc, nz) =
            dims.ok_or_else(|| Error::Parse("missing Matrix Market size line".into()))?;
        if triplets.len() != nz {
            return Err(Error::Parse(format!(
                "expected {nz} entries, found {}",
                triplets.len()
            )));
        }
        SparseMatrix::from_triplets(nr, nc, &triplets)
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad integer: {s}")))
}

/// Writes a vector as whitespace-delimited lines with 17 significant digits.
pub fn write_vector<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    for x in v {
        writeln!(w, "{:.16e}", x)?;
    }
    Ok(())
}

/// Reads a whitespace-delimited vector file.
pub fn read_vector<R: BufRead>(r: &mut R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        for tok in line.split_whitespace() {
            out.push(
                tok.parse()
                    .map_err(|_| Error::Parse(format!("bad value: {tok}")))?,
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, n: usize, m: usize, fill: f64) -> SparseMatrix {
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if rng.gen::<f64>() < fill {
                    triplets.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        SparseMatrix::from_triplets(n, m, &triplets).unwrap()
    }

    #[test]
    fn identity_apply() {
        let m = SparseMatrix::identity(5);
        let x = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(m.mul_vec(&x), x);
    }

    #[test]
    fn zero_vector_maps_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_sparse(&mut rng, 8, 8, 0.4);
        assert_eq!(m.mul_vec(&[0.0; 8]), vec![0.0; 8]);
    }

    #[test]
    fn spmv_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_sparse(&mut rng, 20, 20, 0.3);
        let d = m.to_dense();
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = m.mul_vec(&x);
        // Dense oracle: plain row-times-vector products.
        for i in 0..20 {
            let mut acc = 0.0;
            for j in 0..20 {
                acc += d.get(i, j) * x[j];
            }
            assert!((y[i] - acc).abs() <= 1e-14 * (1.0 + acc.abs()));
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let m =
            SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, -1.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 1), -1.0);
    }

    #[test]
    fn transpose_twice_is_identity_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_sparse(&mut rng, 13, 7, 0.35);
        let tt = m.transpose().transpose();
        assert_eq!(m, tt);
    }

    #[test]
    fn symmetric_matrix_equals_its_transpose() {
        // Symmetric accumulation: both (i,j) and (j,i) receive the same
        // sequence of contributions.
        let triplets = vec![
            (0, 0, 2.0),
            (0, 1, 0.1),
            (1, 0, 0.1),
            (1, 1, 3.0),
            (1, 2, -0.5),
            (2, 1, -0.5),
            (2, 2, 1.0),
        ];
        let m = SparseMatrix::from_triplets(3, 3, &triplets).unwrap();
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_sparse(&mut rng, 15, 11, 0.3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..11).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs: f64 = m.tr_mul_vec(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = m.mul_vec(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }

    #[test]
    fn matmul_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_sparse(&mut rng, 9, 14, 0.3);
        let b = random_sparse(&mut rng, 14, 6, 0.3);
        let c = a.matmul(&b).unwrap();
        let (da, db, dc) = (a.to_dense(), b.to_dense(), c.to_dense());
        for i in 0..9 {
            for j in 0..6 {
                let mut acc = 0.0;
                for k in 0..14 {
                    acc += da.get(i, k) * db.get(k, j);
                }
                assert!((dc.get(i, j) - acc).abs() <= 1e-13 * (1.0 + acc.abs()));
            }
        }
    }

    #[test]
    fn triplets_out_of_range_rejected() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 5, 1.0)]).is_err());
    }

    #[test]
    fn matrix_market_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_sparse(&mut rng, 10, 8, 0.25);
        let mut buf = Vec::new();
        m.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general"));
        let back = SparseMatrix::read_matrix_market(&mut buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn vector_file_round_trip() {
        let v = vec![1.0, -2.5e-17, 3.125, 0.1];
        let mut buf = Vec::new();
        write_vector(&mut buf, &v).unwrap();
        let back = read_vector(&mut buf.as_slice()).unwrap();
        assert_eq!(v, back);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn matrix_market_round_trip_is_bit_faithful(seed in 0u64..1000, n in 1usize..12, m in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_sparse(&mut rng, n, m, 0.4);
            let mut buf = Vec::new();
            a.write_matrix_market(&mut buf).unwrap();
            let back = SparseMatrix::read_matrix_market(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(a, back);
        }

        #[test]
        fn transpose_adjoint_identity(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_sparse(&mut rng, 10, 10, 0.4);
            let at = a.transpose();
            let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs: f64 = at.mul_vec(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = a.mul_vec(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }
}
