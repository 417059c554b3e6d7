use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        if let Some(&(r, c, _)) = sorted.iter().find(|(r, c, _)| *r >= nrows || *c >= ncols) {
            return Err(Error::InvalidArgument(format!(
                "triplet ({r}, {c}) outside a {nrows}x{ncols} matrix"
            )));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    triplets.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &triplets).expect("indices are in range")
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `b - A x` with each row accumulated in double-double arithmetic, so
    /// the result is accurate even when it is much smaller than `|A||x|`.
    pub fn residual_accurate(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "residual dimension mismatch");
        assert_eq!(b.len(), self.nrows, "residual dimension mismatch");
        (0..self.nrows)
            .map(|i| {
                let (mut hi, mut lo) = (b[i], 0.0);
                for (j, v) in self.row(i) {
                    let p = -v * x[j];
                    let perr = (-v).mul_add(x[j], -p);
                    let s = hi + p;
                    let bb = s - hi;
                    let serr = (hi - (s - bb)) + (p - bb);
                    hi = s;
                    lo += serr + perr;
                }
                hi + lo
            })
            .collect()
    }

    /// `y^T A x`
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(y).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                triplets.push((j, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &triplets).expect("indices are in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                a[(i, j)] += v;
            }
        }
        a
    }

    /// `self + s * other`; both matrices must have the same shape.
    pub fn add_scaled(&self, s: f64, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::InvalidArgument("matrix shapes differ".into()));
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, s * v)));
        }
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji| / max |a_ij|`
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.asymmetry() <= rel_tol
    }

    /// Matrix Market coordinate format (general, real).
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz()).unwrap();
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v).unwrap();
            }
        }
        out
    }

    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_matrix_market())?;
        Ok(())
    }

    pub(crate) fn triplets_faer(&self) -> Vec<faer::sparse::Triplet<usize, usize, f64>> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            out.extend(self.row(i).map(|(j, v)| faer::sparse::Triplet::new(i, j, v)));
        }
        out
    }
}

/// Sparsity pattern made of dense square blocks of a fixed size.
///
/// Block row `i` couples to the sorted block columns `neighbors[i]`. Values
/// are added block by block and stored in place, so the assembled matrix
/// does not depend on the order of insertion.
#[derive(Debug, Clone)]
pub struct BlockBuilder {
    block: usize,
    neighbors: Vec<Vec<usize>>,
    row_ptr: Vec<usize>,
    values: Vec<f64>,
}

impl BlockBuilder {
    pub fn new(block: usize, mut neighbors: Vec<Vec<usize>>) -> Self {
        for n in neighbors.iter_mut() {
            n.sort_unstable();
            n.dedup();
        }
        let nb = neighbors.len();
        let mut row_ptr = Vec::with_capacity(nb * block + 1);
        row_ptr.push(0);
        for n in &neighbors {
            for _ in 0..block {
                let last = *row_ptr.last().unwrap();
                row_ptr.push(last + n.len() * block);
            }
        }
        let nnz = *row_ptr.last().unwrap();
        Self {
            block,
            neighbors,
            row_ptr,
            values: vec![0.0; nnz],
        }
    }

    pub fn dim(&self) -> usize {
        self.neighbors.len() * self.block
    }

    /// Adds `values` (a `block x block` matrix) into block `(bi, bj)`.
    pub fn add_block(&mut self, bi: usize, bj: usize, values: &DMatrix<f64>) {
        let pos = self.neighbors[bi]
            .binary_search(&bj)
            .unwrap_or_else(|_| panic!("block ({bi}, {bj}) is not in the sparsity pattern"));
        let b = self.block;
        for ii in 0..b {
            let start = self.row_ptr[bi * b + ii] + pos * b;
            for jj in 0..b {
                self.values[start + jj] += values[(ii, jj)];
            }
        }
    }

    pub fn finish(self) -> SparseMatrix {
        let b = self.block;
        let mut col_idx = Vec::with_capacity(self.values.len());
        for n in &self.neighbors {
            for _ in 0..b {
                for &bj in n {
                    col_idx.extend(bj * b..(bj + 1) * b);
                }
            }
        }
        let dim = self.dim();
        SparseMatrix {
            nrows: dim,
            ncols: dim,
            row_ptr: self.row_ptr,
            col_idx,
            values: self.values,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (1, 1, -1.0)]).unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.matvec(&[1.0, 2.0]), vec![4.0, 0.0]);
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn block_builder_matches_dense() {
        let mut b = BlockBuilder::new(2, vec![vec![0, 1], vec![1, 0]]);
        let blk = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        b.add_block(0, 1, &blk);
        b.add_block(1, 1, &blk);
        b.add_block(1, 1, &blk);
        let a = b.finish().to_dense();
        assert_eq!(a[(0, 2)], 1.0);
        assert_eq!(a[(1, 3)], 4.0);
        assert_eq!(a[(3, 3)], 8.0);
        assert_eq!(a[(0, 0)], 0.0);
    }

    #[test]
    fn asymmetry_and_transpose() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 0.5), (0, 0, 2.0)]).unwrap();
        assert!((a.asymmetry() - 0.25).abs() < 1e-15);
        assert_eq!(a.transpose().get(0, 1), 0.5);
        let s = a.add_scaled(1.0, &a.transpose()).unwrap();
        assert!(s.is_symmetric(0.0));
    }

    #[test]
    fn matrix_market_header() {
        let a = SparseMatrix::from_triplets(3, 3, &[(2, 1, 1.5)]).unwrap();
        let text = a.to_matrix_market();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n3 3 1\n3 2 "));
    }
}
