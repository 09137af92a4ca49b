//! Symmetric real sparse matrices in compressed row form.

use ndarray::{Array2, ArrayView2};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Symmetric sparse matrix stored as CSR. Column indices are sorted within
/// each row and explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from unordered (row, col, value) triplets. Duplicate
    /// coordinates are summed; entries that sum to exactly zero are dropped.
    /// The caller supplies both (i, j) and (j, i) for off-diagonal entries;
    /// symmetry is checked.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for (i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i}, {j}) outside {dim}x{dim} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParam {
                    name: "value",
                    message: format!("non-finite entry at ({i}, {j})"),
                });
            }
            rows[i].push((j, v));
        }
        let mut row_offsets = Vec::with_capacity(dim + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for row in &mut rows {
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            for (j, v) in merged {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        let m = SparseMatrix {
            dim,
            row_offsets,
            col_indices,
            values,
        };
        m.check_symmetry()?;
        Ok(m)
    }

    /// Assembles from per-row (column, value) lists that are already sorted,
    /// deduplicated, zero-free, and symmetric. Used by kernel sparsification
    /// where those invariants hold by construction.
    pub(crate) fn from_sorted_rows(dim: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert_eq!(rows.len(), dim);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_offsets = Vec::with_capacity(dim + 1);
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_offsets.push(0);
        for row in rows {
            for (j, v) in row {
                col_indices.push(j);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            dim,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(dim: usize) -> Self {
        SparseMatrix {
            dim,
            row_offsets: (0..=dim).collect(),
            col_indices: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    fn check_symmetry(&self) -> Result<()> {
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                if self.get(j, i) != v {
                    return Err(Error::InvalidParam {
                        name: "triplets",
                        message: format!("asymmetric entry at ({i}, {j})"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates the (column, value) entries of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// Value at (i, j), zero if the entry is not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        match self.col_indices[lo..hi].binary_search(&j) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    /// y = S x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let lo = self.row_offsets[i];
            let hi = self.row_offsets[i + 1];
            let mut acc = 0.0;
            for idx in lo..hi {
                acc += self.values[idx] * x[self.col_indices[idx]];
            }
            y[i] = acc;
        }
    }

    /// Y = S X for dense X with rows indexed by vertex. The accumulation
    /// order per output element is fixed, so results are deterministic.
    pub fn matmul_dense(&self, x: ArrayView2<'_, f64>, y: &mut Array2<f64>) {
        debug_assert_eq!(x.nrows(), self.dim);
        debug_assert_eq!(y.dim(), x.dim());
        let cols = x.ncols();
        y.fill(0.0);
        for i in 0..self.dim {
            let lo = self.row_offsets[i];
            let hi = self.row_offsets[i + 1];
            let mut out = y.row_mut(i);
            let out = out.as_slice_mut().expect("contiguous row");
            for idx in lo..hi {
                let v = self.values[idx];
                let src = x.row(self.col_indices[idx]);
                let src = src.as_slice().expect("contiguous row");
                for c in 0..cols {
                    out[c] += v * src[c];
                }
            }
        }
    }

    /// Applies S to every row of `x` (vectors stored as rows): out[r] = S x[r].
    pub fn matvec_rows(&self, x: ArrayView2<'_, f64>, out: &mut Array2<f64>) {
        debug_assert_eq!(x.ncols(), self.dim);
        debug_assert_eq!(out.dim(), x.dim());
        for (src, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            let src = src.as_slice().expect("contiguous row");
            let dst = dst.as_slice_mut().expect("contiguous row");
            self.matvec(src, dst);
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// Absolute row sums, the degree vector used by kernel renormalization.
    pub fn abs_row_sums(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum())
            .collect()
    }

    /// D^{-1/2} S D^{-1/2} for a diagonal given as a dense vector; rows with
    /// zero diagonal entry are zeroed rather than divided. Scaling divides by
    /// sqrt(d_i * d_j) in one step so clean ratios stay exact.
    pub fn scale_sym(&self, diag: &[f64]) -> SparseMatrix {
        debug_assert_eq!(diag.len(), self.dim);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.dim];
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                if diag[i] <= 0.0 || diag[j] <= 0.0 {
                    continue;
                }
                let scaled = v / (diag[i] * diag[j]).sqrt();
                if scaled != 0.0 {
                    rows[i].push((j, scaled));
                }
            }
        }
        SparseMatrix::from_sorted_rows(self.dim, rows)
    }

    /// SHA-256 over the little-endian byte image of the matrix; used as the
    /// cache key for eigensystems and the input hash in run manifests.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for &o in &self.row_offsets {
            h.update((o as u64).to_le_bytes());
        }
        for &c in &self.col_indices {
            h.update((c as u64).to_le_bytes());
        }
        for &v in &self.values {
            h.update(v.to_le_bytes());
        }
        h.finalize().into()
    }

    /// Largest |A_ij - B_ij| over the union of both sparsity patterns.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - other.get(i, j)).abs());
            }
            for (j, v) in other.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> SparseMatrix {
        // 0 -- 1 -- 2
        SparseMatrix::from_triplets(
            3,
            vec![(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(
            2,
            vec![
                (0, 1, 0.5),
                (0, 1, 0.5),
                (1, 0, 1.0),
                (0, 0, 2.0),
                (0, 0, -2.0),
            ],
        )
        .unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn asymmetric_triplets_rejected() {
        let err = SparseMatrix::from_triplets(2, vec![(0, 1, 1.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let m = path3();
        let x = [1.0, 2.0, 3.0];
        let mut y = [0.0; 3];
        m.matvec(&x, &mut y);
        assert_eq!(y, [2.0, 4.0, 2.0]);
    }

    #[test]
    fn matmul_dense_matches_matvec() {
        let m = path3();
        let x = ndarray::arr2(&[[1.0, -1.0], [2.0, 0.5], [3.0, 0.0]]);
        let mut y = Array2::zeros((3, 2));
        m.matmul_dense(x.view(), &mut y);
        let mut col = [0.0; 3];
        m.matvec(&[1.0, 2.0, 3.0], &mut col);
        for i in 0..3 {
            assert_eq!(y[[i, 0]], col[i]);
        }
    }

    #[test]
    fn scale_sym_zero_degree_row_stays_zero() {
        let m = SparseMatrix::from_triplets(2, vec![(0, 0, 2.0)]).unwrap();
        let scaled = m.scale_sym(&[2.0, 0.0]);
        assert_eq!(scaled.get(0, 0), 1.0);
        assert_eq!(scaled.nnz(), 1);
    }

    #[test]
    fn content_hash_distinguishes_values() {
        let a = path3();
        let b = SparseMatrix::from_triplets(
            3,
            vec![(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0)],
        )
        .unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), path3().content_hash());
    }
}
