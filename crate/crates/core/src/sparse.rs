//! Compressed sparse row storage for the assembled space-time operator.

use crate::Scalar;

#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a CSR matrix from per-row entry lists; duplicate columns within
    /// a row are summed and entries sorted by column.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, T)>>) -> Self {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter();
            if let Some((mut c, mut v)) = iter.next() {
                for (c2, v2) in iter {
                    if c2 == c {
                        v = v + v2;
                    } else {
                        col_idx.push(c);
                        values.push(v);
                        c = c2;
                        v = v2;
                    }
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc = acc + self.values[k] * x[self.col_idx[k] as usize];
            }
            y[r] = acc;
        }
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| (self.col_idx[k] as usize, self.values[k]))
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.n_rows)
            .map(|r| self.row_ptr[r + 1] - self.row_ptr[r])
            .max()
            .unwrap_or(0)
    }

    /// Dense copy, for small-grid test oracles only.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.n_cols]; self.n_rows];
        for r in 0..self.n_rows {
            for (c, v) in self.row_entries(r) {
                out[r][c] = out[r][c] + v;
            }
        }
        out
    }

    /// Extracts the dense 2x2 diagonal blocks `(2p, 2p+1) x (2p, 2p+1)`
    /// used by the point-block Jacobi preconditioner.
    pub fn point_blocks(&self) -> Vec<[[T; 2]; 2]> {
        assert_eq!(self.n_rows % 2, 0);
        let nb = self.n_rows / 2;
        let mut blocks = vec![[[T::zero(); 2]; 2]; nb];
        for r in 0..self.n_rows {
            let b = r / 2;
            let lr = r % 2;
            for (c, v) in self.row_entries(r) {
                if c / 2 == b {
                    blocks[b][lr][c % 2] = v;
                }
            }
        }
        blocks
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_merged_and_sorted() {
        let rows = vec![vec![(2u32, 1.0), (0, 2.0), (2, 3.0)], vec![], vec![(1, -1.0)]];
        let m = CsrMatrix::from_rows(3, rows);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row_ptr, vec![0, 2, 2, 3]);
        assert_eq!(m.col_idx, vec![0, 2, 1]);
        assert_eq!(m.values, vec![2.0, 4.0, -1.0]);
        let mut y = vec![0.0; 3];
        m.matvec(&[1.0, 10.0, 100.0], &mut y);
        assert_eq!(y, vec![402.0, 0.0, -10.0]);
    }

    #[test]
    fn point_blocks_extract_diagonal() {
        let rows = vec![
            vec![(0u32, 4.0), (1, 1.0), (2, 9.0)],
            vec![(0, -1.0), (1, 5.0)],
            vec![(2, 2.0), (0, 7.0)],
            vec![(3, 3.0)],
        ];
        let m = CsrMatrix::from_rows(4, rows);
        let b = m.point_blocks();
        assert_eq!(b[0], [[4.0, 1.0], [-1.0, 5.0]]);
        assert_eq!(b[1], [[2.0, 0.0], [0.0, 3.0]]);
    }
}
