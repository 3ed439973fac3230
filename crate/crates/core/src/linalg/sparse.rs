use crate::error::{check_dim, Error, Result};

use super::{DenseMatrix, LinearOperator};

/// Rows below this count are always multiplied sequentially.
#[cfg(feature = "parallel")]
const PAR_ROW_THRESHOLD: usize = 512;

/// Compressed sparse row matrix in canonical form: column indices strictly
/// increasing inside every row, no stored duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a canonical matrix from `(row, col, value)` triplets. Duplicates
    /// are summed; explicit zeros are kept.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, _) in &entries {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidParameter(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    /// Assembles from raw CSR arrays, validating the canonical-form invariants.
    pub fn from_raw_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if row_ptr.len() != nrows + 1 || row_ptr[0] != 0 {
            return bad("row_ptr must have length nrows+1 and start at 0");
        }
        if row_ptr[nrows] != values.len() || values.len() != col_idx.len() {
            return bad("row_ptr[nrows], col_idx and values lengths disagree");
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return bad("row_ptr must be nondecreasing");
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad("column indices must be strictly increasing within a row");
            }
            if cols.iter().any(|&j| j >= ncols) {
                return bad("column index out of range");
            }
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Stores every entry of `dense` whose magnitude exceeds `drop_below`.
    pub fn from_dense(dense: &DenseMatrix, drop_below: f64) -> Self {
        let mut trip = Vec::new();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                let v = dense[(i, j)];
                if v.abs() > drop_below {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.nrows(), dense.ncols(), trip).expect("indices in range")
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

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `self + a * other`
    pub fn add_scaled(&self, a: f64, other: &CsrMatrix) -> Result<Self> {
        check_dim(self.nrows, other.nrows)?;
        check_dim(self.ncols, other.ncols)?;
        let trip = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, a * v)));
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn transpose(&self) -> Self {
        let trip = self.triplets().map(|(i, j, v)| (j, i, v));
        Self::from_triplets(self.ncols, self.nrows, trip).expect("indices in range")
    }

    /// Sparse product `self * other`, row by row with a dense accumulator.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<Self> {
        check_dim(self.ncols, other.nrows)?;
        let m = other.ncols;
        let mut acc = vec![0.0; m];
        let mut mark = vec![usize::MAX; m];
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let (mut col_idx, mut values) = (Vec::new(), Vec::new());
        row_ptr.push(0);
        for i in 0..self.nrows {
            let start = col_idx.len();
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&j, &b) in ocols.iter().zip(ovals) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        col_idx.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            col_idx[start..].sort_unstable();
            values.extend(col_idx[start..].iter().map(|&j| acc[j]));
            row_ptr.push(col_idx.len());
        }
        Self::from_raw_parts(self.nrows, m, row_ptr, col_idx, values)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// `A x`, summing each row in column-index order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ncols, x.len())?;
        #[cfg(feature = "parallel")]
        if self.nrows >= PAR_ROW_THRESHOLD {
            return Ok(self.spmv_par(x));
        }
        Ok(self.spmv_seq(x))
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
    }

    /// Single-threaded product. Panics on dimension mismatch.
    pub fn spmv_seq(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.ncols, x.len());
        (0..self.nrows).map(|i| self.row_dot(i, x)).collect()
    }

    /// Row-parallel product. Every row is still summed sequentially, so the
    /// result is bitwise identical to [`CsrMatrix::spmv_seq`].
    #[cfg(feature = "parallel")]
    pub fn spmv_par(&self, x: &[f64]) -> Vec<f64> {
        use rayon::prelude::*;
        assert_eq!(self.ncols, x.len());
        (0..self.nrows)
            .into_par_iter()
            .with_min_len(64)
            .map(|i| self.row_dot(i, x))
            .collect()
    }

    /// `A^T x` without forming the transpose.
    pub fn spmv_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.nrows, x.len())?;
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        Ok(y)
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }
    fn ncols(&self) -> usize {
        self.ncols
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.spmv(x).expect("operator dimension mismatch")
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.spmv_t(x).expect("operator dimension mismatch")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(m: usize, n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if rng.random::<f64>() < 0.6 {
                    trip.push((i, j, rng.random::<f64>() * 2.0 - 1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m, n, trip).unwrap()
    }

    #[test]
    fn identity_and_diagonal_products() {
        let i3 = CsrMatrix::identity(3);
        assert_eq!(i3.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(i3.spmv_t(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let d = CsrMatrix::from_diagonal(&[2.0, 3.0]);
        assert_eq!(d.spmv(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn single_entry_transpose_product() {
        let a = CsrMatrix::from_triplets(2, 2, [(0, 1, 1.0)]).unwrap();
        assert_eq!(a.spmv_t(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn spmv_matches_dense_rows() {
        let a = random_matrix(5, 5, 7);
        let d = a.to_dense();
        let x = vec![1.0; 5];
        let y = a.spmv(&x).unwrap();
        for i in 0..5 {
            let want: f64 = (0..5).map(|j| d[(i, j)] * x[j]).sum();
            assert!((y[i] - want).abs() <= 1e-14);
        }
    }

    #[test]
    fn spmv_t_matches_explicit_transpose() {
        let a = random_matrix(6, 4, 3);
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let y = a.spmv_t(&x).unwrap();
        let z = a.transpose().spmv(&x).unwrap();
        for (u, v) in y.iter().zip(&z) {
            assert!((u - v).abs() <= 1e-14);
        }
    }

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let a = CsrMatrix::from_triplets(2, 3, [(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, 4.0)])
            .unwrap();
        assert_eq!(a.row_ptr(), &[0, 2, 3]);
        assert_eq!(a.col_idx(), &[0, 2, 1]);
        assert_eq!(a.values(), &[2.0, 1.5, 4.0]);
    }

    #[test]
    fn dimension_errors() {
        let a = CsrMatrix::identity(3);
        assert!(matches!(a.spmv(&[1.0]), Err(Error::Dimension { expected: 3, found: 1 })));
        assert!(matches!(a.spmv_t(&[1.0, 2.0]), Err(Error::Dimension { .. })));
        assert!(CsrMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).is_err());
        assert!(CsrMatrix::from_raw_parts(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_product_is_bitwise_sequential() {
        let a = random_matrix(700, 40, 21);
        let x: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        assert_eq!(a.spmv_par(&x), a.spmv_seq(&x));
    }

    mod props {
        use super::{random_matrix, ChaCha8Rng, Rng, SeedableRng};
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn adjoint_consistency(seed in 0u64..500, m in 1usize..12, n in 1usize..12) {
                let a = random_matrix(m, n, seed);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
                let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
                let y: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
                let lhs = crate::linalg::vector::dot(&y, &a.spmv(&x).unwrap());
                let rhs = crate::linalg::vector::dot(&a.spmv_t(&y).unwrap(), &x);
                let scale = a.frobenius_norm() * crate::linalg::vector::norm2(&x)
                    * crate::linalg::vector::norm2(&y) + 1e-300;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
                prop_assert_eq!(a.spmv(&x).unwrap(), a.spmv(&x).unwrap());
            }
        }
    }
}
