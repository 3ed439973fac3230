use std::ops::{Index, IndexMut};

use crate::error::{check_dim, Error, Result};

/// Small row-major dense matrix used for projected systems and test oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, values: vec![0.0; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, values: Vec<f64>) -> Result<Self> {
        check_dim(nrows * ncols, values.len())?;
        Ok(Self { nrows, ncols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(nrows * ncols);
        for r in rows {
            check_dim(ncols, r.len())?;
            values.extend_from_slice(r);
        }
        Ok(Self { nrows, ncols, values })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(nrows, ncols);
        for (j, c) in cols.iter().enumerate() {
            check_dim(nrows, c.len())?;
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ncols, x.len())?;
        Ok((0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.ncols, other.nrows)?;
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.ncols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.ncols + j]
    }
}

/// Solves the square system `t x = rhs` by LU with partial pivoting.
pub fn dense_solve(t: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = t.nrows();
    check_dim(n, t.ncols())?;
    check_dim(n, rhs.len())?;
    let floor = 1e-14 * t.max_abs();
    let mut a = t.clone();
    let mut b = rhs.to_vec();
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= floor || pmax == 0.0 {
            return Err(Error::Singular(format!("pivot {pmax:e} at column {k}")));
        }
        if p != k {
            for j in 0..n {
                a.values.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let piv = a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / piv;
            if f == 0.0 {
                continue;
            }
            a[(i, k)] = 0.0;
            for j in k + 1..n {
                a[(i, j)] -= f * a[(k, j)];
            }
            b[i] -= f * b[k];
        }
    }
    back_substitute(&a, &mut b);
    Ok(b)
}

/// Solves an upper-triangular system in place using the leading square block of `r`.
fn back_substitute(r: &DenseMatrix, b: &mut [f64]) {
    let n = b.len();
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= r[(i, j)] * b[j];
        }
        b[i] = s / r[(i, i)];
    }
}

/// Householder QR of an `m x n` matrix with `m >= n`.
///
/// Returns the thin factors `(Q, R)` with `Q` of size `m x n`, orthonormal
/// columns, and `R` upper triangular `n x n`.
pub fn householder_qr(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        return Err(Error::InvalidParameter(format!("QR needs rows >= cols, got {m}x{n}")));
    }
    let mut r = a.clone();
    let reflectors = reflect_columns(&mut r);

    let mut q = DenseMatrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = 1.0;
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        for j in 0..n {
            let s: f64 = (k..m).map(|i| v[i - k] * q[(i, j)]).sum();
            for i in k..m {
                q[(i, j)] -= 2.0 * s * v[i - k];
            }
        }
    }
    let mut rr = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            rr[(i, j)] = r[(i, j)];
        }
    }
    Ok((q, rr))
}

/// Reduces `a` to upper-triangular form in place, returning the unit
/// Householder vectors (each stored from its pivot row down).
fn reflect_columns(a: &mut DenseMatrix) -> Vec<Vec<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut out = Vec::with_capacity(n);
    for k in 0..n.min(m) {
        let mut v: Vec<f64> = (k..m).map(|i| a[(i, k)]).collect();
        let alpha = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if alpha == 0.0 {
            out.push(vec![0.0; m - k]);
            continue;
        }
        v[0] += if v[0] >= 0.0 { alpha } else { -alpha };
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= vn);
        for j in k..n {
            let s: f64 = (k..m).map(|i| v[i - k] * a[(i, j)]).sum();
            for i in k..m {
                a[(i, j)] -= 2.0 * s * v[i - k];
            }
        }
        out.push(v);
    }
    out
}

/// Least-squares solution of `min ||rhs - t c||` for a full-column-rank `t`.
pub fn dense_lstsq(t: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (t.nrows(), t.ncols());
    check_dim(m, rhs.len())?;
    if m < n {
        return Err(Error::RankDeficient { column: m });
    }
    let mut r = t.clone();
    let reflectors = reflect_columns(&mut r);
    let mut b = rhs.to_vec();
    for (k, v) in reflectors.iter().enumerate() {
        let s: f64 = (k..m).map(|i| v[i - k] * b[i]).sum();
        for i in k..m {
            b[i] -= 2.0 * s * v[i - k];
        }
    }
    let floor = 1e-14 * t.max_abs() * (m as f64).sqrt();
    for k in 0..n {
        if r[(k, k)].abs() <= floor || r[(k, k)] == 0.0 {
            return Err(Error::RankDeficient { column: k });
        }
    }
    b.truncate(n);
    back_substitute(&r, &mut b);
    Ok(b)
}
