//! Tridiagonal projected systems. Krylov solvers rebuild these every step,
//! so the solves here are O(k) rather than going through the dense kernels.

use crate::error::{check_dim, Error, Result};

use super::DenseMatrix;

/// A tridiagonal matrix with `ncols` columns and either `ncols` or
/// `ncols + 1` rows. `sub[j]` is entry `(j+1, j)`, `sup[j]` is `(j, j+1)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub sub: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn ncols(&self) -> usize {
        self.diag.len()
    }

    /// Appends column `k` with entries `(k-1, k) = upper`, `(k, k) = diag`
    /// and `(k+1, k) = lower`. `upper` is ignored for the first column.
    pub fn push_column(&mut self, upper: f64, diag: f64, lower: f64) {
        if !self.diag.is_empty() {
            self.sup.push(upper);
        }
        self.diag.push(diag);
        self.sub.push(lower);
    }

    /// Dense `(k+1) x k` form (`square = false`) or leading `k x k` block.
    pub fn to_dense(&self, square: bool) -> DenseMatrix {
        let k = self.ncols();
        let rows = if square { k } else { k + 1 };
        let mut d = DenseMatrix::zeros(rows, k);
        for j in 0..k {
            d[(j, j)] = self.diag[j];
            if j + 1 < rows {
                d[(j + 1, j)] = self.sub[j];
            }
            if j + 1 < k {
                d[(j, j + 1)] = self.sup[j];
            }
        }
        d
    }

    /// Transpose of the leading square block, as a tridiagonal.
    pub fn square_transpose(&self) -> Tridiagonal {
        let k = self.ncols();
        Tridiagonal {
            diag: self.diag.clone(),
            sub: self.sup.iter().copied().chain((k > 0).then_some(0.0)).collect(),
            sup: self.sub.iter().take(k.saturating_sub(1)).copied().collect(),
        }
    }

    fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.sub)
            .chain(&self.sup)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Solves the leading `k x k` block `T x = rhs` by Gaussian elimination with
/// partial pivoting (one extra superdiagonal of fill).
pub fn tridiagonal_solve(t: &Tridiagonal, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = t.ncols();
    check_dim(n, rhs.len())?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let floor = 1e-14 * t.max_abs();
    let mut d = t.diag.clone();
    let mut du: Vec<f64> = t.sup.clone();
    let mut dl: Vec<f64> = t.sub[..n - 1].to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut b = rhs.to_vec();

    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i].abs() <= floor || d[i] == 0.0 {
                return Err(Error::Singular(format!("tridiagonal pivot at {i}")));
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        } else {
            if dl[i].abs() <= floor {
                return Err(Error::Singular(format!("tridiagonal pivot at {i}")));
            }
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if i + 1 < n - 1 {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            du[i] = tmp;
            b.swap(i, i + 1);
            b[i + 1] -= f * b[i];
        }
    }
    if d[n - 1].abs() <= floor || d[n - 1] == 0.0 {
        return Err(Error::Singular(format!("tridiagonal pivot at {}", n - 1)));
    }
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
    Ok(b)
}

/// Least-squares solve of the full `(k+1) x k` tridiagonal system by Givens
/// rotations. Returns the minimizer and the residual norm `||rhs - T c||`.
pub fn tridiagonal_lstsq(t: &Tridiagonal, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let k = t.ncols();
    check_dim(k + 1, rhs.len())?;
    let floor = 1e-14 * t.max_abs();
    // r[j] holds column j of R in rows j-2, j-1, j.
    let mut r = vec![[0.0f64; 3]; k];
    let mut rot: Vec<(f64, f64)> = Vec::with_capacity(k);
    let mut b = rhs.to_vec();
    for j in 0..k {
        // Column j as rows (j-2, j-1, j, j+1).
        let mut col = [0.0, if j > 0 { t.sup[j - 1] } else { 0.0 }, t.diag[j], t.sub[j]];
        if j >= 2 {
            let (c, s) = rot[j - 2];
            let (a, bb) = (col[0], col[1]);
            col[0] = c * a + s * bb;
            col[1] = -s * a + c * bb;
        }
        if j >= 1 {
            let (c, s) = rot[j - 1];
            let (a, bb) = (col[1], col[2]);
            col[1] = c * a + s * bb;
            col[2] = -s * a + c * bb;
        }
        let (a, bb) = (col[2], col[3]);
        let h = a.hypot(bb);
        let (c, s) = if h == 0.0 { (1.0, 0.0) } else { (a / h, bb / h) };
        col[2] = h;
        rot.push((c, s));
        let (x, y) = (b[j], b[j + 1]);
        b[j] = c * x + s * y;
        b[j + 1] = -s * x + c * y;
        if h <= floor || h == 0.0 {
            return Err(Error::RankDeficient { column: j });
        }
        r[j] = [col[0], col[1], col[2]];
    }
    let residual = b[k].abs();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = b[i];
        if i + 1 < k {
            s -= r[i + 1][1] * x[i + 1];
        }
        if i + 2 < k {
            s -= r[i + 2][0] * x[i + 2];
        }
        x[i] = s / r[i][2];
    }
    Ok((x, residual))
}
