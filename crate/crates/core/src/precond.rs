//! Structured preconditioner for the saddle-point matrix.
//!
//! With `W = G G^T` and `G^T A = Q R`, `M` factors as `L U` where
//!
//! ```text
//!     L = [ R^T          0       ]      U = [ R   Q^T G^{-1} ]
//!         [ -G^{-T} Q    G^{-T} Q ]          [ 0   Q^T G^{-1} ]
//! ```
//!
//! Replacing `Q, R` by incomplete factors gives `L~`, `U~`, applied through
//!
//! ```text
//!     L~^{-1} = [ R~^{-T}   0         ]     U~^{-1} = [ R~^{-1}   -R~^{-1} ]
//!               [ R~^{-T}   Q~^T G^T  ]               [ 0          G Q~    ]
//! ```
//!
//! so that `L~^{-1} M U~^{-1}` is close to the identity. `Q~` stands in for
//! `Q~^{-T}` since the incomplete factor is only nearly orthogonal.

use crate::error::{check_dim, Error, Result};
use crate::linalg::vector::{add, axpy, dot, norm2, sub};
use crate::linalg::{CsrMatrix, LinearOperator};
use crate::nspcg::{nspcg_solve_observed, IterateObserver, NspcgConfig, Scattering, SolveResult};
use crate::saddle::{SaddleOperator, SaddleSystem, SaddleVector};
use crate::spectral;

/// Default drop tolerance for the incomplete QR factorization.
pub const DEFAULT_DROPTOL: f64 = 0.01;

/// Cholesky factor `G` of the weight, `W = G G^T`.
#[derive(Debug, Clone, PartialEq)]
pub enum CholeskyFactor {
    /// `G = g I`.
    Scalar(f64),
    /// Lower-triangular `G`.
    Lower(CsrMatrix),
}

impl CholeskyFactor {
    /// `G x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CholeskyFactor::Scalar(g) => x.iter().map(|v| g * v).collect(),
            CholeskyFactor::Lower(l) => l.apply(x),
        }
    }

    /// `G^T x`
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CholeskyFactor::Scalar(g) => x.iter().map(|v| g * v).collect(),
            CholeskyFactor::Lower(l) => l.apply_transpose(x),
        }
    }

    /// `G^{-1} x`
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CholeskyFactor::Scalar(g) => x.iter().map(|v| v / g).collect(),
            CholeskyFactor::Lower(l) => lower_solve(l, x),
        }
    }

    /// `G^{-T} x`
    pub fn solve_transpose(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CholeskyFactor::Scalar(g) => x.iter().map(|v| v / g).collect(),
            CholeskyFactor::Lower(l) => lower_transpose_solve(l, x),
        }
    }

    /// `G^T B`
    pub fn transpose_times(&self, b: &CsrMatrix) -> Result<CsrMatrix> {
        match self {
            CholeskyFactor::Scalar(g) => Ok(b.scaled(*g)),
            CholeskyFactor::Lower(l) => l.transpose().matmul(b),
        }
    }
}

/// Sparse Cholesky of a symmetric positive definite matrix.
///
/// Row `i` of `G` solves `G_{<i} g = w_{<i}` against the rows already
/// computed; a nonpositive pivot means `W` is not positive definite.
pub fn cholesky_spd(w: &CsrMatrix) -> Result<CholeskyFactor> {
    let n = w.nrows();
    check_dim(n, w.ncols())?;
    let tol = 1e-12 * w.max_abs().max(f64::MIN_POSITIVE);
    for (i, j, v) in w.triplets() {
        if (v - w.get(j, i)).abs() > tol {
            return Err(Error::InvalidParameter(format!("weight is not symmetric at ({i}, {j})")));
        }
    }
    // Strictly-lower columns of G, filled as rows are produced.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut diag = vec![0.0; n];
    let mut trip = Vec::new();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let (wc, wv) = w.row(i);
        let mut wii = 0.0;
        for (&j, &v) in wc.iter().zip(wv) {
            if j < i {
                x[j] = v;
            } else if j == i {
                wii = v;
            }
        }
        let mut sumsq = 0.0;
        for j in 0..i {
            if x[j] == 0.0 {
                continue;
            }
            let gij = x[j] / diag[j];
            x[j] = 0.0;
            for &(k, gkj) in &cols[j] {
                x[k] -= gkj * gij;
            }
            sumsq += gij * gij;
            cols[j].push((i, gij));
            trip.push((i, j, gij));
        }
        let pivot = wii - sumsq;
        if !(pivot > 0.0) {
            return Err(Error::NotSpd(format!("nonpositive pivot {pivot:.3e} in row {i}")));
        }
        diag[i] = pivot.sqrt();
        trip.push((i, i, diag[i]));
    }
    Ok(CholeskyFactor::Lower(CsrMatrix::from_triplets(n, n, trip)?))
}

fn diag_of(m: &CsrMatrix, i: usize) -> f64 {
    m.get(i, i)
}

/// Forward substitution with a lower-triangular CSR matrix.
fn lower_solve(l: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..l.nrows() {
        let (cols, vals) = l.row(i);
        let mut s = x[i];
        let mut d = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j < i {
                s -= v * x[j];
            } else if j == i {
                d = v;
            }
        }
        x[i] = s / d;
    }
    x
}

/// `L^T x = b` using the rows of `L`.
fn lower_transpose_solve(l: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..l.nrows()).rev() {
        x[i] /= diag_of(l, i);
        let xi = x[i];
        let (cols, vals) = l.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j < i {
                x[j] -= v * xi;
            }
        }
    }
    x
}

/// `R x = b` using the rows of upper-triangular `R`.
fn upper_solve(r: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..r.nrows()).rev() {
        let (cols, vals) = r.row(i);
        let mut s = x[i];
        let mut d = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j > i {
                s -= v * x[j];
            } else if j == i {
                d = v;
            }
        }
        x[i] = s / d;
    }
    x
}

/// `R^T x = b` using the rows of upper-triangular `R`.
fn upper_transpose_solve(r: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..r.nrows() {
        x[i] /= diag_of(r, i);
        let xi = x[i];
        let (cols, vals) = r.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j > i {
                x[j] -= v * xi;
            }
        }
    }
    x
}

/// Thin QR factors of `G^T A`, exact or thresholded.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: CsrMatrix,
    /// Upper triangular with a nonzero diagonal.
    pub r: CsrMatrix,
    pub droptol: f64,
    pub exact: bool,
    /// `max |B - Q R|`.
    pub fit_residual: f64,
}

impl QrFactors {
    /// `max |Q^T Q - I|`. Costs one sparse product.
    pub fn orthogonality_defect(&self) -> f64 {
        let qtq = self.q.transpose().matmul(&self.q).expect("square factor");
        let mut worst = 0.0_f64;
        for i in 0..qtq.nrows() {
            worst = worst.max((qtq.get(i, i) - 1.0).abs());
        }
        for (i, j, v) in qtq.triplets() {
            if i != j {
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    pub fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        upper_solve(&self.r, b)
    }

    pub fn solve_r_transpose(&self, b: &[f64]) -> Vec<f64> {
        upper_transpose_solve(&self.r, b)
    }
}

fn sparse_dot(col: &[(usize, f64)], x: &[f64]) -> f64 {
    col.iter().map(|&(i, v)| v * x[i]).sum()
}

fn sparse_axpy(a: f64, col: &[(usize, f64)], y: &mut [f64]) {
    for &(i, v) in col {
        y[i] += a * v;
    }
}

/// Thresholded modified Gram-Schmidt on the columns of `b`.
///
/// For column `j`, a coefficient `r_ij` with `|r_ij| < droptol * |b_j|` is
/// skipped. After orthogonalization, entries of `q_j` below `droptol` are
/// dropped and the column is renormalized, with `r_jj = q_j^T a`. With
/// `droptol = 0` every column gets a second Gram-Schmidt pass.
pub fn incomplete_qr(b: &CsrMatrix, droptol: f64) -> Result<QrFactors> {
    let n = b.nrows();
    check_dim(n, b.ncols())?;
    if !(droptol >= 0.0) || !droptol.is_finite() {
        return Err(Error::InvalidParameter(format!("droptol must be >= 0, got {droptol}")));
    }
    let exact = droptol == 0.0;
    let bt = b.transpose();
    let mut qcols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut rtrip = Vec::new();
    let mut a = vec![0.0; n];
    for j in 0..n {
        a.iter_mut().for_each(|v| *v = 0.0);
        let (rows, vals) = bt.row(j);
        for (&i, &v) in rows.iter().zip(vals) {
            a[i] = v;
        }
        let bnorm = norm2(&a);
        if bnorm == 0.0 {
            return Err(Error::Singular(format!("column {j} of G^T A is zero")));
        }
        let mut coef = vec![0.0; j];
        for _pass in 0..if exact { 2 } else { 1 } {
            for (i, q) in qcols.iter().enumerate() {
                let rij = sparse_dot(q, &a);
                if rij == 0.0 || rij.abs() < droptol * bnorm {
                    continue;
                }
                sparse_axpy(-rij, q, &mut a);
                coef[i] += rij;
            }
        }
        let anorm = norm2(&a);
        if anorm <= 1e-14 * bnorm {
            return Err(Error::Singular(format!("column {j} is dependent on earlier columns")));
        }
        let mut q: Vec<(usize, f64)> = a
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, v / anorm))
            .filter(|&(_, v)| v != 0.0 && v.abs() >= droptol)
            .collect();
        let qn = q.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if qn == 0.0 {
            return Err(Error::Singular(format!("column {j} of Q vanished after dropping")));
        }
        q.iter_mut().for_each(|(_, v)| *v /= qn);
        let rjj = sparse_dot(&q, &a);
        if rjj.abs() <= 1e-14 * bnorm {
            return Err(Error::Singular(format!("R has a zero pivot in column {j}")));
        }
        for (i, c) in coef.into_iter().enumerate() {
            if c != 0.0 {
                rtrip.push((i, j, c));
            }
        }
        rtrip.push((j, j, rjj));
        qcols.push(q);
    }

    let r = CsrMatrix::from_triplets(n, n, rtrip)?;
    // Column j of Q R is sum_i r_ij q_i; R^T gives those r_ij row-wise.
    let rt = r.transpose();
    let mut fit_residual = 0.0_f64;
    for j in 0..n {
        a.iter_mut().for_each(|v| *v = 0.0);
        let (rows, vals) = bt.row(j);
        for (&i, &v) in rows.iter().zip(vals) {
            a[i] = v;
        }
        let (is, rs) = rt.row(j);
        for (&i, &rij) in is.iter().zip(rs) {
            sparse_axpy(-rij, &qcols[i], &mut a);
        }
        fit_residual = fit_residual.max(a.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let qtrip = qcols
        .iter()
        .enumerate()
        .flat_map(|(j, c)| c.iter().map(move |&(i, v)| (i, j, v)));
    let q = CsrMatrix::from_triplets(n, n, qtrip)?;
    Ok(QrFactors { q, r, droptol, exact, fit_residual })
}

/// `G` and the (incomplete) QR factors of `G^T A`.
#[derive(Debug, Clone)]
pub struct SaddlePreconditioner {
    pub g: CholeskyFactor,
    pub qr: QrFactors,
}

impl SaddlePreconditioner {
    /// Factors `G^T A` for the system's `A` and `W`.
    pub fn new(sys: &SaddleSystem, droptol: f64) -> Result<Self> {
        let g = sys.weight().cholesky();
        let b = g.transpose_times(sys.a())?;
        let qr = incomplete_qr(&b, droptol)?;
        Ok(Self { g, qr })
    }

    pub fn n(&self) -> usize {
        self.qr.r.nrows()
    }

    fn split<'v>(&self, v: &'v [f64]) -> Result<(&'v [f64], &'v [f64])> {
        check_dim(2 * self.n(), v.len())?;
        Ok(v.split_at(self.n()))
    }

    fn l_inv_flat(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.split(v)?;
        let top = self.qr.solve_r_transpose(a);
        let qgb = self.qr.q.apply_transpose(&self.g.apply_transpose(b));
        let bottom = add(&top, &qgb);
        Ok([top, bottom].concat())
    }

    fn u_inv_flat(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.split(v)?;
        let top = self.qr.solve_r(&sub(a, b));
        let bottom = self.g.apply(&self.qr.q.apply(b));
        Ok([top, bottom].concat())
    }

    fn l_inv_t_flat(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.split(v)?;
        let top = self.qr.solve_r(&add(a, b));
        let bottom = self.g.apply(&self.qr.q.apply(b));
        Ok([top, bottom].concat())
    }

    fn u_inv_t_flat(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.split(v)?;
        let top = self.qr.solve_r_transpose(a);
        let qgb = self.qr.q.apply_transpose(&self.g.apply_transpose(b));
        let bottom = sub(&qgb, &top);
        Ok([top, bottom].concat())
    }

    /// `[R~^{-T} a; R~^{-T} a + Q~^T G^T b]`
    pub fn apply_l_inv(&self, v: &SaddleVector) -> Result<SaddleVector> {
        SaddleVector::from_vec(self.l_inv_flat(v.as_slice())?)
    }

    /// `[R~^{-1} (a - b); G Q~ b]`
    pub fn apply_u_inv(&self, v: &SaddleVector) -> Result<SaddleVector> {
        SaddleVector::from_vec(self.u_inv_flat(v.as_slice())?)
    }

    /// `L~^{-T} v = [R~^{-1} (a + b); G Q~ b]`
    pub fn apply_l_inv_transpose(&self, v: &SaddleVector) -> Result<SaddleVector> {
        SaddleVector::from_vec(self.l_inv_t_flat(v.as_slice())?)
    }

    /// `U~^{-T} v = [R~^{-T} a; Q~^T G^T b - R~^{-T} a]`
    pub fn apply_u_inv_transpose(&self, v: &SaddleVector) -> Result<SaddleVector> {
        SaddleVector::from_vec(self.u_inv_t_flat(v.as_slice())?)
    }

    /// `L~ v = [R~^T a; G^{-T} Q~ (b - a)]`. The inverse of
    /// [`apply_l_inv`](Self::apply_l_inv) when the factors are exact.
    pub fn apply_l(&self, v: &SaddleVector) -> Result<SaddleVector> {
        let (a, b) = self.split(v.as_slice())?;
        let top = self.qr.r.apply_transpose(a);
        let bottom = self.g.solve_transpose(&self.qr.q.apply(&sub(b, a)));
        SaddleVector::from_parts(&top, &bottom)
    }

    /// `U~ v = [R~ a + Q~^T G^{-1} b; Q~^T G^{-1} b]`. The inverse of
    /// [`apply_u_inv`](Self::apply_u_inv) when the factors are exact.
    pub fn apply_u(&self, v: &SaddleVector) -> Result<SaddleVector> {
        let (a, b) = self.split(v.as_slice())?;
        let bottom = self.qr.q.apply_transpose(&self.g.solve(b));
        let top = add(&self.qr.r.apply(a), &bottom);
        SaddleVector::from_parts(&top, &bottom)
    }
}

/// `P = L~^{-1} M U~^{-1}` with the shift used by NspCG on it.
pub struct PreconditionedOperator<'a> {
    pub sys: &'a SaddleSystem,
    pub pre: &'a SaddlePreconditioner,
    pub gamma: f64,
}

impl<'a> PreconditionedOperator<'a> {
    fn p_flat(&self, v: &[f64]) -> Vec<f64> {
        let u = self.pre.u_inv_flat(v).expect("conforming vector");
        let mu = SaddleOperator::apply_m(self.sys, &u);
        self.pre.l_inv_flat(&mu).expect("conforming vector")
    }

    fn pt_flat(&self, v: &[f64]) -> Vec<f64> {
        let l = self.pre.l_inv_t_flat(v).expect("conforming vector");
        let ml = self.sys.apply_transpose(&l);
        self.pre.u_inv_t_flat(&ml).expect("conforming vector")
    }
}

/// The symmetric (1,1) block of `P`, `x -> top(P [x; 0])`.
struct LeadingBlock<'a, 'b>(&'b PreconditionedOperator<'a>);

impl LinearOperator for LeadingBlock<'_, '_> {
    fn nrows(&self) -> usize {
        self.0.sys.n()
    }
    fn ncols(&self) -> usize {
        self.0.sys.n()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut v = x.to_vec();
        v.resize(2 * n, 0.0);
        let mut out = self.0.p_flat(&v);
        out.truncate(n);
        out
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x)
    }
}

/// Builds `P` with `gamma = lambda_min(C^T C) / 2`, where `C^T C` is the
/// leading block of `P`.
pub fn preconditioned_operator<'a>(
    sys: &'a SaddleSystem,
    pre: &'a SaddlePreconditioner,
) -> Result<PreconditionedOperator<'a>> {
    check_dim(sys.n(), pre.n())?;
    let mut op = PreconditionedOperator { sys, pre, gamma: 0.5 };
    let n = sys.n();
    let est = spectral::estimate_lambda_min_spd(
        &LeadingBlock(&op),
        n,
        spectral::DEFAULT_TOL,
        spectral::default_maxit(n),
    )?;
    op.gamma = 0.5 * est.value;
    Ok(op)
}

impl SaddleOperator for PreconditionedOperator<'_> {
    fn half_dim(&self) -> usize {
        self.sys.n()
    }
    fn apply_m(&self, v: &[f64]) -> Vec<f64> {
        self.p_flat(v)
    }
    /// `J (P - gamma I) v`
    fn apply_m_gamma(&self, v: &[f64]) -> Vec<f64> {
        let n = self.sys.n();
        let mut out = self.p_flat(v);
        for (i, (o, x)) in out.iter_mut().zip(v).enumerate() {
            *o -= self.gamma * x;
            if i >= n {
                *o = -*o;
            }
        }
        out
    }
}

impl LinearOperator for PreconditionedOperator<'_> {
    fn nrows(&self) -> usize {
        2 * self.sys.n()
    }
    fn ncols(&self) -> usize {
        2 * self.sys.n()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.p_flat(x)
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.pt_flat(x)
    }
}

/// Reports forward/adjoint quantities of `z = U~^{-1} z^`.
struct Recovered<'a> {
    pre: &'a SaddlePreconditioner,
    inner: Scattering<'a, CsrMatrix>,
}

impl IterateObserver for Recovered<'_> {
    fn observe(&self, zhat: &[f64]) -> (f64, f64, f64) {
        let z = self.pre.u_inv_flat(zhat).expect("conforming vector");
        self.inner.observe(&z)
    }
}

/// Outcome of the preconditioned pipeline.
#[derive(Debug, Clone)]
pub struct PreconditionedSolve {
    /// NspCG on `P z^ = L~^{-1} b`; residual norms are those of this system.
    pub inner: SolveResult,
    /// `z = U~^{-1} z^`.
    pub z: SaddleVector,
    pub gamma: f64,
}

/// Solves `P z^ = L~^{-1} b` with NspCG and maps back to `z = U~^{-1} z^`.
///
/// `J (P - gamma I)` need not be definite, so the indefiniteness check is
/// disabled for this solve.
pub fn solve_preconditioned(
    sys: &SaddleSystem,
    pre: &SaddlePreconditioner,
    c: &[f64],
    d: &[f64],
    cfg: &NspcgConfig,
) -> Result<PreconditionedSolve> {
    let op = preconditioned_operator(sys, pre)?;
    let b = sys.build_rhs(c, d)?;
    let bhat = pre.apply_l_inv(&b)?;
    let observer = Recovered { pre, inner: Scattering { a: sys.a(), c, d } };
    let cfg = NspcgConfig { indefiniteness_check: false, ..*cfg };
    let inner = nspcg_solve_observed(
        &op,
        &bhat,
        &SaddleVector::zeros(sys.n()),
        &cfg,
        Some(&observer),
    )?;
    let z = pre.apply_u_inv(&inner.z)?;
    Ok(PreconditionedSolve { inner, z, gamma: op.gamma })
}

/// The two-sided transformed matrix `A^ = G^T A R~^{-1}` used to precondition
/// the baseline solvers.
///
/// `A x = c` becomes `A^ x^ = G^T c` with `x = R~^{-1} x^`, and `A^T y = d`
/// becomes `A^^T y^ = R~^{-T} d` with `y = G y^`. Both keep `d^T x`.
pub struct TransformedOperator<'a> {
    pub a: &'a CsrMatrix,
    pub pre: &'a SaddlePreconditioner,
}

impl TransformedOperator<'_> {
    pub fn forward_rhs(&self, c: &[f64]) -> Vec<f64> {
        self.pre.g.apply_transpose(c)
    }
    pub fn adjoint_rhs(&self, d: &[f64]) -> Vec<f64> {
        self.pre.qr.solve_r_transpose(d)
    }
    pub fn recover_forward(&self, xhat: &[f64]) -> Vec<f64> {
        self.pre.qr.solve_r(xhat)
    }
    pub fn recover_adjoint(&self, yhat: &[f64]) -> Vec<f64> {
        self.pre.g.apply(yhat)
    }
}

impl LinearOperator for TransformedOperator<'_> {
    fn nrows(&self) -> usize {
        self.a.nrows()
    }
    fn ncols(&self) -> usize {
        self.a.ncols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.pre.g.apply_transpose(&self.a.apply(&self.pre.qr.solve_r(x)))
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.pre.qr.solve_r_transpose(&self.a.apply_transpose(&self.pre.g.apply(y)))
    }
}

/// `|P v - v| / |v|` for one probe vector.
pub fn distance_from_identity<O: SaddleOperator + ?Sized>(op: &O, v: &[f64]) -> f64 {
    let pv = op.apply_m(v);
    let mut d = pv;
    axpy(-1.0, v, &mut d);
    norm2(&d) / norm2(v).max(f64::MIN_POSITIVE)
}

/// `v^T J (P - gamma I) v`, exposed for diagnostics.
pub fn shifted_quadratic_form<O: SaddleOperator + ?Sized>(op: &O, v: &[f64]) -> f64 {
    dot(v, &op.apply_m_gamma(v))
}
