//! The saddle-point operator `M`, its symmetrizer `M(gamma) = J (M - gamma I)`
//! with `J = diag(I, -I)`, and the right-hand side whose solution carries
//! both the forward and the adjoint solution.
//!
//! ```text
//!     M        = [ A^T W A        A^T     ]
//!                [   -A            0      ]
//!
//!     M(gamma) = [ A^T W A - g I  A^T     ]
//!                [    A           g I     ]
//! ```
//!
//! Solving `M [x; y] = [A^T W c + d; -c]` gives `A x = c` and `A^T y = d`,
//! and `d^T x = c^T y` is the scattering amplitude.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::vector::{dot, norm2, sub};
use crate::linalg::{CsrMatrix, DenseMatrix, LinearOperator};
use crate::precond::{cholesky_spd, CholeskyFactor};
use crate::spectral::{self, GammaChoice, WeightChoice, WeightMode};

/// Largest `n` for which the dense `2n x 2n` assembly is allowed.
pub const MAX_DENSE_ASSEMBLY: usize = 64;

/// The symmetric positive definite weight `W`.
#[derive(Debug, Clone)]
pub enum Weight {
    /// `W = w I`.
    Scalar(f64),
    /// A general SPD matrix together with its Cholesky factor.
    Matrix { w: CsrMatrix, factor: CholeskyFactor },
}

impl Weight {
    /// Wraps an SPD matrix, failing if its Cholesky factorization does.
    pub fn matrix(w: CsrMatrix) -> Result<Self> {
        let factor = cholesky_spd(&w)?;
        Ok(Weight::Matrix { w, factor })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Weight::Scalar(w) => v.iter().map(|x| w * x).collect(),
            Weight::Matrix { w, .. } => w.apply(v),
        }
    }

    /// The Cholesky factor `G` with `W = G G^T`.
    pub fn cholesky(&self) -> CholeskyFactor {
        match self {
            Weight::Scalar(w) => CholeskyFactor::Scalar(w.sqrt()),
            Weight::Matrix { factor, .. } => factor.clone(),
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            Weight::Scalar(w) => Some(*w),
            Weight::Matrix { .. } => None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Weight::Scalar(w) if *w > 0.0 && w.is_finite() => Ok(()),
            Weight::Scalar(w) => Err(Error::InvalidParameter(format!("weight {w} is not positive"))),
            Weight::Matrix { w, .. } => {
                check_dim(n, w.nrows())?;
                check_dim(n, w.ncols())
            }
        }
    }
}

/// `x -> A^T W A x`.
pub struct WeightedNormal<'a, A: LinearOperator + ?Sized> {
    pub a: &'a A,
    pub weight: &'a Weight,
}

impl<A: LinearOperator + ?Sized> LinearOperator for WeightedNormal<'_, A> {
    fn nrows(&self) -> usize {
        self.a.ncols()
    }
    fn ncols(&self) -> usize {
        self.a.ncols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.a.apply_transpose(&self.weight.apply(&self.a.apply(x)))
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x)
    }
}

/// A vector of length `2n` viewed as `[top; bottom]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleVector {
    data: Vec<f64>,
    n: usize,
}

impl SaddleVector {
    pub fn zeros(n: usize) -> Self {
        Self { data: vec![0.0; 2 * n], n }
    }

    pub fn from_parts(top: &[f64], bottom: &[f64]) -> Result<Self> {
        check_dim(top.len(), bottom.len())?;
        let mut data = Vec::with_capacity(2 * top.len());
        data.extend_from_slice(top);
        data.extend_from_slice(bottom);
        Ok(Self { data, n: top.len() })
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        if !data.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter("saddle vector length must be even".into()));
        }
        let n = data.len() / 2;
        Ok(Self { data, n })
    }

    pub fn half_len(&self) -> usize {
        self.n
    }

    pub fn top(&self) -> &[f64] {
        &self.data[..self.n]
    }

    pub fn bottom(&self) -> &[f64] {
        &self.data[self.n..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.data)
    }
}

/// Operator access needed by the saddle-point CG iteration. Vectors are flat
/// `[top; bottom]` slices of length `2 * half_dim()`.
pub trait SaddleOperator: Sync {
    fn half_dim(&self) -> usize;

    /// `M v`
    fn apply_m(&self, v: &[f64]) -> Vec<f64>;

    /// `M(gamma) v`
    fn apply_m_gamma(&self, v: &[f64]) -> Vec<f64>;
}

/// `A`, `W`, and `gamma` for one scattering problem.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    a: CsrMatrix,
    weight: Weight,
    gamma: f64,
}

impl SaddleSystem {
    pub fn new(a: CsrMatrix, weight: Weight, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        Self::with_any_gamma(a, weight, gamma)
    }

    /// Like [`SaddleSystem::new`] but accepts `gamma <= 0`; the result is
    /// only useful for inspecting the operators.
    pub fn with_any_gamma(a: CsrMatrix, weight: Weight, gamma: f64) -> Result<Self> {
        check_dim(a.nrows(), a.ncols())?;
        weight.validate(a.nrows())?;
        Ok(Self { a, weight, gamma })
    }

    /// Picks `W = w I` and `gamma` from spectral estimates of `A`.
    pub fn from_spectral(
        a: CsrMatrix,
        mode: WeightMode,
        safety: f64,
    ) -> Result<(Self, WeightChoice, GammaChoice)> {
        check_dim(a.nrows(), a.ncols())?;
        let wc = spectral::choose_w(&a, mode, safety)?;
        let weight = Weight::Scalar(wc.w);
        let gc = spectral::choose_gamma(&a, &weight)?;
        Ok((Self::new(a, weight, gc.gamma)?, wc, gc))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn check(&self, v: &SaddleVector) -> Result<()> {
        check_dim(self.n(), v.half_len())
    }

    fn m_flat(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let (top, bottom) = v.split_at(n);
        let av = self.a.apply(top);
        let mut out = self.a.apply_transpose(&self.weight.apply(&av));
        let atb = self.a.apply_transpose(bottom);
        out.iter_mut().zip(&atb).for_each(|(o, t)| *o += t);
        out.extend(av.iter().map(|x| -x));
        out
    }

    fn m_gamma_flat(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let g = self.gamma;
        let (top, bottom) = v.split_at(n);
        let av = self.a.apply(top);
        let mut out = self.a.apply_transpose(&self.weight.apply(&av));
        let atb = self.a.apply_transpose(bottom);
        for i in 0..n {
            out[i] += atb[i] - g * top[i];
        }
        out.extend(av.iter().zip(bottom).map(|(x, b)| x + g * b));
        out
    }

    fn m_transpose_flat(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let (top, bottom) = v.split_at(n);
        let av = self.a.apply(top);
        let mut out = self.a.apply_transpose(&self.weight.apply(&av));
        let atb = self.a.apply_transpose(bottom);
        out.iter_mut().zip(&atb).for_each(|(o, t)| *o -= t);
        out.extend(av);
        out
    }

    /// `M v`, matrix-free.
    pub fn apply_m(&self, v: &SaddleVector) -> Result<SaddleVector> {
        self.check(v)?;
        Ok(SaddleVector { data: self.m_flat(v.as_slice()), n: self.n() })
    }

    /// `M(gamma) v`, matrix-free.
    pub fn apply_m_gamma(&self, v: &SaddleVector) -> Result<SaddleVector> {
        self.check(v)?;
        Ok(SaddleVector { data: self.m_gamma_flat(v.as_slice()), n: self.n() })
    }

    /// `v^T M(gamma) u`.
    pub fn g_inner(&self, u: &SaddleVector, v: &SaddleVector) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(dot(v.as_slice(), &self.m_gamma_flat(u.as_slice())))
    }

    /// `[A^T W c + d; -c]`.
    pub fn build_rhs(&self, c: &[f64], d: &[f64]) -> Result<SaddleVector> {
        check_dim(self.n(), c.len())?;
        check_dim(self.n(), d.len())?;
        let mut top = self.a.apply_transpose(&self.weight.apply(c));
        top.iter_mut().zip(d).for_each(|(t, di)| *t += di);
        let bottom: Vec<f64> = c.iter().map(|x| -x).collect();
        SaddleVector::from_parts(&top, &bottom)
    }

    /// Amplitude `d^T x` of `z = [x; y]` with the forward and adjoint residuals.
    pub fn extract_amplitude(
        &self,
        z: &SaddleVector,
        c: &[f64],
        d: &[f64],
    ) -> Result<AmplitudeResult> {
        self.check(z)?;
        check_dim(self.n(), c.len())?;
        check_dim(self.n(), d.len())?;
        Ok(amplitude_of(&self.a, z.top(), z.bottom(), c, d))
    }

    fn dense_guard(&self) -> Result<()> {
        if self.n() > MAX_DENSE_ASSEMBLY {
            return Err(Error::InvalidParameter(format!(
                "dense assembly limited to n <= {MAX_DENSE_ASSEMBLY}, got {}",
                self.n()
            )));
        }
        Ok(())
    }

    fn assemble(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> DenseMatrix {
        let m = 2 * self.n();
        let mut out = DenseMatrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            let col = f(&e);
            e[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Dense `M`, for oracles on small problems.
    pub fn assemble_m(&self) -> Result<DenseMatrix> {
        self.dense_guard()?;
        Ok(self.assemble(|e| self.m_flat(e)))
    }

    /// Dense `M(gamma)`, for oracles on small problems.
    pub fn assemble_m_gamma(&self) -> Result<DenseMatrix> {
        self.dense_guard()?;
        Ok(self.assemble(|e| self.m_gamma_flat(e)))
    }
}

impl SaddleOperator for SaddleSystem {
    fn half_dim(&self) -> usize {
        self.n()
    }
    fn apply_m(&self, v: &[f64]) -> Vec<f64> {
        self.m_flat(v)
    }
    fn apply_m_gamma(&self, v: &[f64]) -> Vec<f64> {
        self.m_gamma_flat(v)
    }
}

/// `M` as a plain `2n x 2n` operator.
impl LinearOperator for SaddleSystem {
    fn nrows(&self) -> usize {
        2 * self.n()
    }
    fn ncols(&self) -> usize {
        2 * self.n()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.m_flat(x)
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.m_transpose_flat(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeResult {
    pub amplitude: f64,
    /// `||c - A x||`
    pub forward_residual: f64,
    /// `||d - A^T y||`
    pub adjoint_residual: f64,
    /// `|d^T x - c^T y|`
    pub consistency_gap: f64,
}

pub(crate) fn amplitude_of<A: LinearOperator + ?Sized>(
    a: &A,
    x: &[f64],
    y: &[f64],
    c: &[f64],
    d: &[f64],
) -> AmplitudeResult {
    let amplitude = dot(d, x);
    AmplitudeResult {
        amplitude,
        forward_residual: norm2(&sub(c, &a.apply(x))),
        adjoint_residual: norm2(&sub(d, &a.apply_transpose(y))),
        consistency_gap: (amplitude - dot(c, y)).abs(),
    }
}
