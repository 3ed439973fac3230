//! Extreme singular value estimates and the choice of the weight `w` and the
//! shift `gamma`.
//!
//! With `W = w I` the saddle matrix has eigenvalues solving
//! `l^2 - s^2 w l + s^2 = 0` for every singular value `s` of `A`. They are
//! real and positive iff `w > 2 / s_min` ("weak" mode); the stronger
//! `w > 2 kappa(A) / s_min` ("strict" mode) additionally gives
//! `2 s_max < lambda_min(A^T W A)`, the sufficient condition for `M(gamma)`
//! to be positive definite with `gamma = lambda_min(A^T W A) / 2`.
//!
//! `sigma_max` comes from power iteration on `A^T A`; `sigma_min` and
//! `lambda_min` from Lanczos with full reorthogonalization. Both start from
//! the normalized all-ones vector (falling back to `e_1`) so results are
//! reproducible. Ritz values approach `lambda_min` from above, so the weight
//! carries a safety factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm2, normalize, orthogonalize, unit, unit_ones};
use crate::linalg::{tridiagonal_solve, LinearOperator, NormalOperator, Tridiagonal};
use crate::saddle::{Weight, WeightedNormal};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_SAFETY: f64 = 1.1;

/// Default iteration cap: five times the dimension.
pub fn default_maxit(n: usize) -> usize {
    5 * n.max(1)
}

/// A scalar estimate with its iteration bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub kappa2: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    Strict,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightChoice {
    pub w: f64,
    pub mode: WeightMode,
    /// The theoretical lower bound that `w` exceeds by `safety`.
    pub bound: f64,
    pub safety: f64,
    pub spectrum: SpectralEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaChoice {
    pub gamma: f64,
    pub lambda_min_est: f64,
}

fn start_vector<A: LinearOperator + ?Sized>(a: &A, n: usize) -> Vec<f64> {
    let ones = unit_ones(n);
    if norm2(&a.apply(&ones)) > 0.0 {
        ones
    } else {
        unit(n, 0)
    }
}

/// Power iteration on `v -> A^T A v`; returns `sqrt` of the dominant
/// Rayleigh quotient.
pub fn estimate_sigma_max<A: LinearOperator + ?Sized>(
    a: &A,
    tol: f64,
    maxit: usize,
) -> Result<Estimate> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let n = a.ncols();
    let mut v = start_vector(a, n);
    let mut lambda = 0.0;
    for it in 1..=maxit.max(1) {
        let mut w = a.apply_transpose(&a.apply(&v));
        let next = dot(&v, &w);
        if normalize(&mut w) == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        v = w;
        if it > 1 && (next - lambda).abs() <= tol * next.abs() {
            return Ok(Estimate { value: next.max(0.0).sqrt(), iterations: it, converged: true });
        }
        lambda = next;
    }
    Ok(Estimate { value: lambda.max(0.0).sqrt(), iterations: maxit, converged: false })
}

/// Smallest singular value from the smallest Ritz value of Lanczos on
/// `A^T A`. Approaches the true value from above.
pub fn estimate_sigma_min<A: LinearOperator + ?Sized>(
    a: &A,
    tol: f64,
    maxit: usize,
) -> Result<Estimate> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension { expected: a.nrows(), found: a.ncols() });
    }
    let normal = NormalOperator(a);
    let start = start_vector(a, a.ncols());
    let ritz = lanczos_smallest(&normal, start, tol, maxit, false)?;
    Ok(Estimate { value: ritz.value.max(0.0).sqrt(), ..ritz })
}

/// Smallest eigenvalue of a symmetric positive definite operator.
///
/// A nonpositive Rayleigh quotient `v^T (op v)` on any Lanczos vector is
/// reported as [`Error::NotSpd`].
pub fn estimate_lambda_min_spd<O: LinearOperator + ?Sized>(
    op: &O,
    dim: usize,
    tol: f64,
    maxit: usize,
) -> Result<Estimate> {
    if op.nrows() != dim || op.ncols() != dim {
        return Err(Error::Dimension { expected: dim, found: op.nrows() });
    }
    let start = start_vector(op, dim);
    lanczos_smallest(op, start, tol, maxit, true)
}

fn lanczos_smallest<O: LinearOperator + ?Sized>(
    op: &O,
    mut q: Vec<f64>,
    tol: f64,
    maxit: usize,
    check_spd: bool,
) -> Result<Estimate> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let n = q.len();
    normalize(&mut q);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut t = Tridiagonal::default();
    let mut beta_prev = 0.0;
    let mut theta_prev = f64::INFINITY;
    let mut scale = 0.0_f64;

    for k in 1..=maxit.clamp(1, n) {
        let mut w = op.apply(&q);
        let alpha = dot(&q, &w);
        if check_spd && alpha <= 0.0 {
            return Err(Error::NotSpd(format!("Rayleigh quotient {alpha:e} at step {k}")));
        }
        scale = scale.max(alpha.abs());
        axpy(-alpha, &q, &mut w);
        if let Some(prev) = basis.last() {
            axpy(-beta_prev, prev, &mut w);
        }
        basis.push(q);
        orthogonalize(&mut w, &basis);
        let beta = norm2(&w);
        t.push_column(beta_prev, alpha, beta);

        let theta = smallest_eigenvalue(&t);
        let exhausted = beta <= 1e-14 * scale.max(beta_prev) || k == n;
        if exhausted {
            return Ok(Estimate { value: theta, iterations: k, converged: true });
        }
        let bottom = ritz_vector_bottom(&t, theta);
        let residual = beta * bottom.abs();
        let settled = (theta_prev - theta).abs() <= tol * theta.abs();
        if settled && residual <= tol * scale {
            return Ok(Estimate { value: theta, iterations: k, converged: true });
        }
        theta_prev = theta;
        beta_prev = beta;
        q = w;
        normalize(&mut q);
    }
    Ok(Estimate { value: theta_prev, iterations: maxit.clamp(1, n), converged: false })
}

/// Number of eigenvalues of the square symmetric tridiagonal `t` below `x`.
fn sturm_count(t: &Tridiagonal, x: f64) -> usize {
    let k = t.ncols();
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..k {
        let off = if i > 0 { t.sup[i - 1] } else { 0.0 };
        d = t.diag[i] - x - if i > 0 { off * off / d } else { 0.0 };
        if d == 0.0 {
            d = -f64::EPSILON * (t.diag[i].abs() + off.abs() + f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of the leading square block of a symmetric
/// tridiagonal by Sturm bisection.
pub(crate) fn smallest_eigenvalue(t: &Tridiagonal) -> f64 {
    extreme_eigenvalue(t, 1)
}

#[cfg(test)]
pub(crate) fn largest_eigenvalue(t: &Tridiagonal) -> f64 {
    extreme_eigenvalue(t, t.ncols())
}

/// The `index`-th smallest eigenvalue (1-based).
fn extreme_eigenvalue(t: &Tridiagonal, index: usize) -> f64 {
    let k = t.ncols();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..k {
        let left = if i > 0 { t.sup[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < k { t.sup[i].abs() } else { 0.0 };
        lo = lo.min(t.diag[i] - left - right);
        hi = hi.max(t.diag[i] + left + right);
    }
    let pad = 1e-12 * (hi.abs().max(lo.abs()) + f64::MIN_POSITIVE);
    lo -= pad;
    hi += pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(t, mid) >= index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Last component of the unit eigenvector of `t` for eigenvalue `theta`, by
/// two steps of inverse iteration.
fn ritz_vector_bottom(t: &Tridiagonal, theta: f64) -> f64 {
    let k = t.ncols();
    let mut shifted = t.clone();
    let nudge = 1e-10 * (theta.abs() + 1e-300);
    shifted.diag.iter_mut().for_each(|d| *d -= theta - nudge);
    let mut s = vec![1.0; k];
    for _ in 0..2 {
        match tridiagonal_solve(&shifted, &s) {
            Ok(mut next) => {
                normalize(&mut next);
                s = next;
            }
            Err(_) => break,
        }
    }
    normalize(&mut s);
    s[k - 1]
}

/// `sigma_max`, `sigma_min` and `kappa2` of a square operator.
pub fn estimate_spectrum<A: LinearOperator + ?Sized>(
    a: &A,
    tol: f64,
    maxit: usize,
) -> Result<SpectralEstimate> {
    let smax = estimate_sigma_max(a, tol, maxit)?;
    let smin = estimate_sigma_min(a, tol, maxit)?;
    if smin.value <= 0.0 {
        return Err(Error::Singular(format!("sigma_min estimate {:e}", smin.value)));
    }
    let sigma_max = smax.value.max(smin.value);
    Ok(SpectralEstimate {
        sigma_max,
        sigma_min: smin.value,
        kappa2: sigma_max / smin.value,
        iterations_used: smax.iterations + smin.iterations,
        converged: smax.converged && smin.converged,
    })
}

/// Weight `w` for `W = w I` with the default tolerance and iteration cap.
pub fn choose_w<A: LinearOperator + ?Sized>(
    a: &A,
    mode: WeightMode,
    safety: f64,
) -> Result<WeightChoice> {
    let spectrum = estimate_spectrum(a, DEFAULT_TOL, default_maxit(a.ncols()))?;
    weight_from_spectrum(spectrum, mode, safety)
}

/// `w = safety * bound`, where the bound is `2 kappa / sigma_min` (strict)
/// or `2 / sigma_min` (weak).
pub fn weight_from_spectrum(
    spectrum: SpectralEstimate,
    mode: WeightMode,
    safety: f64,
) -> Result<WeightChoice> {
    if safety.is_nan() || safety <= 1.0 {
        return Err(Error::InvalidParameter(format!("safety must exceed 1, got {safety}")));
    }
    let bound = match mode {
        WeightMode::Strict => 2.0 * spectrum.kappa2 / spectrum.sigma_min,
        WeightMode::Weak => 2.0 / spectrum.sigma_min,
    };
    Ok(WeightChoice { w: safety * bound, mode, bound, safety, spectrum })
}

/// `gamma = lambda_min(A^T W A) / 2`.
pub fn choose_gamma<A: LinearOperator + ?Sized>(a: &A, weight: &Weight) -> Result<GammaChoice> {
    if let Weight::Scalar(w) = weight {
        if *w <= 0.0 {
            return Err(Error::InvalidParameter(format!("weight must be positive, got {w}")));
        }
    }
    let n = a.ncols();
    let op = WeightedNormal { a, weight };
    let est = estimate_lambda_min_spd(&op, n, DEFAULT_TOL, default_maxit(n))?;
    Ok(GammaChoice { gamma: 0.5 * est.value, lambda_min_est: est.value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CsrMatrix, Identity};

    fn diag(d: &[f64]) -> CsrMatrix {
        CsrMatrix::from_diagonal(d)
    }

    #[test]
    fn identity_estimates() {
        let a = CsrMatrix::identity(4);
        assert!((estimate_sigma_max(&a, 1e-10, 50).unwrap().value - 1.0).abs() < 1e-8);
        assert!((estimate_sigma_min(&a, 1e-10, 50).unwrap().value - 1.0).abs() < 1e-8);
        let l = estimate_lambda_min_spd(&Identity(10), 10, 1e-8, 50).unwrap();
        assert!((l.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn diagonal_estimates() {
        let a = diag(&[1.0, 2.0, 5.0]);
        assert!((estimate_sigma_max(&a, 1e-12, 500).unwrap().value - 5.0).abs() < 1e-6);
        assert!((estimate_sigma_min(&a, 1e-10, 50).unwrap().value - 1.0).abs() < 1e-6);
        let ata = NormalOperator(&a);
        assert!((estimate_lambda_min_spd(&ata, 3, 1e-10, 50).unwrap().value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn weighted_normal_minimum() {
        let a = diag(&[2.0, 3.0]);
        let w = Weight::Scalar(2.0);
        let op = WeightedNormal { a: &a, weight: &w };
        assert!((estimate_lambda_min_spd(&op, 2, 1e-10, 20).unwrap().value - 8.0).abs() < 1e-6);
        let g = choose_gamma(&a, &w).unwrap();
        assert!((g.gamma - 4.0).abs() < 1e-6);
    }

    #[test]
    fn circulant_shift_is_orthogonal() {
        let n = 12;
        let j = CsrMatrix::from_triplets(n, n, (0..n).map(|i| (i, (i + 1) % n, 1.0))).unwrap();
        assert!((estimate_sigma_min(&j, 1e-10, 60).unwrap().value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn weight_modes() {
        let wc = choose_w(&CsrMatrix::identity(5), WeightMode::Weak, 1.1).unwrap();
        assert!((wc.bound - 2.0).abs() < 1e-8 && (wc.w - 2.2).abs() < 1e-8);

        let a = diag(&[1.0, 2.0]);
        let strict = choose_w(&a, WeightMode::Strict, 1.1).unwrap();
        assert!((strict.bound - 4.0).abs() < 1e-6 && (strict.w - 4.4).abs() < 1e-6);
        let weak = choose_w(&a, WeightMode::Weak, 1.5).unwrap();
        assert!((weak.bound - 2.0).abs() < 1e-6 && (weak.w - 3.0).abs() < 1e-6);

        assert!(choose_w(&a, WeightMode::Weak, 1.0).is_err());
    }

    #[test]
    fn gamma_examples() {
        let g = choose_gamma(&CsrMatrix::identity(3), &Weight::Scalar(3.0)).unwrap();
        assert!((g.gamma - 1.5).abs() < 1e-8);
        let g = choose_gamma(&diag(&[1.0, 2.0]), &Weight::Scalar(4.4)).unwrap();
        assert!((g.lambda_min_est - 4.4).abs() < 1e-6 && (g.gamma - 2.2).abs() < 1e-6);
    }

    #[test]
    fn zero_matrix_rejected() {
        let z = CsrMatrix::from_triplets(3, 3, []).unwrap();
        assert!(matches!(estimate_sigma_max(&z, 1e-6, 10), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn indefinite_operator_rejected() {
        let a = diag(&[1.0, -4.0, 2.0]);
        assert!(matches!(estimate_lambda_min_spd(&a, 3, 1e-8, 10), Err(Error::NotSpd(_))));
    }

    #[test]
    fn tridiagonal_extremes() {
        let mut t = Tridiagonal::default();
        for _ in 0..5 {
            t.push_column(-1.0, 2.0, -1.0);
        }
        // Eigenvalues of the 1D Laplacian: 2 - 2 cos(k pi / 6).
        let want_min = 2.0 - 2.0 * (std::f64::consts::PI / 6.0).cos();
        let want_max = 2.0 - 2.0 * (5.0 * std::f64::consts::PI / 6.0).cos();
        assert!((smallest_eigenvalue(&t) - want_min).abs() < 1e-12);
        assert!((largest_eigenvalue(&t) - want_max).abs() < 1e-12);
    }
}
