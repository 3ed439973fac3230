//! Conjugate gradients for the nonsymmetric saddle-point matrix `M`.
//!
//! When `M(gamma) = J (M - gamma I)` is positive definite, `M` is self-adjoint
//! and positive definite in the `M(gamma)` inner product, so the ordinary CG
//! recurrences apply with every inner product taken in `M(gamma)`:
//!
//! ```text
//!     alpha_i   = <r_i, r_i> / <M p_i, p_i>
//!     z_{i+1}   = z_i + alpha_i p_i
//!     r_{i+1}   = r_i - alpha_i M p_i
//!     beta_{i+1} = <r_{i+1}, r_{i+1}> / <r_i, r_i>
//!     p_{i+1}   = r_{i+1} + beta_{i+1} p_i
//! ```
//!
//! This minimizes the error in the `G = M(gamma) M` norm over the Krylov
//! space, and the residuals are mutually `M(gamma)`-orthogonal.

use crate::error::{check_dim, Error, Result};
use crate::history::{ConvergenceHistory, IterationRecord, SolveStatus};
use crate::linalg::vector::{axpy, dot, norm2};
use crate::linalg::LinearOperator;
use crate::saddle::{amplitude_of, SaddleOperator, SaddleVector};

/// Denominator for the `beta` coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaRule {
    /// `<r_i, r_i>_{M(gamma)}`: the CG recurrence, which keeps the residuals
    /// `M(gamma)`-orthogonal.
    #[default]
    Standard,
    /// `<M r_i, r_i>_{M(gamma)}`, as printed in the original presentation of
    /// the coefficients. Kept for comparison only.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NspcgConfig {
    /// Target for `||b - M z_i|| / ||b||`.
    pub tol: f64,
    pub maxit: usize,
    /// Keep every residual vector in the history.
    pub record_residual_vectors: bool,
    /// Keep every search direction in the result.
    pub record_search_directions: bool,
    /// Stop with [`SolveStatus::Indefinite`] when an `M(gamma)` product that
    /// should be positive is not.
    pub indefiniteness_check: bool,
    pub beta_rule: BetaRule,
    /// Make each new direction `M(gamma) M`-conjugate to every previous one
    /// and take `alpha_i = <r_i, p_i> / <M p_i, p_i>`. Same iterates in exact
    /// arithmetic; in floating point it keeps the residuals mutually
    /// orthogonal instead of losing orthogonality once a Ritz value converges.
    /// Costs one stored direction per iteration.
    pub reconjugate: bool,
}

impl Default for NspcgConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            maxit: 1000,
            record_residual_vectors: false,
            record_search_directions: false,
            indefiniteness_check: true,
            beta_rule: BetaRule::Standard,
            reconjugate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub z: SaddleVector,
    pub history: ConvergenceHistory,
    pub status: SolveStatus,
    pub iterations: usize,
    pub search_directions: Option<Vec<Vec<f64>>>,
}

/// Maps an iterate to `(forward residual, adjoint residual, amplitude)` for
/// the history.
pub trait IterateObserver: Sync {
    fn observe(&self, z: &[f64]) -> (f64, f64, f64);
}

/// Observer for the plain problem `A x = c`, `A^T y = d` with `z = [x; y]`.
pub struct Scattering<'a, A: LinearOperator + ?Sized> {
    pub a: &'a A,
    pub c: &'a [f64],
    pub d: &'a [f64],
}

impl<A: LinearOperator + ?Sized> IterateObserver for Scattering<'_, A> {
    fn observe(&self, z: &[f64]) -> (f64, f64, f64) {
        let (x, y) = z.split_at(z.len() / 2);
        let r = amplitude_of(self.a, x, y, self.c, self.d);
        (r.forward_residual, r.adjoint_residual, r.amplitude)
    }
}

/// Runs the iteration without forward/adjoint bookkeeping (those history
/// columns are NaN).
pub fn nspcg_solve<O: SaddleOperator + ?Sized>(
    op: &O,
    b: &SaddleVector,
    z0: &SaddleVector,
    cfg: &NspcgConfig,
) -> Result<SolveResult> {
    nspcg_solve_observed(op, b, z0, cfg, None)
}

pub fn nspcg_solve_observed<O: SaddleOperator + ?Sized>(
    op: &O,
    b: &SaddleVector,
    z0: &SaddleVector,
    cfg: &NspcgConfig,
    observer: Option<&dyn IterateObserver>,
) -> Result<SolveResult> {
    let n = op.half_dim();
    check_dim(n, b.half_len())?;
    check_dim(n, z0.half_len())?;
    if !(cfg.tol > 0.0) || cfg.maxit == 0 {
        return Err(Error::InvalidParameter("tol must be positive and maxit at least 1".into()));
    }

    let mut z = z0.as_slice().to_vec();
    let mut r: Vec<f64> = {
        let mz = op.apply_m(&z);
        b.as_slice().iter().zip(&mz).map(|(bi, mi)| bi - mi).collect()
    };
    let r0 = norm2(&r);
    let bnorm = b.norm();
    let reference = if bnorm > 0.0 { bnorm } else { r0 };

    let mut history = ConvergenceHistory {
        records: Vec::new(),
        residual_vectors: cfg.record_residual_vectors.then(Vec::new),
    };
    let mut directions = cfg.record_search_directions.then(Vec::new);
    let record = |history: &mut ConvergenceHistory, iter: usize, z: &[f64], r: &[f64]| {
        let (f, a, amp) = observer.map_or((f64::NAN, f64::NAN, f64::NAN), |o| o.observe(z));
        history.records.push(IterationRecord {
            iter,
            saddle_resnorm: norm2(r),
            forward_resnorm: f,
            adjoint_resnorm: a,
            amplitude: amp,
        });
        if let Some(v) = history.residual_vectors.as_mut() {
            v.push(r.to_vec());
        }
    };
    record(&mut history, 0, &z, &r);

    let finish = |z: Vec<f64>, history, status, iterations, directions| -> Result<SolveResult> {
        Ok(SolveResult {
            z: SaddleVector::from_vec(z)?,
            history,
            status,
            iterations,
            search_directions: directions,
        })
    };

    if r0 == 0.0 || r0 <= cfg.tol * reference {
        return finish(z, history, SolveStatus::Converged, 0, directions);
    }

    let mut gr = op.apply_m_gamma(&r);
    let mut rr = dot(&r, &gr);
    let mut p = r.clone();
    // (p_j, M(gamma) M p_j, <M p_j, p_j>) for reconjugation.
    let mut conj: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();

    for i in 0..cfg.maxit {
        if cfg.indefiniteness_check && rr <= 0.0 {
            return finish(z, history, SolveStatus::Indefinite, i, directions);
        }
        if rr.abs() < 1e-300 {
            return finish(z, history, SolveStatus::Breakdown, i, directions);
        }
        let mp = op.apply_m(&p);
        let gmp = op.apply_m_gamma(&mp);
        let den = dot(&p, &gmp);
        if cfg.indefiniteness_check && den <= 0.0 {
            return finish(z, history, SolveStatus::Indefinite, i, directions);
        }
        if den.abs() < 1e-300 {
            return finish(z, history, SolveStatus::Breakdown, i, directions);
        }
        if let Some(d) = directions.as_mut() {
            d.push(p.clone());
        }
        let alpha = if cfg.reconjugate { dot(&gr, &p) / den } else { rr / den };
        axpy(alpha, &p, &mut z);
        let printed_den = match cfg.beta_rule {
            BetaRule::Standard => rr,
            BetaRule::Printed => dot(&gr, &op.apply_m(&r)),
        };
        axpy(-alpha, &mp, &mut r);
        gr = op.apply_m_gamma(&r);
        let rr_next = dot(&r, &gr);
        record(&mut history, i + 1, &z, &r);

        if norm2(&r) <= cfg.tol * reference {
            return finish(z, history, SolveStatus::Converged, i + 1, directions);
        }
        if printed_den.abs() < 1e-300 {
            return finish(z, history, SolveStatus::Breakdown, i + 1, directions);
        }
        if cfg.reconjugate {
            conj.push((std::mem::take(&mut p), gmp, den));
            p = r.clone();
            for (pj, qj, dj) in &conj {
                let c = dot(qj, &p) / dj;
                axpy(-c, pj, &mut p);
            }
        } else {
            let beta = rr_next / printed_den;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
        }
        rr = rr_next;
    }
    finish(z, history, SolveStatus::MaxIterations, cfg.maxit, directions)
}

/// Largest normalized off-diagonal `M(gamma)` inner product between recorded
/// residuals: `max_{i != j} |<r_i, r_j>| / (|r_i| |r_j|)` in the induced norm.
pub fn residual_orthogonality_report<O: SaddleOperator + ?Sized>(
    op: &O,
    history: &ConvergenceHistory,
) -> Result<f64> {
    let residuals = history
        .residual_vectors
        .as_ref()
        .ok_or(Error::MissingData("residual vectors were not recorded"))?;
    let images: Vec<Vec<f64>> = residuals.iter().map(|r| op.apply_m_gamma(r)).collect();
    let norms: Vec<f64> =
        residuals.iter().zip(&images).map(|(r, g)| dot(r, g).abs().sqrt()).collect();
    let mut worst = 0.0_f64;
    for i in 0..residuals.len() {
        for j in 0..i {
            let den = norms[i] * norms[j];
            if den > 0.0 {
                worst = worst.max(dot(&residuals[i], &images[j]).abs() / den);
            }
        }
    }
    Ok(worst)
}
