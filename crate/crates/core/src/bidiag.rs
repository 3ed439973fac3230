//! Bidiagonalization baselines.
//!
//! LSQR uses Golub-Kahan bidiagonalization,
//!
//! ```text
//!     A V_k = U_{k+1} B_k,    A^T U_{k+1} = V_k B_k^T + alpha_{k+1} v_{k+1} e_{k+1}^T,
//! ```
//!
//! where `v_1` is forced by `alpha_1 v_1 = A^T u_1`. The adjoint system is
//! handled by a second, independent process on `A^T`.
//!
//! GLSQR starts from independent `u_1 = r_0/|r_0|` and `v_1 = s_0/|s_0|` and
//! runs the coupled three-term recurrences
//!
//! ```text
//!     beta_{k+1} u_{k+1} = A v_k   - alpha_k u_k - gamma_{k-1} u_{k-1}
//!     eta_{k+1}  v_{k+1} = A^T u_k - delta_k v_k - theta_{k-1} v_{k-1}
//! ```
//!
//! giving `A V_k = U_{k+1} T_{k+1,k}` and `A^T U_k = V_{k+1} S_{k+1,k}` with
//! tridiagonal `T`, `S`. Iterates are the Galerkin solutions
//! `x_k = x_0 + |r_0| V_k T_kk^{-1} e_1` and `y_k = y_0 + |s_0| U_k S_kk^{-1} e_1`.
//!
//! Both bases are kept orthonormal with two-pass Gram-Schmidt.

use crate::error::{check_dim, Error, Result};
use crate::history::{
    BaselineConfig, ConvergenceHistory, PairSolution, SideTracker, SolveStatus,
};
use crate::linalg::vector::{axpy, dot, norm2, normalize, orthogonalize, sub};
use crate::linalg::{
    tridiagonal_lstsq, tridiagonal_solve, LinearOperator, Transposed, Tridiagonal,
};

/// Relative size below which a recurrence coefficient counts as zero.
const BREAKDOWN_TOL: f64 = 1e-14;

/// Outcome of one bidiagonalization step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    Extended,
    /// The Krylov space is exhausted; the current iterate is exact in it.
    LuckyBreakdown,
}

#[derive(Debug, Clone)]
pub struct GolubKahanState {
    /// `u_1 .. u_{k+1}` (only `u_1 .. u_k` after a breakdown in `beta`).
    pub u: Vec<Vec<f64>>,
    /// `v_1 .. v_k`
    pub v: Vec<Vec<f64>>,
    /// `alpha_1 .. alpha_k`
    pub alpha: Vec<f64>,
    /// `beta_1 .. beta_{k+1}`; `beta_1 = |start|`.
    pub beta: Vec<f64>,
    scale: f64,
    exhausted: bool,
}

impl GolubKahanState {
    pub fn new(start: &[f64]) -> Result<Self> {
        let mut u1 = start.to_vec();
        let beta1 = normalize(&mut u1);
        if beta1 == 0.0 {
            return Err(Error::InvalidParameter("start vector is zero".into()));
        }
        Ok(Self {
            u: vec![u1],
            v: Vec::new(),
            alpha: Vec::new(),
            beta: vec![beta1],
            scale: 0.0,
            exhausted: false,
        })
    }

    pub fn k(&self) -> usize {
        self.v.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    /// `B_k` as a `(k+1) x k` lower bidiagonal.
    pub fn bidiagonal(&self) -> Tridiagonal {
        let mut b = Tridiagonal::default();
        for j in 0..self.k() {
            b.push_column(0.0, self.alpha[j], self.beta.get(j + 1).copied().unwrap_or(0.0));
        }
        b
    }
}

/// Appends `v_{k+1}` and `u_{k+2}` to the factorization.
pub fn golub_kahan_extend<A: LinearOperator + ?Sized>(
    a: &A,
    state: &mut GolubKahanState,
) -> Result<Extension> {
    if state.exhausted {
        return Ok(Extension::LuckyBreakdown);
    }
    let k = state.k();
    let u_last = &state.u[k];
    check_dim(a.nrows(), u_last.len())?;

    let mut v = a.apply_transpose(u_last);
    state.scale = state.scale.max(norm2(&v));
    if let Some(prev) = state.v.last() {
        axpy(-state.beta[k], prev, &mut v);
    }
    orthogonalize(&mut v, &state.v);
    let alpha = norm2(&v);
    if alpha <= BREAKDOWN_TOL * state.scale || alpha == 0.0 {
        state.exhausted = true;
        return Ok(Extension::LuckyBreakdown);
    }
    v.iter_mut().for_each(|x| *x /= alpha);

    let mut u = a.apply(&v);
    state.scale = state.scale.max(norm2(&u));
    axpy(-alpha, u_last, &mut u);
    orthogonalize(&mut u, &state.u);
    let beta = norm2(&u);
    state.v.push(v);
    state.alpha.push(alpha);
    if beta <= BREAKDOWN_TOL * state.scale || beta == 0.0 {
        state.beta.push(0.0);
        state.exhausted = true;
        return Ok(Extension::LuckyBreakdown);
    }
    u.iter_mut().for_each(|x| *x /= beta);
    state.u.push(u);
    state.beta.push(beta);
    Ok(Extension::Extended)
}

/// `x0 + sum_j coeffs[j] * basis[j]`
fn expand(x0: &[f64], basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut x = x0.to_vec();
    for (c, q) in coeffs.iter().zip(basis) {
        axpy(*c, q, &mut x);
    }
    x
}

/// One LSQR recursion on `op x = rhs`.
struct LsqrSide<'a, O: LinearOperator + ?Sized> {
    op: &'a O,
    rhs: &'a [f64],
    x0: Vec<f64>,
    gk: Option<GolubKahanState>,
    tracker: SideTracker,
}

impl<'a, O: LinearOperator + ?Sized> LsqrSide<'a, O> {
    fn new(op: &'a O, rhs: &'a [f64], x0: &[f64], tol: f64) -> Result<Self> {
        check_dim(op.nrows(), rhs.len())?;
        check_dim(op.ncols(), x0.len())?;
        let r0 = sub(rhs, &op.apply(x0));
        let r0n = norm2(&r0);
        let mut tracker = SideTracker::new(x0.to_vec(), r0n, r0n);
        let gk = if r0n > 0.0 { Some(GolubKahanState::new(&r0)?) } else { None };
        if r0n == 0.0 || tracker.reached(tol) {
            tracker.status = Some(SolveStatus::Converged);
        }
        Ok(Self { op, rhs, x0: x0.to_vec(), gk, tracker })
    }

    fn step(&mut self, tol: f64) -> Result<()> {
        let Some(gk) = self.gk.as_mut() else { return Ok(()) };
        let ext = golub_kahan_extend(self.op, gk)?;
        self.tracker.iterations += 1;
        let k = gk.k();
        if k > 0 {
            let mut rhs = vec![0.0; k + 1];
            rhs[0] = gk.beta[0];
            let (z, _) = tridiagonal_lstsq(&gk.bidiagonal(), &rhs)?;
            self.tracker.solution = expand(&self.x0, &gk.v, &z);
        }
        let res = norm2(&sub(self.rhs, &self.op.apply(&self.tracker.solution)));
        self.tracker.residuals.push(res);
        if self.tracker.reached(tol) {
            self.tracker.status = Some(SolveStatus::Converged);
        } else if ext == Extension::LuckyBreakdown {
            // Exact in exact arithmetic; rounding left the residual above tol.
            self.tracker.status = Some(SolveStatus::Breakdown);
        }
        Ok(())
    }
}

/// LSQR on the forward system `A x = b` and, independently, on the adjoint
/// system `A^T y = g`. Both advance one step per iteration.
pub fn lsqr_solve<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    g: &[f64],
    x0: &[f64],
    y0: &[f64],
    cfg: &BaselineConfig,
) -> Result<PairSolution> {
    let at = Transposed(a);
    let mut fwd = LsqrSide::new(a, b, x0, cfg.tol)?;
    let mut adj = LsqrSide::new(&at, g, y0, cfg.tol)?;
    let mut history = ConvergenceHistory::default();
    history.push_pair(
        0,
        fwd.tracker.current(),
        adj.tracker.current(),
        dot(g, &fwd.tracker.solution),
    );
    let mut it = 0;
    while it < cfg.maxit && (fwd.tracker.active() || adj.tracker.active()) {
        it += 1;
        if fwd.tracker.active() {
            fwd.step(cfg.tol)?;
        }
        if adj.tracker.active() {
            adj.step(cfg.tol)?;
        }
        history.push_pair(
            it,
            fwd.tracker.current(),
            adj.tracker.current(),
            dot(g, &fwd.tracker.solution),
        );
    }
    Ok(PairSolution {
        forward: fwd.tracker.finish(SolveStatus::MaxIterations),
        adjoint: adj.tracker.finish(SolveStatus::MaxIterations),
        history,
    })
}

/// Coupled two-sided bidiagonalization state.
#[derive(Debug, Clone)]
pub struct GlsqrState {
    /// `u_1 .. u_{k+1}`
    pub u: Vec<Vec<f64>>,
    /// `v_1 .. v_{k+1}`
    pub v: Vec<Vec<f64>>,
    /// `T_{k+1,k}`: diagonal `alpha`, subdiagonal `beta`, superdiagonal `gamma`.
    pub t: Tridiagonal,
    /// `S_{k+1,k}`: diagonal `delta`, subdiagonal `eta`, superdiagonal `theta`.
    pub s: Tridiagonal,
    scale: f64,
}

/// What happened during one GLSQR step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GlsqrStep {
    /// `c_k` vanished: `A V_k` lies in `span(U_k)`.
    pub forward_breakdown: bool,
    /// `d_k` vanished: `A^T U_k` lies in `span(V_k)`.
    pub adjoint_breakdown: bool,
    /// No further basis vector exists (the bases span the whole space).
    pub exhausted: bool,
}

impl GlsqrState {
    /// Starts from the given vectors, normalized.
    pub fn new(u1: &[f64], v1: &[f64]) -> Result<Self> {
        check_dim(u1.len(), v1.len())?;
        let (mut u, mut v) = (u1.to_vec(), v1.to_vec());
        if normalize(&mut u) == 0.0 || normalize(&mut v) == 0.0 {
            return Err(Error::InvalidParameter("GLSQR start vectors must be nonzero".into()));
        }
        Ok(Self { u: vec![u], v: vec![v], t: Tridiagonal::default(), s: Tridiagonal::default(), scale: 0.0 })
    }

    pub fn k(&self) -> usize {
        self.t.ncols()
    }
}

/// A unit vector orthogonal to `basis`, taken from the coordinate axis with
/// the largest remaining component.
fn restart_vector(basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = basis.first()?.len();
    if basis.len() >= n {
        return None;
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        orthogonalize(&mut e, basis);
        let nrm = norm2(&e);
        if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
            best = Some((nrm, e));
        }
    }
    let (nrm, mut e) = best?;
    if nrm < 1e-8 {
        return None;
    }
    normalize(&mut e);
    Some(e)
}

/// Computes column `k` of `T` and `S` and appends `u_{k+1}`, `v_{k+1}`.
///
/// When `c_k` (or `d_k`) vanishes the corresponding subdiagonal entry is set
/// to zero and the next basis vector is a fresh direction orthogonal to the
/// existing basis, so the other side can keep going.
pub fn glsqr_extend<A: LinearOperator + ?Sized>(
    a: &A,
    state: &mut GlsqrState,
) -> Result<GlsqrStep> {
    let k = state.k();
    if state.u.len() <= k || state.v.len() <= k {
        return Ok(GlsqrStep { exhausted: true, ..GlsqrStep::default() });
    }
    check_dim(a.ncols(), state.v[k].len())?;
    let mut step = GlsqrStep::default();

    let mut c = a.apply(&state.v[k]);
    let mut d = a.apply_transpose(&state.u[k]);
    state.scale = state.scale.max(norm2(&c)).max(norm2(&d));

    let alpha = dot(&state.u[k], &c);
    let gamma = if k > 0 { dot(&state.u[k - 1], &c) } else { 0.0 };
    axpy(-alpha, &state.u[k], &mut c);
    if k > 0 {
        axpy(-gamma, &state.u[k - 1], &mut c);
    }
    orthogonalize(&mut c, &state.u);
    let mut beta = norm2(&c);

    let delta = dot(&state.v[k], &d);
    let theta = if k > 0 { dot(&state.v[k - 1], &d) } else { 0.0 };
    axpy(-delta, &state.v[k], &mut d);
    if k > 0 {
        axpy(-theta, &state.v[k - 1], &mut d);
    }
    orthogonalize(&mut d, &state.v);
    let mut eta = norm2(&d);

    let next_u = if beta <= BREAKDOWN_TOL * state.scale || beta == 0.0 {
        step.forward_breakdown = true;
        beta = 0.0;
        restart_vector(&state.u)
    } else {
        c.iter_mut().for_each(|x| *x /= beta);
        Some(c)
    };
    let next_v = if eta <= BREAKDOWN_TOL * state.scale || eta == 0.0 {
        step.adjoint_breakdown = true;
        eta = 0.0;
        restart_vector(&state.v)
    } else {
        d.iter_mut().for_each(|x| *x /= eta);
        Some(d)
    };

    state.t.push_column(gamma, alpha, beta);
    state.s.push_column(theta, delta, eta);
    match (next_u, next_v) {
        (Some(u), Some(v)) => {
            state.u.push(u);
            state.v.push(v);
        }
        _ => step.exhausted = true,
    }
    Ok(step)
}

/// GLSQR on `A x = b` and `A^T y = g` simultaneously.
///
/// A step whose `T_kk` (or `S_kk`) is numerically singular keeps the previous
/// iterate for that side and continues extending the bases.
pub fn glsqr_solve<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    g: &[f64],
    x0: &[f64],
    y0: &[f64],
    cfg: &BaselineConfig,
) -> Result<PairSolution> {
    let n = a.nrows();
    check_dim(a.ncols(), n)?;
    for v in [b, g, x0, y0] {
        check_dim(n, v.len())?;
    }
    let r0 = sub(b, &a.apply(x0));
    let s0 = sub(g, &a.apply_transpose(y0));
    let (r0n, s0n) = (norm2(&r0), norm2(&s0));
    let mut fwd = SideTracker::new(x0.to_vec(), r0n, r0n);
    let mut adj = SideTracker::new(y0.to_vec(), s0n, s0n);
    for side in [&mut fwd, &mut adj] {
        if side.current() == 0.0 {
            side.status = Some(SolveStatus::Converged);
        }
    }
    let mut history = ConvergenceHistory::default();
    history.push_pair(0, r0n, s0n, dot(g, x0));
    if !fwd.active() && !adj.active() {
        return Ok(PairSolution {
            forward: fwd.finish(SolveStatus::Converged),
            adjoint: adj.finish(SolveStatus::Converged),
            history,
        });
    }

    // A solved side still needs some start vector for the coupled process.
    let fallback = |v: &[f64], other: &[f64]| if norm2(v) > 0.0 { v.to_vec() } else { other.to_vec() };
    let mut state = GlsqrState::new(&fallback(&r0, &s0), &fallback(&s0, &r0))?;

    let mut it = 0;
    while it < cfg.maxit && (fwd.active() || adj.active()) {
        it += 1;
        let step = glsqr_extend(a, &mut state)?;
        let k = state.k();
        if fwd.active() {
            fwd.iterations = it;
            let mut rhs = vec![0.0; k];
            rhs[0] = r0n;
            if let Ok(coef) = tridiagonal_solve(&state.t, &rhs) {
                fwd.solution = expand(x0, &state.v, &coef);
            }
            fwd.residuals.push(norm2(&sub(b, &a.apply(&fwd.solution))));
            if fwd.reached(cfg.tol) {
                fwd.status = Some(SolveStatus::Converged);
            } else if step.forward_breakdown || step.exhausted {
                fwd.status = Some(SolveStatus::Breakdown);
            }
        }
        if adj.active() {
            adj.iterations = it;
            let mut rhs = vec![0.0; k];
            rhs[0] = s0n;
            if let Ok(coef) = tridiagonal_solve(&state.s, &rhs) {
                adj.solution = expand(y0, &state.u, &coef);
            }
            adj.residuals.push(norm2(&sub(g, &a.apply_transpose(&adj.solution))));
            if adj.reached(cfg.tol) {
                adj.status = Some(SolveStatus::Converged);
            } else if step.adjoint_breakdown || step.exhausted {
                adj.status = Some(SolveStatus::Breakdown);
            }
        }
        history.push_pair(it, fwd.current(), adj.current(), dot(g, &fwd.solution));
    }
    Ok(PairSolution {
        forward: fwd.finish(SolveStatus::MaxIterations),
        adjoint: adj.finish(SolveStatus::MaxIterations),
        history,
    })
}
