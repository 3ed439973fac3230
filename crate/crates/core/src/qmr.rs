//! QMR on the unsymmetric Lanczos biorthogonalization.
//!
//! The process builds `V_k`, `W_k` with `W_k^T V_k = I` and
//!
//! ```text
//!     A V_k   = V_{k+1} T_{k+1,k}
//!     A^T W_k = W_{k+1} That_{k+1,k}
//! ```
//!
//! Columns of `V` have unit 2-norm and each `w_j` is scaled so that
//! `w_j^T v_j = 1`. Both sequences are rebiorthogonalized against all previous
//! columns. There is no look-ahead: a vanishing `w~^T v~` aborts the solve.

use crate::error::{check_dim, Error, Result};
use crate::history::{
    BaselineConfig, ConvergenceHistory, PairSolution, SideTracker, SolveStatus,
};
use crate::linalg::vector::{axpy, dot, norm2, sub};
use crate::linalg::{tridiagonal_lstsq, LinearOperator, Tridiagonal};

/// Relative threshold for a serious breakdown.
const SERIOUS_TOL: f64 = 1e-12;
/// Relative size below which a new Lanczos vector counts as zero.
const EXHAUSTED_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct LanczosPair {
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub t: Tridiagonal,
    pub t_hat: Tridiagonal,
    scale: f64,
}

/// Result of one biorthogonalization step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LanczosStep {
    Extended,
    /// `v~` or `w~` vanished; the Krylov space is invariant.
    Exhausted,
}

impl LanczosPair {
    /// Starts from `v_1 = v / |v|` and `w_1 = w / (w^T v_1)`.
    pub fn new(v: &[f64], w: &[f64]) -> Result<Self> {
        check_dim(v.len(), w.len())?;
        let nv = norm2(v);
        if nv == 0.0 || norm2(w) == 0.0 {
            return Err(Error::InvalidParameter("Lanczos start vectors must be nonzero".into()));
        }
        let v1: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let coupling = dot(w, &v1);
        if coupling.abs() < SERIOUS_TOL * norm2(w) {
            return Err(Error::Singular("start vectors are orthogonal".into()));
        }
        let w1 = w.iter().map(|x| x / coupling).collect();
        Ok(Self {
            v: vec![v1],
            w: vec![w1],
            t: Tridiagonal::default(),
            t_hat: Tridiagonal::default(),
            scale: 0.0,
        })
    }

    pub fn k(&self) -> usize {
        self.t.ncols()
    }

    /// `max |W_k^T V_k - I|` over the current columns.
    pub fn biorthogonality_defect(&self) -> f64 {
        let k = self.v.len().min(self.w.len());
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&self.w[i], &self.v[j]) - target).abs());
            }
        }
        worst
    }
}

/// Removes the components of `x` along `along` measured by `by`:
/// `x -= sum_j (by_j^T x) along_j`, twice.
fn rebiorthogonalize(x: &mut [f64], along: &[Vec<f64>], by: &[Vec<f64>]) {
    for _ in 0..2 {
        for (a, b) in along.iter().zip(by) {
            let c = dot(b, x);
            axpy(-c, a, x);
        }
    }
}

/// Appends column `k` of `T`, `That` and the vectors `v_{k+1}`, `w_{k+1}`.
pub fn unsym_lanczos_extend<A: LinearOperator + ?Sized>(
    a: &A,
    state: &mut LanczosPair,
) -> Result<LanczosStep> {
    let k = state.k();
    if state.v.len() <= k {
        return Ok(LanczosStep::Exhausted);
    }
    check_dim(a.ncols(), state.v[k].len())?;

    let mut vt = a.apply(&state.v[k]);
    let mut wt = a.apply_transpose(&state.w[k]);
    state.scale = state.scale.max(norm2(&vt)).max(norm2(&wt));

    let alpha = dot(&state.w[k], &vt);
    let upper = if k > 0 { dot(&state.w[k - 1], &vt) } else { 0.0 };
    let upper_hat = if k > 0 { dot(&state.v[k - 1], &wt) } else { 0.0 };
    axpy(-alpha, &state.v[k], &mut vt);
    axpy(-alpha, &state.w[k], &mut wt);
    if k > 0 {
        axpy(-upper, &state.v[k - 1], &mut vt);
        axpy(-upper_hat, &state.w[k - 1], &mut wt);
    }
    rebiorthogonalize(&mut vt, &state.v, &state.w);
    rebiorthogonalize(&mut wt, &state.w, &state.v);

    let (nv, nw) = (norm2(&vt), norm2(&wt));
    let floor = EXHAUSTED_TOL * state.scale;
    if nv <= floor || nw <= floor {
        state.t.push_column(upper, alpha, 0.0);
        state.t_hat.push_column(upper_hat, alpha, 0.0);
        return Ok(LanczosStep::Exhausted);
    }
    let coupling = dot(&wt, &vt);
    if coupling.abs() < SERIOUS_TOL * nv * nw {
        return Err(Error::Singular(format!(
            "serious Lanczos breakdown at step {}: |w^T v| = {:.3e}",
            k + 1,
            coupling.abs()
        )));
    }
    let v_next: Vec<f64> = vt.iter().map(|x| x / nv).collect();
    let lower_hat = coupling / nv;
    let w_next = wt.iter().map(|x| x / lower_hat).collect();
    state.t.push_column(upper, alpha, nv);
    state.t_hat.push_column(upper_hat, alpha, lower_hat);
    state.v.push(v_next);
    state.w.push(w_next);
    Ok(LanczosStep::Extended)
}

/// A QMR solve: both sides plus their quasi-residual histories.
#[derive(Debug, Clone, PartialEq)]
pub struct QmrSolution {
    pub pair: PairSolution,
    /// `|| |r_0| e_1 - T_{k+1,k} c_k ||`, starting with `|r_0|`.
    pub forward_quasi: Vec<f64>,
    /// `|| zeta e_1 - That_{k+1,k} d_k ||` with `s_0 = zeta w_1`.
    pub adjoint_quasi: Vec<f64>,
}

/// One QMR side: minimize the quasi-residual of the given tridiagonal.
fn qmr_update(
    tracker: &mut SideTracker,
    quasi: &mut Vec<f64>,
    t: &Tridiagonal,
    beta0: f64,
    x0: &[f64],
    basis: &[Vec<f64>],
) -> Result<()> {
    let k = t.ncols();
    let mut rhs = vec![0.0; k + 1];
    rhs[0] = beta0;
    let (c, qres) = tridiagonal_lstsq(t, &rhs)?;
    let mut x = x0.to_vec();
    for (cj, q) in c.iter().zip(basis) {
        axpy(*cj, q, &mut x);
    }
    tracker.solution = x;
    quasi.push(qres);
    Ok(())
}

/// QMR on `A x = b` and `A^T y = g` from one shared Lanczos pair started
/// at `v_1 = r_0/|r_0|`, `w_1 ~ s_0`.
///
/// A serious breakdown stops both sides with status `Breakdown` and keeps the
/// partial history.
pub fn qmr_solve<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    g: &[f64],
    x0: &[f64],
    y0: &[f64],
    cfg: &BaselineConfig,
) -> Result<QmrSolution> {
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
    let mut history = ConvergenceHistory::default();
    history.push_pair(0, r0n, s0n, dot(g, x0));
    let mut forward_quasi = vec![r0n];
    let mut adjoint_quasi = vec![s0n];
    if r0n == 0.0 {
        fwd.status = Some(SolveStatus::Converged);
    }
    if s0n == 0.0 {
        adj.status = Some(SolveStatus::Converged);
    }
    let done = |fwd: SideTracker, adj: SideTracker, history, fq, aq| QmrSolution {
        pair: PairSolution {
            forward: fwd.finish(SolveStatus::MaxIterations),
            adjoint: adj.finish(SolveStatus::MaxIterations),
            history,
        },
        forward_quasi: fq,
        adjoint_quasi: aq,
    };
    if !fwd.active() && !adj.active() {
        return Ok(done(fwd, adj, history, forward_quasi, adjoint_quasi));
    }

    // A side that is already solved still needs a start vector.
    let v_start = if r0n > 0.0 { r0.clone() } else { s0.clone() };
    let w_start = if s0n > 0.0 { s0.clone() } else { v_start.clone() };
    let mut pair = match LanczosPair::new(&v_start, &w_start) {
        Ok(p) => p,
        Err(Error::Singular(_)) => {
            fwd.status.get_or_insert(SolveStatus::Breakdown);
            adj.status.get_or_insert(SolveStatus::Breakdown);
            return Ok(done(fwd, adj, history, forward_quasi, adjoint_quasi));
        }
        Err(e) => return Err(e),
    };
    let zeta = dot(&s0, &pair.v[0]);

    let mut it = 0;
    while it < cfg.maxit && (fwd.active() || adj.active()) {
        it += 1;
        let step = match unsym_lanczos_extend(a, &mut pair) {
            Ok(s) => s,
            Err(Error::Singular(_)) => {
                fwd.status.get_or_insert(SolveStatus::Breakdown);
                adj.status.get_or_insert(SolveStatus::Breakdown);
                break;
            }
            Err(e) => return Err(e),
        };
        if fwd.active() {
            fwd.iterations = it;
            qmr_update(&mut fwd, &mut forward_quasi, &pair.t, r0n, x0, &pair.v)?;
            fwd.residuals.push(norm2(&sub(b, &a.apply(&fwd.solution))));
            if fwd.reached(cfg.tol) {
                fwd.status = Some(SolveStatus::Converged);
            } else if step == LanczosStep::Exhausted {
                fwd.status = Some(SolveStatus::Breakdown);
            }
        }
        if adj.active() {
            adj.iterations = it;
            qmr_update(&mut adj, &mut adjoint_quasi, &pair.t_hat, zeta, y0, &pair.w)?;
            adj.residuals.push(norm2(&sub(g, &a.apply_transpose(&adj.solution))));
            if adj.reached(cfg.tol) {
                adj.status = Some(SolveStatus::Converged);
            } else if step == LanczosStep::Exhausted {
                adj.status = Some(SolveStatus::Breakdown);
            }
        }
        history.push_pair(it, fwd.current(), adj.current(), dot(g, &fwd.solution));
    }
    Ok(done(fwd, adj, history, forward_quasi, adjoint_quasi))
}
