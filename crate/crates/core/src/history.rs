use serde::{Deserialize, Serialize};

/// How an iteration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Converged,
    #[serde(rename = "maxit")]
    MaxIterations,
    Breakdown,
    Indefinite,
}

impl SolveStatus {
    /// Process exit code used by the benchmark CLI.
    pub fn exit_code(self) -> i32 {
        match self {
            SolveStatus::Converged => 0,
            SolveStatus::MaxIterations => 2,
            SolveStatus::Breakdown => 3,
            SolveStatus::Indefinite => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "maxit",
            SolveStatus::Breakdown => "breakdown",
            SolveStatus::Indefinite => "indefinite",
        }
    }

    /// The less favourable of two side statuses.
    pub fn worst(self, other: SolveStatus) -> SolveStatus {
        let rank = |s: SolveStatus| match s {
            SolveStatus::Converged => 0,
            SolveStatus::MaxIterations => 1,
            SolveStatus::Breakdown => 2,
            SolveStatus::Indefinite => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

/// One row of a convergence history. Quantities that a solver cannot
/// observe are stored as NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub saddle_resnorm: f64,
    pub forward_resnorm: f64,
    pub adjoint_resnorm: f64,
    pub amplitude: f64,
}

/// Per-iteration residual norms and amplitude estimates, starting at
/// iteration 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceHistory {
    pub records: Vec<IterationRecord>,
    /// Full residual vectors, kept only when requested.
    pub residual_vectors: Option<Vec<Vec<f64>>>,
}

impl ConvergenceHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Appends a baseline row; the saddle column is `sqrt(f^2 + a^2)`.
    pub(crate) fn push_pair(&mut self, iter: usize, forward: f64, adjoint: f64, amplitude: f64) {
        self.records.push(IterationRecord {
            iter,
            saddle_resnorm: forward.hypot(adjoint),
            forward_resnorm: forward,
            adjoint_resnorm: adjoint,
            amplitude,
        });
    }

    /// Saddle residual norms divided by the iteration-0 value.
    pub fn relative_saddle_residuals(&self) -> Vec<f64> {
        let r0 = self.records.first().map_or(1.0, |r| r.saddle_resnorm);
        let r0 = if r0 > 0.0 { r0 } else { 1.0 };
        self.records.iter().map(|r| r.saddle_resnorm / r0).collect()
    }
}

/// Stopping rule shared by the baseline solvers: each side stops once
/// `||rhs - op x_k|| <= tol * ||r_0||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub tol: f64,
    pub maxit: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { tol: 1e-8, maxit: 1000 }
    }
}

/// Result for one side (forward or adjoint) of a baseline solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SideSolution {
    pub solution: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    /// True residual norm per iteration, starting at iteration 0.
    pub residuals: Vec<f64>,
}

impl SideSolution {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

/// Forward and adjoint results of a baseline solver plus the merged history.
/// The history's `saddle_resnorm` column holds `sqrt(|r|^2 + |s|^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSolution {
    pub forward: SideSolution,
    pub adjoint: SideSolution,
    pub history: ConvergenceHistory,
}

impl PairSolution {
    pub fn status(&self) -> SolveStatus {
        self.forward.status.worst(self.adjoint.status)
    }

    pub fn iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

/// Tracks one side of a two-sided baseline while the other may still run.
pub(crate) struct SideTracker {
    pub solution: Vec<f64>,
    pub residuals: Vec<f64>,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub rhs_norm: f64,
}

impl SideTracker {
    pub fn new(x0: Vec<f64>, r0: f64, rhs_norm: f64) -> Self {
        Self {
            solution: x0,
            residuals: vec![r0],
            status: None,
            iterations: 0,
            rhs_norm: if rhs_norm > 0.0 { rhs_norm } else { 1.0 },
        }
    }

    pub fn active(&self) -> bool {
        self.status.is_none()
    }

    pub fn current(&self) -> f64 {
        *self.residuals.last().unwrap()
    }

    /// Relative-residual test used by every baseline.
    pub fn reached(&self, tol: f64) -> bool {
        self.current() <= tol * self.rhs_norm
    }

    pub fn finish(self, fallback: SolveStatus) -> SideSolution {
        SideSolution {
            solution: self.solution,
            status: self.status.unwrap_or(fallback),
            iterations: self.iterations,
            residuals: self.residuals,
        }
    }
}
