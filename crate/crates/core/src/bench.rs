//! Test problems and the benchmark harness.
//!
//! Every run is a pure function of its [`RunConfig`]: matrices and right-hand
//! sides come from seeded ChaCha streams, so repeated runs produce identical
//! CSV and JSON bytes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bidiag::{glsqr_solve, lsqr_solve};
use crate::error::{Error, Result};
use crate::history::{BaselineConfig, ConvergenceHistory, PairSolution, SolveStatus};
use crate::linalg::vector::{norm2, unit_ones};
use crate::linalg::{householder_qr, CsrMatrix, DenseMatrix, LinearOperator};
use crate::mmio::{finite, read_matrix_market, write_history_csv, RunSummary};
use crate::nspcg::{nspcg_solve_observed, NspcgConfig, Scattering};
use crate::precond::{solve_preconditioned, SaddlePreconditioner, TransformedOperator};
use crate::qmr::qmr_solve;
use crate::saddle::{amplitude_of, SaddleSystem, SaddleVector};
use crate::spectral::{WeightMode, DEFAULT_SAFETY};

/// Environment variable naming a local copy of `orsirr_1.mtx`.
pub const ORSIRR_1_ENV: &str = "ORSIRR_1_PATH";
/// Fallback location, relative to the working directory.
pub const ORSIRR_1_DEFAULT: &str = "data/orsirr_1.mtx";

/// Where ORSIRR_1 is expected: `$ORSIRR_1_PATH`, else `data/orsirr_1.mtx`.
pub fn orsirr_1_path() -> PathBuf {
    std::env::var_os(ORSIRR_1_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(ORSIRR_1_DEFAULT))
}

/// Appends `density`-Bernoulli entries with Uniform(0,1) values.
fn sprand_into(rng: &mut ChaCha8Rng, n: usize, density: f64, scale: f64, trip: &mut Vec<(usize, usize, f64)>) {
    for i in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < density {
                trip.push((i, j, scale * rng.random::<f64>()));
            }
        }
    }
}

fn check_density(density: f64) -> Result<()> {
    if density > 0.0 && density <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("density must lie in (0, 1], got {density}")))
    }
}

/// `sprand(n, n, density) + I`.
pub fn gen_example1(n: usize, density: f64, seed: u64) -> Result<CsrMatrix> {
    check_density(density)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
    sprand_into(&mut rng, n, density, 1.0, &mut trip);
    CsrMatrix::from_triplets(n, n, trip)
}

/// The cyclic shift `J`: ones on the superdiagonal and at `(n-1, 0)`.
pub fn circulant_shift(n: usize) -> CsrMatrix {
    let trip = (0..n).map(|i| (i, (i + 1) % n, 1.0));
    CsrMatrix::from_triplets(n, n, trip).expect("indices in range")
}

/// `scale * sprand(n, n, 0.2) + J`.
pub fn gen_example3(n: usize, scale: f64, seed: u64) -> Result<CsrMatrix> {
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!("scale must be finite and >= 0, got {scale}")));
    }
    let mut trip: Vec<_> = circulant_shift(n).triplets().collect();
    if scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sprand_into(&mut rng, n, 0.2, scale, &mut trip);
    }
    CsrMatrix::from_triplets(n, n, trip)
}

/// How `U` and `V` are drawn in [`gen_example456`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrthogonalFactors {
    /// Q factors of seeded Gaussian matrices, signed so `R` has a positive
    /// diagonal.
    Random,
    /// `U = V = I`, so `A = Sigma`.
    Identity,
}

/// The singular values `diag(1000 I_p, 1, 2, .., n - p)`.
pub fn example456_singular_values(n: usize, p: usize) -> Vec<f64> {
    (0..n).map(|i| if i < p { 1000.0 } else { (i - p + 1) as f64 }).collect()
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Result<DenseMatrix> {
    let g: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    let (mut q, r) = householder_qr(&DenseMatrix::from_row_major(n, n, g)?)?;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// `A = U Sigma V^T` with `Sigma = diag(1000 I_p, diag(1..q))`, `q = n - p`.
pub fn gen_example456(n: usize, p: usize, seed: u64, factors: OrthogonalFactors) -> Result<CsrMatrix> {
    if p == 0 || p >= n {
        return Err(Error::InvalidParameter(format!("need 0 < p < n, got p = {p}, n = {n}")));
    }
    let sigma = example456_singular_values(n, p);
    if factors == OrthogonalFactors::Identity {
        return Ok(CsrMatrix::from_diagonal(&sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(n, &mut rng)?;
    let v = random_orthogonal(n, &mut rng)?;
    let mut us = u;
    for i in 0..n {
        for j in 0..n {
            us[(i, j)] *= sigma[j];
        }
    }
    let a = us.matmul(&v.transpose())?;
    Ok(CsrMatrix::from_dense(&a, 0.0))
}

/// A test matrix and its generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSpec {
    Example1 { n: usize, density: f64, seed: u64 },
    /// ORSIRR_1, read from a local Matrix Market file.
    Example2 { path: PathBuf },
    Example3 { n: usize, scale: f64, seed: u64 },
    /// Examples 4, 5 and 6 share a generator and differ in `n`, `p`.
    Svd { example: u8, n: usize, p: usize, seed: u64 },
    File { path: PathBuf },
}

impl ProblemSpec {
    /// The default parameters for this example.
    pub fn example(k: u8, seed: u64) -> Result<Self> {
        Ok(match k {
            1 => ProblemSpec::Example1 { n: 100, density: 0.2, seed },
            2 => ProblemSpec::Example2 { path: orsirr_1_path() },
            3 => ProblemSpec::Example3 { n: 100, scale: 1e-3, seed },
            4 => ProblemSpec::Svd { example: 4, n: 100, p: 90, seed },
            5 => ProblemSpec::Svd { example: 5, n: 100, p: 50, seed },
            6 => ProblemSpec::Svd { example: 6, n: 1000, p: 600, seed },
            _ => return Err(Error::InvalidParameter(format!("no example {k}; expected 1..=6"))),
        })
    }

    /// Short name used in file names and summaries.
    pub fn name(&self) -> String {
        match self {
            ProblemSpec::Example1 { .. } => "example1".into(),
            ProblemSpec::Example2 { .. } => "example2".into(),
            ProblemSpec::Example3 { .. } => "example3".into(),
            ProblemSpec::Svd { example, .. } => format!("example{example}"),
            ProblemSpec::File { path } => path
                .file_stem()
                .map_or_else(|| "file".into(), |s| s.to_string_lossy().into_owned()),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ProblemSpec::Example1 { seed, .. }
            | ProblemSpec::Example3 { seed, .. }
            | ProblemSpec::Svd { seed, .. } => *seed,
            ProblemSpec::Example2 { .. } | ProblemSpec::File { .. } => 0,
        }
    }

    pub fn build(&self) -> Result<CsrMatrix> {
        match self {
            ProblemSpec::Example1 { n, density, seed } => gen_example1(*n, *density, *seed),
            ProblemSpec::Example3 { n, scale, seed } => gen_example3(*n, *scale, *seed),
            ProblemSpec::Svd { n, p, seed, .. } => gen_example456(*n, *p, *seed, OrthogonalFactors::Random),
            ProblemSpec::Example2 { path } | ProblemSpec::File { path } => load_matrix(path),
        }
    }
}

/// Reads a Matrix Market file from disk.
pub fn load_matrix(path: &Path) -> Result<CsrMatrix> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    read_matrix_market(std::io::BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Nspcg,
    Glsqr,
    Qmr,
    Lsqr,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::Nspcg, Solver::Glsqr, Solver::Qmr, Solver::Lsqr];

    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Nspcg => "nspcg",
            Solver::Glsqr => "glsqr",
            Solver::Qmr => "qmr",
            Solver::Lsqr => "lsqr",
        }
    }
}

impl std::str::FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precond {
    None,
    /// Incomplete QR with the given drop tolerance.
    Iqr(f64),
    /// Exact QR.
    Exact,
}

impl Precond {
    pub fn droptol(self) -> Option<f64> {
        match self {
            Precond::None => None,
            Precond::Iqr(t) => Some(t),
            Precond::Exact => Some(0.0),
        }
    }
}

impl fmt::Display for Precond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precond::None => write!(f, "none"),
            Precond::Iqr(t) => write!(f, "iqr:{t}"),
            Precond::Exact => write!(f, "exact"),
        }
    }
}

impl std::str::FromStr for Precond {
    type Err = Error;
    /// `none`, `exact`, `iqr` (default drop tolerance) or `iqr:DROPTOL`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Precond::None),
            "exact" => Ok(Precond::Exact),
            "iqr" => Ok(Precond::Iqr(crate::precond::DEFAULT_DROPTOL)),
            _ => {
                let t = s
                    .strip_prefix("iqr:")
                    .and_then(|t| t.parse::<f64>().ok())
                    .filter(|t| *t >= 0.0 && t.is_finite())
                    .ok_or_else(|| Error::InvalidParameter(format!("bad preconditioner '{s}'")))?;
                Ok(if t == 0.0 { Precond::Exact } else { Precond::Iqr(t) })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rhs {
    /// `c = d = ones / sqrt(n)`.
    Ones,
    /// Independent Gaussian `c`, `d`, normalized, seeded from the run seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub solver: Solver,
    pub precond: Precond,
    pub w_mode: WeightMode,
    pub tol: f64,
    pub maxit: usize,
    pub rhs: Rhs,
    /// Seed for random right-hand sides.
    pub seed: u64,
    /// Fill `wall_ms` in the summary. Off by default so output is
    /// reproducible byte for byte.
    pub record_timing: bool,
}

impl RunConfig {
    pub fn new(problem: ProblemSpec, solver: Solver) -> Self {
        let seed = problem.seed();
        Self {
            problem,
            solver,
            precond: Precond::None,
            w_mode: WeightMode::Weak,
            tol: 1e-8,
            maxit: 500,
            rhs: Rhs::Ones,
            seed,
            record_timing: false,
        }
    }

    /// `<problem>_<solver>[_<precond>]`, used for output file names.
    pub fn label(&self) -> String {
        let base = format!("{}_{}", self.problem.name(), self.solver.as_str());
        match self.precond {
            Precond::None => base,
            Precond::Exact => format!("{base}_exact"),
            Precond::Iqr(t) => format!("{base}_iqr{t}"),
        }
    }
}

/// The right-hand sides `c` (forward) and `d` (adjoint).
pub fn build_rhs(n: usize, rhs: Rhs, seed: u64) -> (Vec<f64>, Vec<f64>) {
    match rhs {
        Rhs::Ones => (unit_ones(n), unit_ones(n)),
        Rhs::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e_ed0f_2a11);
            let mut draw = || {
                let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let s = norm2(&v);
                v.iter_mut().for_each(|x| *x /= s);
                v
            };
            let c = draw();
            let d = draw();
            (c, d)
        }
    }
}

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub history: ConvergenceHistory,
    pub status: SolveStatus,
    pub forward: Vec<f64>,
    pub adjoint: Vec<f64>,
}

impl RunOutput {
    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_history_csv(&self.history, &mut buf)?;
        Ok(buf)
    }

    pub fn json(&self) -> Result<String> {
        self.summary.to_json()
    }
}

fn with_context(cfg: &RunConfig, stage: &str, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{} / {} / {stage}: {io}", cfg.problem.name(), cfg.solver.as_str()),
        )),
        other => other,
    }
}

struct Solved {
    history: ConvergenceHistory,
    status: SolveStatus,
    iterations: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    w: Option<f64>,
    gamma: Option<f64>,
}

fn solve_pair(
    solver: Solver,
    op: &dyn LinearOperator,
    b: &[f64],
    g: &[f64],
    cfg: &BaselineConfig,
) -> Result<PairSolution> {
    let n = b.len();
    let zero = vec![0.0; n];
    match solver {
        Solver::Lsqr => lsqr_solve(op, b, g, &zero, &zero, cfg),
        Solver::Glsqr => glsqr_solve(op, b, g, &zero, &zero, cfg),
        Solver::Qmr => qmr_solve(op, b, g, &zero, &zero, cfg).map(|s| s.pair),
        Solver::Nspcg => unreachable!("NspCG is not a pair solver"),
    }
}

fn run_solver(cfg: &RunConfig, a: CsrMatrix, c: &[f64], d: &[f64]) -> Result<Solved> {
    let base = BaselineConfig { tol: cfg.tol, maxit: cfg.maxit };
    let needs_saddle = cfg.solver == Solver::Nspcg || cfg.precond != Precond::None;
    if !needs_saddle {
        let pair = solve_pair(cfg.solver, &a, c, d, &base)?;
        return Ok(Solved {
            status: pair.status(),
            iterations: pair.iterations(),
            x: pair.forward.solution,
            y: pair.adjoint.solution,
            history: pair.history,
            w: None,
            gamma: None,
        });
    }

    let (sys, wc, gc) = SaddleSystem::from_spectral(a, cfg.w_mode, DEFAULT_SAFETY)?;
    let ncfg = NspcgConfig { tol: cfg.tol, maxit: cfg.maxit, ..NspcgConfig::default() };
    let n = sys.n();
    let pre = match cfg.precond.droptol() {
        Some(t) => Some(SaddlePreconditioner::new(&sys, t)?),
        None => None,
    };
    match (cfg.solver, pre) {
        (Solver::Nspcg, None) => {
            let b = sys.build_rhs(c, d)?;
            let observer = Scattering { a: sys.a(), c, d };
            let res = nspcg_solve_observed(&sys, &b, &SaddleVector::zeros(n), &ncfg, Some(&observer))?;
            Ok(Solved {
                status: res.status,
                iterations: res.iterations,
                x: res.z.top().to_vec(),
                y: res.z.bottom().to_vec(),
                history: res.history,
                w: Some(wc.w),
                gamma: Some(gc.gamma),
            })
        }
        (Solver::Nspcg, Some(pre)) => {
            let out = solve_preconditioned(&sys, &pre, c, d, &ncfg)?;
            Ok(Solved {
                status: out.inner.status,
                iterations: out.inner.iterations,
                x: out.z.top().to_vec(),
                y: out.z.bottom().to_vec(),
                history: out.inner.history,
                w: Some(wc.w),
                gamma: Some(out.gamma),
            })
        }
        (solver, Some(pre)) => {
            let t = TransformedOperator { a: sys.a(), pre: &pre };
            let pair = solve_pair(solver, &t, &t.forward_rhs(c), &t.adjoint_rhs(d), &base)?;
            Ok(Solved {
                status: pair.status(),
                iterations: pair.iterations(),
                x: t.recover_forward(&pair.forward.solution),
                y: t.recover_adjoint(&pair.adjoint.solution),
                history: pair.history,
                w: Some(wc.w),
                gamma: None,
            })
        }
        (_, None) => unreachable!("handled above"),
    }
}

/// Builds the problem, runs the configured solver and collects the outputs.
pub fn run_benchmark(cfg: &RunConfig) -> Result<RunOutput> {
    if !(cfg.tol > 0.0) || cfg.maxit == 0 {
        return Err(Error::InvalidParameter("tol must be positive and maxit at least 1".into()));
    }
    let start = Instant::now();
    let a = cfg.problem.build().map_err(|e| with_context(cfg, "build", e))?;
    if !a.is_square() {
        return Err(Error::InvalidParameter(format!(
            "matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let (c, d) = build_rhs(n, cfg.rhs, cfg.seed);
    let solved = run_solver(cfg, a.clone(), &c, &d).map_err(|e| with_context(cfg, "solve", e))?;
    let check = amplitude_of(&a, &solved.x, &solved.y, &c, &d);
    let wall_ms = cfg.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    let summary = RunSummary {
        solver: cfg.solver.as_str().into(),
        problem: cfg.problem.name(),
        n,
        w: solved.w,
        gamma: solved.gamma,
        droptol: cfg.precond.droptol(),
        status: solved.status.as_str().into(),
        iterations: solved.iterations,
        final_saddle_residual: solved.history.last().and_then(|r| finite(r.saddle_resnorm)),
        final_forward_residual: finite(check.forward_residual),
        final_adjoint_residual: finite(check.adjoint_residual),
        amplitude: finite(check.amplitude),
        consistency_gap: finite(check.consistency_gap),
        wall_ms,
    };
    Ok(RunOutput {
        summary,
        history: solved.history,
        status: solved.status,
        forward: solved.x,
        adjoint: solved.y,
    })
}

/// How a sweep runs its independent configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Across a rayon pool (sequential when built without `parallel`).
    Parallel,
}

/// Options for [`sweep_configs`].
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Local ORSIRR_1 file; Example 2 is skipped without it.
    pub orsirr_1: Option<PathBuf>,
    pub include_example6: bool,
    pub seed: u64,
}

/// Unpreconditioned runs of every solver on Examples 1-6, then the
/// preconditioned runs on Examples 1 and 2.
pub fn sweep_configs(opts: &SweepOptions) -> Result<Vec<RunConfig>> {
    let seed = if opts.seed == 0 { 1 } else { opts.seed };
    let mut problems = vec![ProblemSpec::example(1, seed)?];
    if let Some(path) = &opts.orsirr_1 {
        problems.push(ProblemSpec::Example2 { path: path.clone() });
    }
    for k in [3, 4, 5] {
        problems.push(ProblemSpec::example(k, seed)?);
    }
    if opts.include_example6 {
        problems.push(ProblemSpec::example(6, seed)?);
    }
    let mut out = Vec::new();
    for p in &problems {
        for s in Solver::ALL {
            let mut cfg = RunConfig::new(p.clone(), s);
            if matches!(p, ProblemSpec::Svd { example: 6, .. }) {
                cfg.maxit = 1000;
            }
            out.push(cfg);
        }
    }
    for p in problems.iter().filter(|p| matches!(p, ProblemSpec::Example1 { .. } | ProblemSpec::Example2 { .. })) {
        for s in Solver::ALL {
            let mut cfg = RunConfig::new(p.clone(), s);
            cfg.precond = Precond::Iqr(crate::precond::DEFAULT_DROPTOL);
            out.push(cfg);
        }
    }
    Ok(out)
}

/// Runs every configuration; results keep the input order.
pub fn run_sweep(configs: &[RunConfig], exec: Execution) -> Vec<Result<RunOutput>> {
    match exec {
        Execution::Sequential => configs.iter().map(run_benchmark).collect(),
        Execution::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                configs.par_iter().map(run_benchmark).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                configs.iter().map(run_benchmark).collect()
            }
        }
    }
}

/// Writes `<label>.csv` and `<label>.json` for every successful run and
/// returns the paths written.
pub fn write_sweep(
    dir: &Path,
    configs: &[RunConfig],
    results: &[Result<RunOutput>],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (cfg, res) in configs.iter().zip(results) {
        let Ok(out) = res else { continue };
        let csv = dir.join(format!("{}.csv", cfg.label()));
        let json = dir.join(format!("{}.json", cfg.label()));
        std::fs::write(&csv, out.csv_bytes()?)?;
        std::fs::write(&json, out.json()?)?;
        written.push(csv);
        written.push(json);
    }
    Ok(written)
}
