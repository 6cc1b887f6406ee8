//! Iterative rank-reduction heuristics and the end-to-end solver.
//!
//! Both heuristics majorize a concave surrogate of rank by its tangent and
//! re-solve. The square-root variant reweights the trace by `1/√M_ii`; the
//! diagonal-gap variant minimizes `Tr(M) − 2vᵀz` with `v` the previous `z`.

use serde::{Deserialize, Serialize};

use crate::backend::{ClarabelBackend, ConicBackend, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::game::{BimatrixGame, EpsilonReport, GameClass, NormalizationRecord, StrategyProfile};
use crate::moment::{build, ModelOptions, MomentSolution, Objective};
use crate::recovery::{
    certify_with, extract_profile, recover_rank2_symmetric_with, recover_rank2_with, BoundCertificate, RecoveryCase,
};
use crate::scalar::Real;
use crate::spectral::eigendecompose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Trace,
    Sqrt,
    Diaggap,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Trace => "trace",
            Method::Sqrt => "sqrt",
            Method::Diaggap => "diaggap",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" => Ok(Method::Trace),
            "sqrt" => Ok(Method::Sqrt),
            "diaggap" => Ok(Method::Diaggap),
            other => Err(Error::Options(format!("unknown method `{other}` (trace, sqrt, diaggap)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_iterations: usize,
    /// Stop once the true objective decreases by less than this.
    pub decrease_tol: f64,
    /// Floor on diagonal entries in the square-root weights.
    pub delta: f64,
    pub solver: SolverConfig,
    /// Use the symmetric model; requires a symmetric game.
    pub symmetric: bool,
    pub distribution: bool,
    pub mccormick: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_iterations: 20,
            decrease_tol: 1e-7,
            delta: 1e-9,
            solver: SolverConfig::default(),
            symmetric: false,
            distribution: false,
            mccormick: false,
        }
    }
}

impl RunConfig {
    fn model<T: Real>(&self, objective: Objective<T>) -> ModelOptions<T> {
        ModelOptions::sdp2()
            .with_implied(self.distribution, self.mccormick)
            .with_symmetric(self.symmetric)
            .with_objective(objective)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.max_iterations == 0 {
            return Err(Error::Options("max_iterations must be positive".into()));
        }
        if !(self.delta > 0.0) || !(self.decrease_tol >= 0.0) {
            return Err(Error::Options("delta must be positive and decrease_tol nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<T> {
    /// Value of the linearized objective actually minimized.
    pub surrogate: T,
    /// The concave objective being majorized, at the new iterate.
    pub true_objective: T,
    /// Regret of the last-column profile.
    pub eps: T,
    pub rank: usize,
    /// Tightest certified bound at this iterate.
    pub min_bound: T,
    pub solve_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// One trace solve (trace method, or an exactly solvable class).
    SingleSolve,
    Converged,
    MaxIterations,
    /// The solver's answer to a subproblem was worse than the previous
    /// iterate, which is feasible for it; that iterate is kept.
    Stalled,
    /// The solver failed after at least one good iterate.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace<T> {
    pub iterations: Vec<IterationRecord<T>>,
    pub termination: Termination,
    /// Index of the iterate with the smallest ε.
    pub best: usize,
}

/// `Σ h(M_ii)` where `h = √·` above `δ` and the tangent line at `δ` below.
/// `h` is concave with `h'(d) = 1/(2√max(d, δ))`, half the guarded weight,
/// so each reweighted solve decreases it (up to solver accuracy),
/// and `h ≥ √·` keeps the lower bound of two. Its slope is capped at
/// `1/(2√δ)`, so solver noise on vanishing entries stays small.
fn sqrt_objective<T: Real>(d: &[T], delta: T) -> T {
    let root = delta.sqrt();
    let two = T::lit(2.0);
    d.iter().map(|&v| if v >= delta { v.sqrt() } else { root / two + v / (two * root) }).sum()
}

fn diaggap_objective<T: Real>(solution: &MomentSolution<T>) -> T {
    let z = solution.z();
    solution.inner_trace() - z.iter().map(|&v| v * v).sum::<T>()
}

/// Value of an iterated objective at a moment matrix.
fn surrogate_at<T: Real>(objective: &Objective<T>, solution: &MomentSolution<T>) -> Option<T> {
    let d = solution.inner_diagonal();
    match objective {
        Objective::WeightedDiagonal(w) => Some(w.iter().zip(&d).map(|(&a, &b)| a * b).sum()),
        Objective::TraceMinusLinear(v) => {
            let lin: T = v.iter().zip(solution.z()).map(|(&a, b)| a * b).sum();
            Some(d.iter().copied().sum::<T>() - T::lit(2.0) * lin)
        }
        _ => None,
    }
}

struct Iterate<T> {
    solution: MomentSolution<T>,
    record: IterationRecord<T>,
}

fn solve_once<T: Real>(
    game: &BimatrixGame<T>,
    options: &ModelOptions<T>,
    config: &RunConfig,
    true_objective: impl Fn(&MomentSolution<T>) -> T,
) -> Result<Iterate<T>> {
    let problem = build(game, options)?;
    let out = ClarabelBackend.solve(&problem, &config.solver)?;
    let solve_time = out.solve_time;
    let surrogate = out.objective;
    let solution = out.into_primal()?;
    let surrogate = surrogate.unwrap_or(solution.objective);
    let spectrum = eigendecompose(&solution.inner(), game.m())?;
    let eps = game.evaluate_epsilon(&extract_profile(&solution)?)?.eps;
    let cert = certify_with(game, &solution, &spectrum);
    let record = IterationRecord {
        surrogate,
        true_objective: true_objective(&solution),
        eps,
        rank: spectrum.rank,
        min_bound: cert.min_bound(),
        solve_time,
    };
    Ok(Iterate { solution, record })
}

/// Shared loop: `next` maps the previous solution to the next objective, the
/// first objective is `first`.
fn iterate<T: Real>(
    game: &BimatrixGame<T>,
    config: &RunConfig,
    first: Objective<T>,
    next: impl Fn(&MomentSolution<T>) -> Objective<T>,
    true_objective: impl Fn(&MomentSolution<T>) -> T + Copy,
) -> Result<(MomentSolution<T>, RunTrace<T>)> {
    config.validate()?;
    let start = solve_once(game, &config.model(first), config, true_objective)?;
    let mut records = vec![start.record.clone()];
    let mut best = start;
    let mut best_idx = 0;
    let mut prev = best.solution.clone();
    let mut termination = Termination::MaxIterations;
    for k in 1..config.max_iterations {
        let objective = next(&prev);
        let reference = surrogate_at(&objective, &prev);
        let step = match solve_once(game, &config.model(objective.clone()), config, true_objective) {
            Ok(step) => step,
            Err(Error::Solver(_) | Error::Numerical(_) | Error::Precondition(_)) => {
                termination = Termination::NumericalFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        // Monotonicity rests on each subproblem being minimized; an
        // interior-point answer can miss by more than the decrease left.
        if let (Some(before), Some(after)) = (reference, surrogate_at(&objective, &step.solution)) {
            if after > before {
                termination = Termination::Stalled;
                break;
            }
        }
        let decrease = records[k - 1].true_objective - step.record.true_objective;
        records.push(step.record.clone());
        prev = step.solution.clone();
        if step.record.eps < best.record.eps {
            best_idx = k;
            best = step;
        }
        if decrease < T::lit(config.decrease_tol) {
            termination = Termination::Converged;
            break;
        }
    }
    Ok((best.solution, RunTrace { iterations: records, termination, best: best_idx }))
}

/// Iteratively reweighted trace majorizing `Σ √M_ii`.
pub fn run_square_root<T: Real>(game: &BimatrixGame<T>, config: &RunConfig) -> Result<(MomentSolution<T>, RunTrace<T>)> {
    let delta = T::lit(config.delta);
    let size = game.m() + game.n();
    iterate(
        game,
        config,
        Objective::WeightedDiagonal(vec![T::one(); size]),
        |s| Objective::WeightedDiagonal(s.inner_diagonal().iter().map(|&d| T::one() / d.max(delta).sqrt()).collect()),
        move |s| sqrt_objective(&s.inner_diagonal(), delta),
    )
}

/// Linearized `Tr(M) − zᵀz`, starting from `v = 0`.
pub fn run_diagonal_gap<T: Real>(game: &BimatrixGame<T>, config: &RunConfig) -> Result<(MomentSolution<T>, RunTrace<T>)> {
    let size = game.m() + game.n();
    iterate(
        game,
        config,
        Objective::TraceMinusLinear(vec![T::zero(); size]),
        |s| Objective::TraceMinusLinear(s.z()),
        diaggap_objective,
    )
}

/// Single trace-minimization solve.
pub fn run_trace<T: Real>(game: &BimatrixGame<T>, config: &RunConfig) -> Result<(MomentSolution<T>, RunTrace<T>)> {
    config.validate()?;
    let it = solve_once(game, &config.model(Objective::Trace), config, |s| s.inner_trace())?;
    Ok((it.solution, RunTrace { iterations: vec![it.record], termination: Termination::SingleSolve, best: 0 }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashResult<T> {
    /// Best profile found, after recovery when it applied.
    pub profile: StrategyProfile<T>,
    /// Regrets in normalized units.
    pub report: EpsilonReport<T>,
    /// Regrets in the caller's payoff units.
    pub raw_eps: (T, T),
    /// Bounds for the last-column profile of `solution`.
    pub certificate: BoundCertificate<T>,
    pub trace: RunTrace<T>,
    pub class: GameClass<T>,
    pub method: Method,
    /// Method actually run; `Trace` when the class is solved exactly.
    pub effective_method: Method,
    pub recovery: Option<RecoveryCase>,
    pub normalization: NormalizationRecord<T>,
    pub solution: MomentSolution<T>,
    pub status: SolveStatus,
}

/// Normalizes, classifies and solves. Strictly competitive games take one
/// trace solve, whose last column is then an exact equilibrium. Otherwise
/// `method` runs and, at rank ≤ 2, rank-2 recovery is tried.
pub fn solve_nash<T: Real>(game: &BimatrixGame<T>, method: Method, config: &RunConfig) -> Result<NashResult<T>> {
    let class = game.classify();
    let (norm, record) = game.normalize()?;
    if config.symmetric && !norm.is_symmetric() {
        return Err(Error::Options("the symmetric model needs a symmetric game".into()));
    }
    let effective = if class.is_strictly_competitive() { Method::Trace } else { method };
    let (solution, trace) = match effective {
        Method::Trace => run_trace(&norm, config)?,
        Method::Sqrt => run_square_root(&norm, config)?,
        Method::Diaggap => run_diagonal_gap(&norm, config)?,
    };
    let spectrum = eigendecompose(&solution.inner(), norm.m())?;
    let certificate = certify_with(&norm, &solution, &spectrum);
    let base = extract_profile(&solution)?;
    let mut profile = base.clone();
    let mut report = norm.evaluate_epsilon(&base)?;
    let mut recovery = None;
    if spectrum.rank == 2 {
        let out = if config.symmetric {
            recover_rank2_symmetric_with(&norm, &solution, &spectrum)
        } else {
            recover_rank2_with(&norm, &solution, &spectrum)
        };
        if let Ok(out) = out {
            if out.report.eps < report.eps {
                profile = out.profile;
                report = out.report;
            }
            recovery = Some(out.case);
        }
    }
    let status = solution.status.unwrap_or(SolveStatus::Optimal);
    Ok(NashResult {
        raw_eps: record.unscale(&report),
        profile,
        report,
        certificate,
        trace,
        class,
        method,
        effective_method: effective,
        recovery,
        normalization: record,
        solution,
        status,
    })
}
