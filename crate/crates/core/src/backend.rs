//! Conic solver interface and the Clarabel implementation.
//!
//! Problems are handed to the solver in vectorized symmetric form: the
//! matrix variable `W` becomes the column-major upper triangle with
//! off-diagonal entries scaled by √2, so that `⟨C, W⟩ = ⟨svec C, svec W⟩`.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SolverStatus,
    SupportedConeT, ZeroConeT,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::moment::{ConicProblem, Constraint, Direction, MomentSolution, Sense};
use crate::scalar::Real;

/// Environment variable that overrides the feasibility tolerance.
pub const TOL_ENV: &str = "NASH_SDP_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
    /// Seconds.
    pub time_limit: f64,
    /// Let the backend use several threads. Off by default because threaded
    /// factorizations are not bitwise reproducible.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { feas_tol: 1e-8, gap_tol: 1e-8, max_iter: 200, time_limit: 300.0, parallel: false }
    }
}

impl SolverConfig {
    /// Defaults, with the feasibility tolerance taken from `NASH_SDP_TOL`
    /// when that is set.
    pub fn from_env() -> Result<Self> {
        let mut cfg = Self::default();
        if let Ok(raw) = std::env::var(TOL_ENV) {
            cfg.feas_tol = raw
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("{TOL_ENV}={raw:?} is not a number")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.feas_tol) || !pos(self.gap_tol) || !pos(self.time_limit) || self.max_iter == 0 {
            return Err(Error::input("solver tolerances, limits and iteration counts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near_optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution<T> {
    pub status: SolveStatus,
    /// Present exactly when `status.has_solution()`.
    pub primal: Option<MomentSolution<T>>,
    /// Objective in the problem's natural sense.
    pub objective: Option<T>,
    /// Wall time in seconds.
    pub solve_time: f64,
    pub iterations: u32,
}

impl<T: Real> ConicSolution<T> {
    /// The primal matrix, or a solver error naming the status.
    pub fn into_primal(self) -> Result<MomentSolution<T>> {
        self.primal.ok_or_else(|| Error::Solver(self.status.to_string()))
    }
}

pub trait ConicBackend {
    fn solve<T: Real>(&self, problem: &ConicProblem<T>, config: &SolverConfig) -> Result<ConicSolution<T>>;
}

/// Interior-point backend built on Clarabel.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelBackend;

/// `svec` position of upper-triangle entry `(i, j)`, `i ≤ j`.
#[inline]
fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

fn svec_scale(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        std::f64::consts::FRAC_1_SQRT_2
    }
}

fn unsvec(v: &[f64], d: usize) -> Matrix<f64> {
    let mut w = Matrix::zeros(d, d);
    for j in 0..d {
        for i in 0..=j {
            let val = v[svec_index(i, j)] * svec_scale(i, j);
            w[(i, j)] = val;
            w[(j, i)] = val;
        }
    }
    w
}

/// Marks equality rows that are not implied by earlier ones. Redundant
/// equalities make the interior-point KKT system singular at larger sizes.
/// A dependent row whose right-hand side disagrees is kept so that
/// infeasibility is still reported.
fn independent_rows<T: Real>(eqs: &[&Constraint<T>], nvar: usize) -> Vec<bool> {
    const DEP_TOL: f64 = 1e-9;
    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    eqs.iter()
        .map(|c| {
            let mut r = vec![0.0; nvar];
            for &(i, j, v) in c.functional.terms() {
                r[svec_index(i, j)] += v.as_f64() * svec_scale(i, j);
            }
            let mut rhs = c.rhs.as_f64();
            let norm0 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm0 == 0.0 {
                return rhs != 0.0;
            }
            for (q, bq) in &basis {
                let coef: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(q).for_each(|(a, b)| *a -= coef * b);
                rhs -= coef * bq;
            }
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= DEP_TOL * norm0 {
                return rhs.abs() > DEP_TOL * (1.0 + c.rhs.as_f64().abs());
            }
            r.iter_mut().for_each(|v| *v /= norm);
            basis.push((r, rhs / norm));
            true
        })
        .collect()
}

fn map_status(s: SolverStatus) -> SolveStatus {
    match s {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved => SolveStatus::NearOptimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxTime => SolveStatus::TimeLimit,
        _ => SolveStatus::NumericalFailure,
    }
}

impl ConicBackend for ClarabelBackend {
    fn solve<T: Real>(&self, problem: &ConicProblem<T>, config: &SolverConfig) -> Result<ConicSolution<T>> {
        config.validate()?;
        let d = problem.var_dim();
        let nvar = d * (d + 1) / 2;

        let sign = match problem.direction {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        };
        let mut q = vec![0.0; nvar];
        for &(i, j, c) in problem.objective.terms() {
            q[svec_index(i, j)] += sign * c.as_f64() * svec_scale(i, j);
        }

        let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut push_row = |terms: &[(usize, usize, T)], negate: bool, rhs: f64, b: &mut Vec<f64>| {
            let row = b.len();
            let s = if negate { -1.0 } else { 1.0 };
            for &(i, j, c) in terms {
                ri.push(row);
                ci.push(svec_index(i, j));
                vals.push(s * c.as_f64() * svec_scale(i, j));
            }
            b.push(s * rhs);
        };
        // Clarabel form: s = b − A v ∈ K.
        let eqs: Vec<_> = problem.constraints.iter().filter(|c| c.sense == Sense::Eq).collect();
        let keep = independent_rows(&eqs, nvar);
        let mut n_eq = 0;
        for (c, _) in eqs.iter().zip(&keep).filter(|(_, &k)| k) {
            push_row(c.functional.terms(), false, c.rhs.as_f64(), &mut b);
            n_eq += 1;
        }
        let mut n_ineq = 0;
        for c in problem.constraints.iter().filter(|c| c.sense == Sense::Ge) {
            push_row(c.functional.terms(), true, c.rhs.as_f64(), &mut b);
            n_ineq += 1;
        }
        for &(i, j) in &problem.nonnegative {
            push_row(&[(i, j, T::one())], true, 0.0, &mut b);
            n_ineq += 1;
        }
        let psd_start = b.len();
        for k in 0..nvar {
            ri.push(psd_start + k);
            ci.push(k);
            vals.push(-1.0);
            b.push(0.0);
        }
        let a = CscMatrix::new_from_triplets(b.len(), nvar, ri, ci, vals);
        let p = CscMatrix::zeros((nvar, nvar));

        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if n_eq > 0 {
            cones.push(ZeroConeT(n_eq));
        }
        if n_ineq > 0 {
            cones.push(NonnegativeConeT(n_ineq));
        }
        cones.push(PSDTriangleConeT(d));

        let settings = DefaultSettingsBuilder::default()
            .verbose(std::env::var_os("NASH_SDP_VERBOSE").is_some())
            .max_iter(config.max_iter)
            .time_limit(config.time_limit)
            .tol_feas(config.feas_tol)
            .tol_gap_abs(config.gap_tol)
            .tol_gap_rel(config.gap_tol)
            .max_threads(if config.parallel { 0 } else { 1 })
            .chordal_decomposition_enable(false)
            .direct_solve_method("faer".to_string())
            .build()
            .map_err(|e| Error::input(format!("solver settings: {e}")))?;

        let started = Instant::now();
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("setup failed: {e}")))?;
        solver.solve();
        let elapsed = started.elapsed().as_secs_f64();
        let sol = &solver.solution;
        let status = map_status(sol.status);

        let (primal, objective) = if status.has_solution() {
            let w = unsvec(&sol.x, d).cast::<T>();
            let full = problem.recover_moment(&w);
            let value = problem.objective.eval(&w);
            let mut ms = MomentSolution::new(problem.m, problem.n, full)?;
            ms.status = Some(status);
            ms.objective = value;
            (Some(ms), Some(value))
        } else {
            (None, None)
        };
        Ok(ConicSolution { status, primal, objective, solve_time: elapsed, iterations: sol.iterations })
    }
}

/// Solves with Clarabel and fails unless a primal matrix is available.
pub fn solve_primal<T: Real>(problem: &ConicProblem<T>, config: &SolverConfig) -> Result<MomentSolution<T>> {
    ClarabelBackend.solve(problem, config)?.into_primal()
}
