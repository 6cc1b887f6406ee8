//! Welfare bounds, persistence certificates and the plain level-1 baseline.
//!
//! These take the game as given; callers normalize first when they want
//! values in `[0,1]` units.

use serde::{Deserialize, Serialize};

use crate::backend::{ClarabelBackend, ConicBackend, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::game::BimatrixGame;
use crate::linalg::Matrix;
use crate::moment::{build, ModelOptions, MomentSolution, Objective, StrategySet};
use crate::scalar::Real;

/// Exclusion values above this certify persistence.
pub const EXCLUSION_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareBound<T> {
    /// Upper bound on `xᵀ(A+B)y` over all Nash equilibria.
    pub value: T,
    pub solution: MomentSolution<T>,
}

/// Maximizes `Tr((A+B)ᵀP)` over the strengthened model.
pub fn welfare_upper_bound<T: Real>(game: &BimatrixGame<T>, config: &SolverConfig) -> Result<WelfareBound<T>> {
    let problem = build(game, &ModelOptions::sdp2().with_objective(Objective::Welfare))?;
    let out = ClarabelBackend.solve(&problem, config)?;
    let value = out.objective;
    let solution = out.into_primal()?;
    Ok(WelfareBound { value: value.unwrap_or(solution.objective), solution })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Every Nash equilibrium plays some strategy in the set.
    CertifiedPersistent,
    /// The relaxation cannot decide.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExclusionResult<T> {
    pub set: StrategySet,
    /// Minimum mass the relaxation allows on the set.
    pub value: T,
    pub verdict: Verdict,
}

/// Minimizes the mass on `set` over the strengthened model. A positive
/// minimum proves no equilibrium avoids the set.
pub fn exclusion_value<T: Real>(
    game: &BimatrixGame<T>,
    set: &StrategySet,
    config: &SolverConfig,
) -> Result<ExclusionResult<T>> {
    if set.is_empty() {
        return Err(Error::input("strategy set is empty"));
    }
    let problem = build(game, &ModelOptions::sdp2().with_objective(Objective::Exclusion(set.clone())))?;
    let out = ClarabelBackend.solve(&problem, config)?;
    let value = match out.objective {
        Some(v) => v,
        None => out.into_primal()?.objective,
    };
    let verdict = if value > T::lit(EXCLUSION_THRESHOLD) { Verdict::CertifiedPersistent } else { Verdict::Inconclusive };
    Ok(ExclusionResult { set: set.clone(), value, verdict })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum RelaxationValue<T> {
    Finite(T),
    Unbounded,
}

impl<T: Real> RelaxationValue<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            RelaxationValue::Finite(v) => Some(v),
            RelaxationValue::Unbounded => None,
        }
    }
}

/// Minimizes `Tr(C M')` over the model described by `options` (its
/// objective is replaced).
pub fn relaxation_value<T: Real>(
    game: &BimatrixGame<T>,
    options: ModelOptions<T>,
    c: &Matrix<T>,
    config: &SolverConfig,
) -> Result<RelaxationValue<T>> {
    let problem = build(game, &options.with_objective(Objective::Quadratic(c.clone())))?;
    let out = ClarabelBackend.solve(&problem, config)?;
    match (out.status, out.objective) {
        (SolveStatus::Unbounded, _) => Ok(RelaxationValue::Unbounded),
        (_, Some(v)) => Ok(RelaxationValue::Finite(v)),
        (status, None) => Err(Error::Solver(format!("level-1 relaxation ended with status {status}"))),
    }
}

/// The plain level-1 relaxation: relaxed Nash rows, unity, the corner and
/// a nonnegative last column only.
pub fn lasserre1_value<T: Real>(game: &BimatrixGame<T>, c: &Matrix<T>, config: &SolverConfig) -> Result<RelaxationValue<T>> {
    relaxation_value(game, ModelOptions::sdp0(), c, config)
}

/// `C` with `Tr(C M') = −Σ (A+B)_ij P_ij`, i.e. negative welfare.
pub fn negative_welfare_matrix<T: Real>(game: &BimatrixGame<T>) -> Matrix<T> {
    let (m, n) = (game.m(), game.n());
    let half = T::lit(0.5);
    let mut c = Matrix::zeros(m + n + 1, m + n + 1);
    for i in 0..m {
        for j in 0..n {
            let v = -(game.a()[(i, j)] + game.b()[(i, j)]) * half;
            c[(i, m + j)] = v;
            c[(m + j, i)] = v;
        }
    }
    c
}
