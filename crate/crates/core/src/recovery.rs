//! Profiles and certified ε bounds from moment solutions, and rank-2
//! recovery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{BimatrixGame, EpsilonReport, Player, StrategyProfile};
use crate::linalg::Matrix;
use crate::moment::MomentSolution;
use crate::scalar::Real;
use crate::spectral::{cp_rank2_factorize, eigendecompose, CpFactorization, Spectrum};

const DRIFT_TOL: f64 = 1e-7;
/// Regret level separating the cases of the rank-2 argument.
const CASE_THRESHOLD: f64 = 0.4;

/// Pure best response of `player`; ties go to the lowest index.
pub fn best_response<T: Real>(game: &BimatrixGame<T>, player: Player, opponent: &[T]) -> Result<(usize, T)> {
    game.best_response(player, opponent)
}

/// `(x, y)` read from the last column of `M'`. Small negative entries and
/// sum drift up to `1e-7` are repaired; larger defects are errors.
pub fn extract_profile<T: Real>(solution: &MomentSolution<T>) -> Result<StrategyProfile<T>> {
    let fix = |v: Vec<T>, name: &str| -> Result<Vec<T>> {
        let drift = T::tol(DRIFT_TOL);
        if v.iter().any(|&e| !e.is_finite() || e < -drift) {
            return Err(Error::Numerical(format!("{name} has entries below -1e-7")));
        }
        let v: Vec<T> = v.into_iter().map(|e| e.max(T::zero())).collect();
        let s: T = v.iter().copied().sum();
        if (s - T::one()).abs() > drift || !(s > T::zero()) {
            return Err(Error::Numerical(format!("{name} sums to {s}, off by more than 1e-7")));
        }
        Ok(v.into_iter().map(|e| e / s).collect())
    };
    StrategyProfile::new(fix(solution.x(), "x")?, fix(solution.y(), "y")?)
}

/// Upper bounds on the regret of the last-column profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate<T> {
    /// `max(Tr(AZ) − xᵀAy, Tr(BZ) − xᵀBy)`.
    pub payoff_gap_bound: T,
    /// `‖P − xyᵀ‖₁ / 2`.
    pub l1_bound: T,
    /// `(m+n)/2 · Σ_{i≥2} λ_i`.
    pub rank_k_bound: T,
    /// `3(m+n)/8 · (Tr(M) − xᵀx − yᵀy)`.
    pub diaggap_bound: T,
    pub eigenvalues: Vec<T>,
    pub sums: Vec<T>,
    pub rank: usize,
}

impl<T: Real> BoundCertificate<T> {
    /// The tightest of the l1, rank-k and diagonal-gap bounds.
    pub fn min_bound(&self) -> T {
        self.l1_bound.min(self.rank_k_bound).min(self.diaggap_bound)
    }
}

/// Computes every bound for a feasible point of the strengthened model.
/// All bounds are measured in the units of `game`, assumed in `[0,1]`.
pub fn certify_bounds<T: Real>(game: &BimatrixGame<T>, solution: &MomentSolution<T>) -> Result<BoundCertificate<T>> {
    let spectrum = eigendecompose(&solution.inner(), solution.m())?;
    Ok(certify_with(game, solution, &spectrum))
}

pub(crate) fn certify_with<T: Real>(
    game: &BimatrixGame<T>,
    solution: &MomentSolution<T>,
    spectrum: &Spectrum<T>,
) -> BoundCertificate<T> {
    let (x, y) = (solution.x(), solution.y());
    let p = solution.p_block();
    let gap = p.sub(&Matrix::outer(&x, &y));
    let tr = |c: &Matrix<T>| -> T { c.iter().zip(p.iter()).map(|(&u, &v)| u * v).sum() };
    let pay_gap_a = tr(game.a()) - game.a().bilinear(&x, &y);
    let pay_gap_b = tr(game.b()) - game.b().bilinear(&x, &y);
    let size = T::from_usize_lossy(game.m() + game.n());
    let zz: T = x.iter().chain(&y).map(|&v| v * v).sum();
    let half = T::lit(0.5);
    BoundCertificate {
        payoff_gap_bound: pay_gap_a.max(pay_gap_b).max(T::zero()),
        l1_bound: (gap.l1_norm() * half).max(T::zero()),
        rank_k_bound: (size * half * spectrum.tail_sum()).max(T::zero()),
        diaggap_bound: (T::lit(3.0) * size / T::lit(8.0) * (solution.inner_trace() - zz)).max(T::zero()),
        eigenvalues: spectrum.eigenvalues.clone(),
        sums: spectrum.sums.clone(),
        rank: spectrum.rank,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryCase {
    LastColumn,
    Factor1,
    Factor2,
    MixedResponse,
    SymmetricFactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<T> {
    pub case: RecoveryCase,
    pub profile: StrategyProfile<T>,
    pub report: EpsilonReport<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutcome<T> {
    pub profile: StrategyProfile<T>,
    pub report: EpsilonReport<T>,
    pub case: RecoveryCase,
    pub candidates: Vec<Candidate<T>>,
    pub factorization: Option<CpFactorization<T>>,
}

fn candidate<T: Real>(game: &BimatrixGame<T>, case: RecoveryCase, profile: StrategyProfile<T>) -> Result<Candidate<T>> {
    let report = game.evaluate_epsilon(&profile)?;
    Ok(Candidate { case, profile, report })
}

fn pick<T: Real>(candidates: Vec<Candidate<T>>, factorization: Option<CpFactorization<T>>) -> RecoveryOutcome<T> {
    let best = candidates
        .iter()
        .enumerate()
        .fold(0, |b, (i, c)| if c.report.eps < candidates[b].report.eps { i } else { b });
    let chosen = &candidates[best];
    RecoveryOutcome {
        profile: chosen.profile.clone(),
        report: chosen.report,
        case: chosen.case,
        candidates,
        factorization,
    }
}

/// Simplex vector from a CP factor, repairing rounding.
fn factor_strategy<T: Real>(v: &[T]) -> Vec<T> {
    let v: Vec<T> = v.iter().map(|&e| e.max(T::zero())).collect();
    let s: T = v.iter().copied().sum();
    v.into_iter().map(|e| e / s).collect()
}

/// Rank-2 recovery for general games. Candidates: the last column, both CP
/// factors, and, when exactly one player's regret exceeds 0.4, the profile
/// that mixes the other player's strategy with a best response. The
/// minimizer is returned; its ε is at most 5/11 on feasible inputs.
pub fn recover_rank2<T: Real>(game: &BimatrixGame<T>, solution: &MomentSolution<T>) -> Result<RecoveryOutcome<T>> {
    let spectrum = eigendecompose(&solution.inner(), solution.m())?;
    recover_rank2_with(game, solution, &spectrum)
}

pub(crate) fn recover_rank2_with<T: Real>(
    game: &BimatrixGame<T>,
    solution: &MomentSolution<T>,
    spectrum: &Spectrum<T>,
) -> Result<RecoveryOutcome<T>> {
    if spectrum.rank > 2 {
        return Err(Error::Precondition(format!("rank-2 recovery needs rank ≤ 2, got {}", spectrum.rank)));
    }
    let base = extract_profile(solution)?;
    let mut candidates = vec![candidate(game, RecoveryCase::LastColumn, base.clone())?];
    if spectrum.rank <= 1 {
        return Ok(pick(candidates, None));
    }

    let f = cp_rank2_factorize(&solution.inner(), solution.m())?;
    candidates.push(candidate(
        game,
        RecoveryCase::Factor1,
        StrategyProfile::new(factor_strategy(&f.a), factor_strategy(&f.b))?,
    )?);
    candidates.push(candidate(
        game,
        RecoveryCase::Factor2,
        StrategyProfile::new(factor_strategy(&f.c), factor_strategy(&f.d))?,
    )?);

    let r = candidates[0].report;
    let threshold = T::lit(CASE_THRESHOLD);
    let a_fine = r.eps_a <= threshold;
    let b_fine = r.eps_b <= threshold;
    if a_fine != b_fine {
        let mixed = mixed_response(game, &base, &r)?;
        candidates.push(candidate(game, RecoveryCase::MixedResponse, mixed)?);
    }
    Ok(pick(candidates, Some(f)))
}

/// `(x, p·y + (1−p)·y*)` with `p = 1/(1 + ε_B − ε_A)` and `y*` a best
/// response to `x` when player B is the one with large regret, and the
/// mirror image otherwise.
pub fn mixed_response<T: Real>(
    game: &BimatrixGame<T>,
    profile: &StrategyProfile<T>,
    report: &EpsilonReport<T>,
) -> Result<StrategyProfile<T>> {
    let (hi, lo) = if report.eps_b >= report.eps_a { (report.eps_b, report.eps_a) } else { (report.eps_a, report.eps_b) };
    let p = mixing_weight(lo, hi);
    let q = T::one() - p;
    if report.eps_b >= report.eps_a {
        let (j, _) = game.best_response(Player::B, profile.x())?;
        let y = profile.y().iter().enumerate().map(|(k, &v)| p * v + if k == j { q } else { T::zero() }).collect();
        StrategyProfile::new(profile.x().to_vec(), y)
    } else {
        let (i, _) = game.best_response(Player::A, profile.y())?;
        let x = profile.x().iter().enumerate().map(|(k, &v)| p * v + if k == i { q } else { T::zero() }).collect();
        StrategyProfile::new(x, profile.y().to_vec())
    }
}

/// `1 / (1 + ε_high − ε_low)`.
pub fn mixing_weight<T: Real>(eps_low: T, eps_high: T) -> T {
    T::one() / (T::one() + eps_high - eps_low)
}

/// Rank-2 recovery for a solution of the symmetric model. Candidates
/// `(x,x)`, `(a,a)`, `(c,c)`; the minimizer has ε ≤ 1/3 on feasible inputs.
pub fn recover_rank2_symmetric<T: Real>(
    game: &BimatrixGame<T>,
    solution: &MomentSolution<T>,
) -> Result<RecoveryOutcome<T>> {
    let spectrum = eigendecompose(&solution.inner(), solution.m())?;
    recover_rank2_symmetric_with(game, solution, &spectrum)
}

pub(crate) fn recover_rank2_symmetric_with<T: Real>(
    game: &BimatrixGame<T>,
    solution: &MomentSolution<T>,
    spectrum: &Spectrum<T>,
) -> Result<RecoveryOutcome<T>> {
    if !game.is_symmetric() {
        return Err(Error::Precondition("symmetric recovery needs a symmetric game".into()));
    }
    let tol = T::tol(1e-6);
    let (x, p, y) = (solution.x_block(), solution.p_block(), solution.y_block());
    let lin = solution.x().iter().zip(solution.y()).fold(T::zero(), |acc, (&u, v)| acc.max((u - v).abs()));
    if lin > tol || x.max_abs_diff(&p) > tol || x.max_abs_diff(&y) > tol {
        return Err(Error::Precondition("solution is not symmetric (x = y, X = P = Y)".into()));
    }
    if spectrum.rank > 2 {
        return Err(Error::Precondition(format!("rank-2 recovery needs rank ≤ 2, got {}", spectrum.rank)));
    }
    let base = extract_profile(solution)?;
    let xs = base.x().to_vec();
    let mut candidates = vec![candidate(game, RecoveryCase::LastColumn, StrategyProfile::new(xs.clone(), xs)?)?];
    if spectrum.rank <= 1 {
        return Ok(pick(candidates, None));
    }
    let f = cp_rank2_factorize(&solution.inner(), solution.m())?;
    for v in [&f.a, &f.c] {
        let s = factor_strategy(v);
        candidates.push(candidate(game, RecoveryCase::SymmetricFactor, StrategyProfile::new(s.clone(), s)?)?);
    }
    Ok(pick(candidates, Some(f)))
}
