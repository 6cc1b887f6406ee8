//! Exact small-game ground truth by support enumeration.
//!
//! For every pair of equal-size supports the indifference system is solved
//! directly; a solution that is a probability vector and admits no
//! profitable deviation is an equilibrium. On nondegenerate games this finds
//! every extreme equilibrium, which is enough to answer welfare and
//! persistence questions exactly (both optimize over the convex hull of the
//! extreme points of some equilibrium component).

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{BimatrixGame, StrategyProfile};
use crate::linalg::{solve_linear, Matrix};
use crate::moment::StrategySet;
use crate::scalar::Real;

/// Largest `m` or `n` the oracle accepts.
pub const MAX_ORACLE_DIM: usize = 12;

const SINGULAR_TOL: f64 = 1e-10;
const DEDUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeEquilibriumSet<T> {
    pub equilibria: Vec<StrategyProfile<T>>,
    /// Set when a singular system, a zero-weight support member or an extra
    /// best response was met. The list may then be incomplete.
    pub degenerate: bool,
}

/// A value computed from the enumeration, with its completeness caveat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleAnswer<V> {
    pub value: V,
    pub degenerate: bool,
}

fn guard(m: usize, n: usize) -> Result<()> {
    if m > MAX_ORACLE_DIM || n > MAX_ORACLE_DIM {
        return Err(Error::SizeGuard(format!(
            "{m}x{n} game exceeds the {MAX_ORACLE_DIM}x{MAX_ORACLE_DIM} oracle limit"
        )));
    }
    Ok(())
}

/// Solves `Σ_{c∈cols} M[r][c] p_c = u` for `r ∈ rows`, `Σ p = 1`.
/// `transpose` reads `M[c][r]` instead.
fn indifference<T: Real>(m: &Matrix<T>, rows: &[usize], cols: &[usize], transpose: bool) -> Option<(Vec<T>, T)> {
    let k = rows.len();
    let mut sys = Matrix::zeros(k + 1, k + 1);
    let mut rhs = vec![T::zero(); k + 1];
    for (r, &ri) in rows.iter().enumerate() {
        for (c, &ci) in cols.iter().enumerate() {
            sys[(r, c)] = if transpose { m[(ci, ri)] } else { m[(ri, ci)] };
        }
        sys[(r, k)] = -T::one();
    }
    for c in 0..k {
        sys[(k, c)] = T::one();
    }
    rhs[k] = T::one();
    let sol = solve_linear(&sys, &rhs, T::lit(SINGULAR_TOL))?;
    let u = sol[k];
    Some((sol[..k].to_vec(), u))
}

/// Enumerates equilibria over all equal-size supports up to `max_size`
/// (default `min(m, n)`).
pub fn support_enumeration<T: Real>(game: &BimatrixGame<T>, max_size: Option<usize>) -> Result<ExtremeEquilibriumSet<T>> {
    let (m, n) = (game.m(), game.n());
    guard(m, n)?;
    let max_size = max_size.unwrap_or(m.min(n)).min(m.min(n));
    let (a, b) = (game.a(), game.b());
    let tol = T::tol(1e-9);
    let zero_weight = T::tol(1e-12);
    let scale = a.max_abs().max(b.max_abs()).max(T::one());
    let mut found: Vec<StrategyProfile<T>> = Vec::new();
    let mut degenerate = false;

    for k in 1..=max_size {
        for rows in (0..m).combinations(k) {
            for cols in (0..n).combinations(k) {
                // y makes the row player indifferent over `rows`.
                let Some((ys, u)) = indifference(a, &rows, &cols, false) else {
                    degenerate = true;
                    continue;
                };
                let Some((xs, v)) = indifference(b, &cols, &rows, true) else {
                    degenerate = true;
                    continue;
                };
                if ys.iter().chain(&xs).any(|&p| p < -tol) {
                    continue;
                }
                let mut x = vec![T::zero(); m];
                let mut y = vec![T::zero(); n];
                for (&i, &p) in rows.iter().zip(&xs) {
                    x[i] = p.max(T::zero());
                }
                for (&j, &p) in cols.iter().zip(&ys) {
                    y[j] = p.max(T::zero());
                }
                let row_pay = a.mul_vec(&y);
                let col_pay = b.vec_mul(&x);
                let slack = tol * scale;
                if row_pay.iter().any(|&p| p > u + slack) || col_pay.iter().any(|&p| p > v + slack) {
                    continue;
                }
                let Ok(profile) = StrategyProfile::new(renorm(x), renorm(y)) else {
                    continue;
                };
                if game.evaluate_epsilon(&profile)?.eps > slack {
                    continue;
                }
                if xs.iter().chain(&ys).any(|&p| p <= zero_weight) {
                    degenerate = true;
                }
                let ties_a = row_pay.iter().filter(|&&p| p >= u - slack).count();
                let ties_b = col_pay.iter().filter(|&&p| p >= v - slack).count();
                if ties_a > k || ties_b > k {
                    degenerate = true;
                }
                if !found.iter().any(|q| q.distance(&profile) <= T::lit(DEDUP_TOL)) {
                    found.push(profile);
                }
            }
        }
    }
    Ok(ExtremeEquilibriumSet { equilibria: found, degenerate })
}

fn renorm<T: Real>(v: Vec<T>) -> Vec<T> {
    let s: T = v.iter().copied().sum();
    v.into_iter().map(|p| p / s).collect()
}

impl<T: Real> ExtremeEquilibriumSet<T> {
    pub fn max_welfare(&self, game: &BimatrixGame<T>) -> Result<T> {
        let mut best = T::neg_infinity();
        for p in &self.equilibria {
            best = best.max(game.welfare(p)?);
        }
        Ok(best)
    }

    /// Every listed equilibrium puts more than `1e-8` on `set`.
    pub fn all_intersect(&self, set: &StrategySet) -> bool {
        let threshold = T::lit(1e-8);
        self.equilibria.iter().all(|p| set.mass(p) > threshold)
    }
}

/// Largest `xᵀ(A+B)y` over the extreme equilibria.
pub fn max_welfare_exact<T: Real>(game: &BimatrixGame<T>) -> Result<OracleAnswer<T>> {
    let set = support_enumeration(game, None)?;
    Ok(OracleAnswer { value: set.max_welfare(game)?, degenerate: set.degenerate })
}

/// Whether every equilibrium plays some strategy in `set`.
pub fn is_persistent_exact<T: Real>(game: &BimatrixGame<T>, set: &StrategySet) -> Result<OracleAnswer<bool>> {
    set.validate(game.m(), game.n())?;
    let eqs = support_enumeration(game, None)?;
    Ok(OracleAnswer { value: eqs.all_intersect(set), degenerate: eqs.degenerate })
}
