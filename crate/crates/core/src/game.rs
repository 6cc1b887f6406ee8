//! Bimatrix games, strategy profiles and the ε-Nash measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// A two-player game: the row player receives `A[i][j]`, the column player
/// `B[i][j]`, when row `i` meets column `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimatrixGame<T> {
    a: Matrix<T>,
    b: Matrix<T>,
}

impl<T: Real> BimatrixGame<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>) -> Result<Self> {
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::input("payoff matrices must have at least one row and column"));
        }
        if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
            return Err(Error::dim(format!(
                "A is {}x{} but B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::input("payoff entries must be finite"));
        }
        Ok(BimatrixGame { a, b })
    }

    pub fn from_rows(a: &[Vec<T>], b: &[Vec<T>]) -> Result<Self> {
        let a = Matrix::from_rows(a).ok_or_else(|| Error::input("ragged rows in A"))?;
        let b = Matrix::from_rows(b).ok_or_else(|| Error::input("ragged rows in B"))?;
        Self::new(a, b)
    }

    /// The symmetric game `(A, Aᵀ)`.
    pub fn symmetric(a: Matrix<T>) -> Result<Self> {
        let b = a.transpose();
        Self::new(a, b)
    }

    /// The constant-sum game `(A, J − A)`.
    pub fn constant_sum(a: Matrix<T>) -> Result<Self> {
        let b = a.map(|v| T::one() - v);
        Self::new(a, b)
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Matrix<T> {
        &self.b
    }

    pub fn is_normalized(&self) -> bool {
        let unit = |m: &Matrix<T>| m.iter().all(|&v| v >= T::zero() && v <= T::one());
        unit(&self.a) && unit(&self.b)
    }

    /// Maps each payoff matrix independently onto `[0, 1]` by its own min-max
    /// affine transform. A constant matrix becomes all zeros.
    pub fn normalize(&self) -> Result<(Self, NormalizationRecord<T>)> {
        if !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::input("payoff entries must be finite"));
        }
        let (ca, da) = min_max_affine(&self.a);
        let (cb, db) = min_max_affine(&self.b);
        let record = NormalizationRecord { c_a: ca, d_a: da, c_b: cb, d_b: db };
        let a = self.a.map(|v| (ca * v + da).max(T::zero()).min(T::one()));
        let b = self.b.map(|v| (cb * v + db).max(T::zero()).min(T::one()));
        Ok((BimatrixGame { a, b }, record))
    }

    /// `(cA + dJ, eB + fJ)`. Nash equilibria are invariant under this map.
    pub fn transform(&self, c: T, d: T, e: T, f: T) -> Result<Self> {
        if !(c > T::zero()) || !(e > T::zero()) {
            return Err(Error::input("transform requires c > 0 and e > 0"));
        }
        if !(d.is_finite() && f.is_finite()) {
            return Err(Error::input("transform offsets must be finite"));
        }
        Ok(BimatrixGame { a: self.a.map(|v| c * v + d), b: self.b.map(|v| e * v + f) })
    }

    pub fn check_profile(&self, profile: &StrategyProfile<T>) -> Result<()> {
        if profile.x.len() != self.m() || profile.y.len() != self.n() {
            return Err(Error::dim(format!(
                "profile has lengths ({}, {}) but the game is {}x{}",
                profile.x.len(),
                profile.y.len(),
                self.m(),
                self.n()
            )));
        }
        Ok(())
    }

    /// Payoffs `(xᵀAy, xᵀBy)`.
    pub fn payoffs(&self, profile: &StrategyProfile<T>) -> Result<(T, T)> {
        self.check_profile(profile)?;
        Ok((self.a.bilinear(&profile.x, &profile.y), self.b.bilinear(&profile.x, &profile.y)))
    }

    /// `xᵀ(A + B)y`.
    pub fn welfare(&self, profile: &StrategyProfile<T>) -> Result<T> {
        let (pa, pb) = self.payoffs(profile)?;
        Ok(pa + pb)
    }

    /// Pure best response of `player` to the opponent's mixed strategy.
    /// Ties go to the lowest index.
    pub fn best_response(&self, player: Player, opponent: &[T]) -> Result<(usize, T)> {
        let payoffs = match player {
            Player::A => {
                if opponent.len() != self.n() {
                    return Err(Error::dim("column strategy length differs from n"));
                }
                self.a.mul_vec(opponent)
            }
            Player::B => {
                if opponent.len() != self.m() {
                    return Err(Error::dim("row strategy length differs from m"));
                }
                self.b.vec_mul(opponent)
            }
        };
        Ok(argmax_first(&payoffs))
    }

    /// Additive regret of each player at `profile`.
    pub fn evaluate_epsilon(&self, profile: &StrategyProfile<T>) -> Result<EpsilonReport<T>> {
        let (pa, pb) = self.payoffs(profile)?;
        let (br_a, best_a) = self.best_response(Player::A, &profile.y)?;
        let (br_b, best_b) = self.best_response(Player::B, &profile.x)?;
        let eps_a = (best_a - pa).max(T::zero());
        let eps_b = (best_b - pb).max(T::zero());
        Ok(EpsilonReport { eps_a, eps_b, eps: eps_a.max(eps_b), best_response_a: br_a, best_response_b: br_b })
    }

    /// Most specific structural class. Works on raw or normalized payoffs.
    pub fn classify(&self) -> GameClass<T> {
        let zero_tol = T::tol(1e-9);
        let zero_sum = self.a.add(&self.b).max_abs() <= zero_tol;
        if zero_sum {
            return GameClass {
                kind: GameKind::ZeroSum,
                witness: Some(CompetitiveWitness { c: T::one(), d: T::zero(), e: T::one(), f: T::zero() }),
            };
        }
        if let Some(w) = self.fit_strictly_competitive() {
            return GameClass { kind: GameKind::StrictlyCompetitive, witness: Some(w) };
        }
        if self.m() == self.n() && self.b.max_abs_diff(&self.a.transpose()) <= zero_tol {
            return GameClass { kind: GameKind::Symmetric, witness: None };
        }
        GameClass { kind: GameKind::General, witness: None }
    }

    pub fn is_symmetric(&self) -> bool {
        self.m() == self.n() && self.b.max_abs_diff(&self.a.transpose()) <= T::tol(1e-9)
    }

    /// Least-squares fit of `A = −eB + gJ` (gauge `c = 1`, `d = 0`, `f = g`).
    fn fit_strictly_competitive(&self) -> Option<CompetitiveWitness<T>> {
        let count = T::from_usize_lossy(self.m() * self.n());
        let mean_a = self.a.sum() / count;
        let mean_b = self.b.sum() / count;
        let mut sbb = T::zero();
        let mut sab = T::zero();
        for (&a, &b) in self.a.iter().zip(self.b.iter()) {
            sbb = sbb + (b - mean_b) * (b - mean_b);
            sab = sab + (a - mean_a) * (b - mean_b);
        }
        // A constant B admits the fit only if A is constant too, and then
        // any e works; pick 1.
        let e = if sbb <= T::min_positive_value() { T::one() } else { -sab / sbb };
        if !(e > T::zero()) {
            return None;
        }
        let g = mean_a + e * mean_b;
        let witness = CompetitiveWitness { c: T::one(), d: T::zero(), e, f: g };
        (witness.residual(self) <= T::tol(1e-9)).then_some(witness)
    }
}

fn min_max_affine<T: Real>(m: &Matrix<T>) -> (T, T) {
    let lo = m.min_entry();
    let hi = m.max_entry();
    let range = hi - lo;
    if range > T::zero() {
        (T::one() / range, -lo / range)
    } else {
        (T::one(), -lo)
    }
}

fn argmax_first<T: Real>(values: &[T]) -> (usize, T) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Affine maps applied by [`BimatrixGame::normalize`]: `normalized = c·original + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord<T> {
    pub c_a: T,
    pub d_a: T,
    pub c_b: T,
    pub d_b: T,
}

impl<T: Real> NormalizationRecord<T> {
    pub fn identity() -> Self {
        NormalizationRecord { c_a: T::one(), d_a: T::zero(), c_b: T::one(), d_b: T::zero() }
    }

    /// Inverts the normalization.
    pub fn restore(&self, normalized: &BimatrixGame<T>) -> BimatrixGame<T> {
        BimatrixGame {
            a: normalized.a.map(|v| (v - self.d_a) / self.c_a),
            b: normalized.b.map(|v| (v - self.d_b) / self.c_b),
        }
    }

    /// Regrets in the original payoff units.
    pub fn unscale(&self, report: &EpsilonReport<T>) -> (T, T) {
        (report.eps_a / self.c_a, report.eps_b / self.c_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    A,
    B,
}

/// A pair of mixed strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile<T> {
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Real> StrategyProfile<T> {
    /// Validates both vectors as simplex points. Entries down to `−1e-9` are
    /// clamped to zero; anything more negative, or a sum off by more than
    /// `1e-9`, is rejected.
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        Ok(StrategyProfile { x: simplex(x, "x")?, y: simplex(y, "y")? })
    }

    /// Both players on pure strategies (0-based).
    pub fn pure(m: usize, n: usize, i: usize, j: usize) -> Result<Self> {
        if i >= m || j >= n {
            return Err(Error::input("pure strategy index out of range"));
        }
        Ok(StrategyProfile { x: unit_vector(m, i), y: unit_vector(n, j) })
    }

    pub fn uniform(m: usize, n: usize) -> Self {
        StrategyProfile {
            x: vec![T::one() / T::from_usize_lossy(m); m],
            y: vec![T::one() / T::from_usize_lossy(n); n],
        }
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    /// `(1 − t)·self + t·other`.
    pub fn mix(&self, other: &Self, t: T) -> Result<Self> {
        if self.x.len() != other.x.len() || self.y.len() != other.y.len() {
            return Err(Error::dim("profiles of different shapes"));
        }
        let s = T::one() - t;
        let lerp = |u: &[T], v: &[T]| u.iter().zip(v).map(|(&a, &b)| s * a + t * b).collect();
        Self::new(lerp(&self.x, &other.x), lerp(&self.y, &other.y))
    }

    /// `max(max_i |x_i − x'_i|, max_j |y_j − y'_j|)`; infinite on shape mismatch.
    pub fn distance(&self, other: &Self) -> T {
        if self.x.len() != other.x.len() || self.y.len() != other.y.len() {
            return T::infinity();
        }
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.y.iter().zip(&other.y))
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }
}

pub(crate) fn unit_vector<T: Real>(len: usize, i: usize) -> Vec<T> {
    let mut v = vec![T::zero(); len];
    v[i] = T::one();
    v
}

fn simplex<T: Real>(mut v: Vec<T>, name: &str) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::input(format!("{name} is empty")));
    }
    let tol = T::tol(1e-9);
    for e in v.iter_mut() {
        if !e.is_finite() || *e < -tol {
            return Err(Error::input(format!("{name} has an entry {e} below zero")));
        }
        *e = e.max(T::zero());
    }
    let total: T = v.iter().copied().sum();
    if (total - T::one()).abs() > tol * T::from_usize_lossy(v.len()).max(T::one()) {
        return Err(Error::input(format!("{name} sums to {total}, not 1")));
    }
    Ok(v)
}

/// Regret of each player at a profile, in the game's own payoff units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport<T> {
    pub eps_a: T,
    pub eps_b: T,
    pub eps: T,
    /// 0-based pure best response of the row player.
    pub best_response_a: usize,
    /// 0-based pure best response of the column player.
    pub best_response_b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    ZeroSum,
    StrictlyCompetitive,
    Symmetric,
    General,
}

/// Scalars with `cA + dJ = −eB + fJ`, `c, e > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetitiveWitness<T> {
    pub c: T,
    pub d: T,
    pub e: T,
    pub f: T,
}

impl<T: Real> CompetitiveWitness<T> {
    /// `max |cA + dJ + eB − fJ|`.
    pub fn residual(&self, game: &BimatrixGame<T>) -> T {
        game.a
            .iter()
            .zip(game.b.iter())
            .fold(T::zero(), |acc, (&a, &b)| acc.max((self.c * a + self.d + self.e * b - self.f).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameClass<T> {
    pub kind: GameKind,
    pub witness: Option<CompetitiveWitness<T>>,
}

impl<T> GameClass<T> {
    /// Zero-sum games are strictly competitive too.
    pub fn is_strictly_competitive(&self) -> bool {
        matches!(self.kind, GameKind::ZeroSum | GameKind::StrictlyCompetitive)
    }
}

/// An `m×n` game with i.i.d. uniform `[0,1)` payoffs, reproducible from `seed`.
/// A is drawn first, row-major, then B, from a ChaCha8 stream.
pub fn random_game<T: Real>(m: usize, n: usize, seed: u64) -> Result<BimatrixGame<T>> {
    if m == 0 || n == 0 {
        return Err(Error::input("game dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let below_one = T::one() - T::epsilon();
    let mut draw = |_, _| T::lit(rng.random::<f64>()).min(below_one);
    let a = Matrix::from_fn(m, n, &mut draw);
    let b = Matrix::from_fn(m, n, &mut draw);
    BimatrixGame::new(a, b)
}

/// A random `m×n` matrix with uniform `[0,1)` entries.
pub fn random_matrix<T: Real>(m: usize, n: usize, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let below_one = T::one() - T::epsilon();
    Matrix::from_fn(m, n, |_, _| T::lit(rng.random::<f64>()).min(below_one))
}

impl<T: Real> BimatrixGame<T> {
    /// Row player's expected payoff vector `Ay`.
    pub fn row_payoffs(&self, y: &[T]) -> Vec<T> {
        self.a.mul_vec(y)
    }

    /// Column player's expected payoff vector `xᵀB`.
    pub fn column_payoffs(&self, x: &[T]) -> Vec<T> {
        self.b.vec_mul(x)
    }
}
