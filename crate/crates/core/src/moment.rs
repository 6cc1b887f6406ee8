//! Moment-matrix relaxations of the Nash equilibrium problem.
//!
//! The matrix variable is
//!
//! ```text
//!        [ X   P   x ]
//!   M' = [ Z   Y   y ]      Z = Pᵀ,  size N = m + n + 1
//!        [ xᵀ  yᵀ  1 ]
//! ```
//!
//! Indices `0..m` address the row player's block, `m..m+n` the column
//! player's block, and `m+n` the homogenizing corner. `M` denotes the inner
//! `(m+n)`-square block.
//!
//! Linear functionals are written over the upper triangle: a term
//! `(i, j, c)` with `i ≤ j` contributes `c · M'[i][j]`. The symmetric
//! coefficient matrix of such a functional has `c/2` in both off-diagonal
//! slots, see [`Functional::coefficient_matrix`].

use serde::{Deserialize, Serialize};

use crate::backend::SolveStatus;
use crate::error::{Error, Result};
use crate::game::{BimatrixGame, StrategyProfile};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Real;

/// Subset of pure strategies (0-based) for each player.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StrategySet {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl StrategySet {
    pub fn new(mut rows: Vec<usize>, mut cols: Vec<usize>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        StrategySet { rows, cols }
    }

    pub fn rows(rows: Vec<usize>) -> Self {
        Self::new(rows, Vec::new())
    }

    pub fn cols(cols: Vec<usize>) -> Self {
        Self::new(Vec::new(), cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() && self.cols.is_empty()
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::input("strategy set is empty"));
        }
        if self.rows.iter().any(|&i| i >= m) || self.cols.iter().any(|&j| j >= n) {
            return Err(Error::input(format!("strategy set out of range for a {m}x{n} game")));
        }
        Ok(())
    }

    /// Probability mass a profile puts on the set.
    pub fn mass<T: Real>(&self, profile: &StrategyProfile<T>) -> T {
        let sx: T = self.rows.iter().map(|&i| profile.x()[i]).sum();
        let sy: T = self.cols.iter().map(|&j| profile.y()[j]).sum();
        sx + sy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Objective<T> {
    Zero,
    /// `Tr(M)`.
    Trace,
    /// `Σ w_i M_ii` over the inner block.
    WeightedDiagonal(Vec<T>),
    /// `Tr(M) − 2⟨v, z⟩` where `z = (x, y)` is the last column.
    TraceMinusLinear(Vec<T>),
    /// `Tr(AZ) + Tr(BZ)`, maximized.
    Welfare,
    /// `Σ_{i∈S_x} x_i + Σ_{j∈S_y} y_j`.
    Exclusion(StrategySet),
    /// `Tr(C M')` for a symmetric `N×N` matrix `C`.
    Quadratic(Matrix<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nonnegativity {
    /// Every entry of `M'`.
    Full,
    /// Only `x` and `y`.
    LastColumn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions<T> {
    pub relaxed_nash: bool,
    pub row: bool,
    pub correlated_eq: bool,
    pub distribution: bool,
    pub mccormick: bool,
    /// Identify `x = y` and `X = P = Y`. Needs a symmetric game.
    pub symmetric: bool,
    pub nonnegativity: Nonnegativity,
    pub objective: Objective<T>,
}

impl<T: Real> ModelOptions<T> {
    /// Relaxed Nash constraints and full nonnegativity.
    pub fn sdp1() -> Self {
        ModelOptions {
            relaxed_nash: true,
            row: false,
            correlated_eq: false,
            distribution: false,
            mccormick: false,
            symmetric: false,
            nonnegativity: Nonnegativity::Full,
            objective: Objective::Zero,
        }
    }

    /// SDP1 plus the row and correlated-equilibrium families.
    pub fn sdp2() -> Self {
        ModelOptions { row: true, correlated_eq: true, ..Self::sdp1() }
    }

    /// Lasserre level one: relaxed Nash, unity, nonnegative last column.
    pub fn sdp0() -> Self {
        ModelOptions { nonnegativity: Nonnegativity::LastColumn, ..Self::sdp1() }
    }

    pub fn with_objective(mut self, objective: Objective<T>) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_symmetric(mut self, on: bool) -> Self {
        self.symmetric = on;
        self
    }

    pub fn with_implied(mut self, distribution: bool, mccormick: bool) -> Self {
        self.distribution = distribution;
        self.mccormick = mccormick;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    RelaxedNashA,
    RelaxedNashB,
    Unity,
    Row,
    CorrelatedA,
    CorrelatedB,
    Distribution,
    McCormick,
    Corner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// Sparse linear functional over the upper triangle of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functional<T> {
    terms: Vec<(usize, usize, T)>,
}

impl<T: Real> Functional<T> {
    pub fn zero() -> Self {
        Functional { terms: Vec::new() }
    }

    /// Builds from raw terms, ordering each pair and merging duplicates.
    pub fn from_terms(raw: impl IntoIterator<Item = (usize, usize, T)>) -> Self {
        let mut terms: Vec<(usize, usize, T)> =
            raw.into_iter().map(|(i, j, c)| if i <= j { (i, j, c) } else { (j, i, c) }).collect();
        terms.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, T)> = Vec::with_capacity(terms.len());
        for (i, j, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 = last.2 + c,
                _ => merged.push((i, j, c)),
            }
        }
        merged.retain(|t| t.2 != T::zero());
        Functional { terms: merged }
    }

    pub fn terms(&self) -> &[(usize, usize, T)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, m: &Matrix<T>) -> T {
        self.terms.iter().map(|&(i, j, c)| c * m[(i, j)]).sum()
    }

    pub fn scaled(&self, s: T) -> Self {
        Functional { terms: self.terms.iter().map(|&(i, j, c)| (i, j, c * s)).collect() }
    }

    /// Symmetric `S` with `Tr(S M) = self.eval(M)` for symmetric `M`.
    pub fn coefficient_matrix(&self, dim: usize) -> Matrix<T> {
        let half = T::lit(0.5);
        let mut s = Matrix::zeros(dim, dim);
        for &(i, j, c) in &self.terms {
            if i == j {
                s[(i, i)] = s[(i, i)] + c;
            } else {
                s[(i, j)] = s[(i, j)] + c * half;
                s[(j, i)] = s[(j, i)] + c * half;
            }
        }
        s
    }

    fn remap(&self, f: impl Fn(usize) -> usize) -> Self {
        Self::from_terms(self.terms.iter().map(|&(i, j, c)| (f(i), f(j), c)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint<T> {
    pub family: Family,
    pub functional: Functional<T>,
    pub sense: Sense,
    pub rhs: T,
}

impl<T: Real> Constraint<T> {
    /// Amount by which `m` violates the constraint (0 when satisfied).
    pub fn violation(&self, m: &Matrix<T>) -> T {
        let lhs = self.functional.eval(m);
        match self.sense {
            Sense::Eq => (lhs - self.rhs).abs(),
            Sense::Ge => (self.rhs - lhs).max(T::zero()),
        }
    }
}

/// How the solver's matrix variable relates to `M'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lift {
    /// The variable is `M'` itself.
    Full,
    /// The variable is `W = [[X, x], [xᵀ, 1]]` of size `m+1`, and
    /// `M'[i][j] = W[f(i)][f(j)]` with `f` folding the `y` block onto `x`.
    Symmetric,
}

/// A linear problem over one PSD matrix variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem<T> {
    pub m: usize,
    pub n: usize,
    pub lift: Lift,
    /// Objective in its natural sense; see `direction`.
    pub objective: Functional<T>,
    pub direction: Direction,
    pub constraints: Vec<Constraint<T>>,
    /// Upper-triangle entries of the variable constrained to be ≥ 0.
    pub nonnegative: Vec<(usize, usize)>,
}

impl<T: Real> ConicProblem<T> {
    /// Side length `N = m + n + 1` of `M'`.
    pub fn moment_dim(&self) -> usize {
        self.m + self.n + 1
    }

    /// Side length of the solver's matrix variable.
    pub fn var_dim(&self) -> usize {
        match self.lift {
            Lift::Full => self.moment_dim(),
            Lift::Symmetric => self.m + 1,
        }
    }

    pub fn count(&self, family: Family) -> usize {
        self.constraints.iter().filter(|c| c.family == family).count()
    }

    /// Expands a solver variable into `M'` and, when the row equalities are
    /// present, removes their residual along `u = (1_m, −1_n)`.
    pub fn recover_moment(&self, w: &Matrix<T>) -> Matrix<T> {
        let full = self.expand(w);
        if self.count(Family::Row) > 0 {
            project_row_identity(&full, self.m, self.n)
        } else {
            full
        }
    }

    /// Expands a solver variable into `M'`.
    pub fn expand(&self, w: &Matrix<T>) -> Matrix<T> {
        match self.lift {
            Lift::Full => w.clone(),
            Lift::Symmetric => {
                let f = fold(self.m);
                Matrix::from_fn(self.moment_dim(), self.moment_dim(), |i, j| w[(f(i), f(j))])
            }
        }
    }

    /// Projects `M'` onto the solver variable by reading a canonical preimage
    /// of each entry.
    pub fn compress(&self, full: &Matrix<T>) -> Matrix<T> {
        match self.lift {
            Lift::Full => full.clone(),
            Lift::Symmetric => {
                let m = self.m;
                let g = |a: usize| if a < m { a } else { self.moment_dim() - 1 };
                Matrix::from_fn(m + 1, m + 1, |a, b| full[(g(a), g(b))])
            }
        }
    }
}

fn fold(m: usize) -> impl Fn(usize) -> usize {
    move |i| if i < m { i } else if i < 2 * m { i - m } else { m }
}

/// Assembles the relaxation selected by `options` for `game`.
///
/// Any finite game is accepted; the relaxations are meant for games
/// normalized to `[0, 1]` but nothing here depends on it.
pub fn build<T: Real>(game: &BimatrixGame<T>, options: &ModelOptions<T>) -> Result<ConicProblem<T>> {
    let (m, n) = (game.m(), game.n());
    let big = m + n + 1;
    let last = big - 1;
    let (a, b) = (game.a(), game.b());
    if options.symmetric && !game.is_symmetric() {
        return Err(Error::Options("the symmetric model needs m = n and B = Aᵀ".into()));
    }

    let xi = |i: usize| (i, last);
    let yj = |j: usize| (m + j, last);
    let pij = |i: usize, j: usize| (i, m + j);
    let mut out: Vec<Constraint<T>> = Vec::new();
    let mut push = |family, terms: Vec<(usize, usize, T)>, sense, rhs| {
        out.push(Constraint { family, functional: Functional::from_terms(terms), sense, rhs });
    };
    let one = T::one();

    if options.relaxed_nash {
        for i in 0..m {
            let mut t = Vec::with_capacity(m * n + n);
            for k in 0..m {
                for l in 0..n {
                    let (r, c) = pij(k, l);
                    t.push((r, c, a[(k, l)]));
                }
            }
            for l in 0..n {
                let (r, c) = yj(l);
                t.push((r, c, -a[(i, l)]));
            }
            push(Family::RelaxedNashA, t, Sense::Ge, T::zero());
        }
        for j in 0..n {
            let mut t = Vec::with_capacity(m * n + m);
            for k in 0..m {
                for l in 0..n {
                    let (r, c) = pij(k, l);
                    t.push((r, c, b[(k, l)]));
                }
            }
            for k in 0..m {
                let (r, c) = xi(k);
                t.push((r, c, -b[(k, j)]));
            }
            push(Family::RelaxedNashB, t, Sense::Ge, T::zero());
        }
    }

    push(Family::Unity, (0..m).map(|i| (i, last, one)).collect(), Sense::Eq, one);
    push(Family::Unity, (0..n).map(|j| (m + j, last, one)).collect(), Sense::Eq, one);

    if options.row {
        for i in 0..m {
            let mut t: Vec<_> = (0..m).map(|j| (i, j, one)).collect();
            t.push((i, last, -one));
            push(Family::Row, t, Sense::Eq, T::zero());
            let mut t: Vec<_> = (0..n).map(|j| (i, m + j, one)).collect();
            t.push((i, last, -one));
            push(Family::Row, t, Sense::Eq, T::zero());
        }
        for j in 0..n {
            let mut t: Vec<_> = (0..n).map(|k| (m + j, m + k, one)).collect();
            t.push((m + j, last, -one));
            push(Family::Row, t, Sense::Eq, T::zero());
            let mut t: Vec<_> = (0..m).map(|i| (i, m + j, one)).collect();
            t.push((m + j, last, -one));
            push(Family::Row, t, Sense::Eq, T::zero());
        }
    }

    if options.correlated_eq {
        for i in 0..m {
            for k in (0..m).filter(|&k| k != i) {
                let t = (0..n).map(|j| (i, m + j, a[(i, j)] - a[(k, j)])).collect();
                push(Family::CorrelatedA, t, Sense::Ge, T::zero());
            }
        }
        for j in 0..n {
            for l in (0..n).filter(|&l| l != j) {
                let t = (0..m).map(|i| (i, m + j, b[(i, j)] - b[(i, l)])).collect();
                push(Family::CorrelatedB, t, Sense::Ge, T::zero());
            }
        }
    }

    if options.distribution {
        let block = |lo: usize, hi: usize| {
            let mut t = Vec::new();
            for i in lo..hi {
                for j in lo..hi {
                    t.push((i, j, one));
                }
            }
            t
        };
        push(Family::Distribution, block(0, m), Sense::Eq, one);
        let t = (0..m).flat_map(|i| (0..n).map(move |j| (i, m + j, one))).collect();
        push(Family::Distribution, t, Sense::Eq, one);
        push(Family::Distribution, block(m, m + n), Sense::Eq, one);
    }

    if options.mccormick {
        let inner = m + n;
        for i in 0..inner {
            for j in 0..inner {
                push(Family::McCormick, vec![(i, last, one), (i, j, -one)], Sense::Ge, T::zero());
                push(
                    Family::McCormick,
                    vec![(i, j, one), (i, last, -one), (j, last, -one)],
                    Sense::Ge,
                    -one,
                );
            }
        }
    }

    push(Family::Corner, vec![(last, last, one)], Sense::Eq, one);

    let nonnegative: Vec<(usize, usize)> = match options.nonnegativity {
        Nonnegativity::Full => (0..big).flat_map(|i| (i..big).map(move |j| (i, j))).collect(),
        Nonnegativity::LastColumn => (0..last).map(|i| (i, last)).collect(),
    };

    let (objective, direction) = objective_functional(game, &options.objective)?;

    let problem = ConicProblem { m, n, lift: Lift::Full, objective, direction, constraints: out, nonnegative };
    Ok(if options.symmetric { fold_symmetric(problem) } else { problem })
}

fn objective_functional<T: Real>(
    game: &BimatrixGame<T>,
    objective: &Objective<T>,
) -> Result<(Functional<T>, Direction)> {
    let (m, n) = (game.m(), game.n());
    let inner = m + n;
    let last = inner;
    let two = T::lit(2.0);
    let f = match objective {
        Objective::Zero => Functional::zero(),
        Objective::Trace => Functional::from_terms((0..inner).map(|i| (i, i, T::one()))),
        Objective::WeightedDiagonal(w) => {
            if w.len() != inner {
                return Err(Error::Options(format!("weights have length {}, expected {inner}", w.len())));
            }
            if w.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
                return Err(Error::Options("diagonal weights must be positive and finite".into()));
            }
            Functional::from_terms(w.iter().enumerate().map(|(i, &v)| (i, i, v)))
        }
        Objective::TraceMinusLinear(v) => {
            if v.len() != inner {
                return Err(Error::Options(format!(
                    "linearization point has length {}, expected {inner}",
                    v.len()
                )));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::Options("linearization point must be finite".into()));
            }
            let diag = (0..inner).map(|i| (i, i, T::one()));
            let lin = v.iter().enumerate().map(|(i, &vi)| (i, last, -two * vi));
            Functional::from_terms(diag.chain(lin))
        }
        Objective::Welfare => {
            let (a, b) = (game.a(), game.b());
            let t = (0..m).flat_map(|i| (0..n).map(move |j| (i, m + j, a[(i, j)] + b[(i, j)])));
            return Ok((Functional::from_terms(t), Direction::Maximize));
        }
        Objective::Exclusion(set) => {
            set.validate(m, n)?;
            let rows = set.rows.iter().map(|&i| (i, last, T::one()));
            let cols = set.cols.iter().map(|&j| (m + j, last, T::one()));
            Functional::from_terms(rows.chain(cols))
        }
        Objective::Quadratic(c) => {
            let big = inner + 1;
            if c.rows() != big || c.cols() != big {
                return Err(Error::Options(format!("objective matrix must be {big}x{big}")));
            }
            if !c.is_finite() || c.asymmetry() > T::tol(1e-9) {
                return Err(Error::Options("objective matrix must be finite and symmetric".into()));
            }
            let c = c.symmetrized();
            let t = (0..big).flat_map(|i| {
                let c = &c;
                (i..big).map(move |j| (i, j, if i == j { c[(i, i)] } else { two * c[(i, j)] }))
            });
            Functional::from_terms(t.collect::<Vec<_>>())
        }
    };
    Ok((f, Direction::Minimize))
}

/// Rewrites a full problem over the folded variable `W` and drops rows that
/// became duplicates or trivially true.
fn fold_symmetric<T: Real>(p: ConicProblem<T>) -> ConicProblem<T> {
    let f = fold(p.m);
    let mut constraints: Vec<Constraint<T>> = Vec::new();
    for c in p.constraints {
        let functional = c.functional.remap(&f);
        if functional.is_zero() {
            // 0 = rhs or 0 ≥ rhs; keep only if it carries information.
            let trivial = match c.sense {
                Sense::Eq => c.rhs == T::zero(),
                Sense::Ge => c.rhs <= T::zero(),
            };
            if trivial {
                continue;
            }
        }
        let folded = Constraint { family: c.family, functional, sense: c.sense, rhs: c.rhs };
        if !constraints.iter().any(|k| k.sense == folded.sense && k.rhs == folded.rhs && k.functional == folded.functional) {
            constraints.push(folded);
        }
    }
    let mut nonnegative: Vec<(usize, usize)> = p
        .nonnegative
        .iter()
        .map(|&(i, j)| {
            let (a, b) = (f(i), f(j));
            (a.min(b), a.max(b))
        })
        .collect();
    nonnegative.sort_unstable();
    nonnegative.dedup();
    ConicProblem {
        m: p.m,
        n: p.n,
        lift: Lift::Symmetric,
        objective: p.objective.remap(&f),
        direction: p.direction,
        constraints,
        nonnegative,
    }
}

/// A moment matrix `M'` with block views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSolution<T> {
    m: usize,
    n: usize,
    matrix: Matrix<T>,
    /// `None` for matrices built directly rather than returned by a solver.
    pub status: Option<SolveStatus>,
    /// Objective value in the problem's natural sense.
    pub objective: T,
}

impl<T: Real> MomentSolution<T> {
    pub fn new(m: usize, n: usize, matrix: Matrix<T>) -> Result<Self> {
        let big = m + n + 1;
        if matrix.rows() != big || matrix.cols() != big {
            return Err(Error::dim(format!(
                "moment matrix is {}x{}, expected {big}x{big}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if matrix.asymmetry() > T::tol(1e-9) {
            return Err(Error::input("moment matrix is not symmetric"));
        }
        Ok(MomentSolution { m, n, matrix: matrix.symmetrized(), status: None, objective: T::zero() })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The full `M'`.
    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    /// The inner `(m+n)`-square block `M`.
    pub fn inner(&self) -> Matrix<T> {
        let k = self.m + self.n;
        self.matrix.submatrix(0..k, 0..k)
    }

    pub fn x_block(&self) -> Matrix<T> {
        self.matrix.submatrix(0..self.m, 0..self.m)
    }

    pub fn p_block(&self) -> Matrix<T> {
        self.matrix.submatrix(0..self.m, self.m..self.m + self.n)
    }

    pub fn z_block(&self) -> Matrix<T> {
        self.matrix.submatrix(self.m..self.m + self.n, 0..self.m)
    }

    pub fn y_block(&self) -> Matrix<T> {
        let k = self.m + self.n;
        self.matrix.submatrix(self.m..k, self.m..k)
    }

    pub fn x(&self) -> Vec<T> {
        let last = self.m + self.n;
        (0..self.m).map(|i| self.matrix[(i, last)]).collect()
    }

    pub fn y(&self) -> Vec<T> {
        let last = self.m + self.n;
        (0..self.n).map(|j| self.matrix[(self.m + j, last)]).collect()
    }

    /// The last column without the corner, `z = (x, y)`.
    pub fn z(&self) -> Vec<T> {
        let last = self.m + self.n;
        (0..last).map(|i| self.matrix[(i, last)]).collect()
    }

    pub fn corner(&self) -> T {
        let last = self.m + self.n;
        self.matrix[(last, last)]
    }

    /// Diagonal of the inner block.
    pub fn inner_diagonal(&self) -> Vec<T> {
        (0..self.m + self.n).map(|i| self.matrix[(i, i)]).collect()
    }

    pub fn inner_trace(&self) -> T {
        self.inner_diagonal().into_iter().sum()
    }
}

/// The rank-one moment matrix `[x; y; 1][x; y; 1]ᵀ`.
pub fn rank1_embed<T: Real>(profile: &StrategyProfile<T>) -> MomentSolution<T> {
    let (m, n) = (profile.x().len(), profile.y().len());
    let mut v: Vec<T> = profile.x().iter().chain(profile.y()).copied().collect();
    v.push(T::one());
    MomentSolution { m, n, matrix: Matrix::outer(&v, &v), status: None, objective: T::zero() }
}

/// Congruence by `diag(Q, 1)` with `Q = I − uuᵀ/(m+n)`, `u = (1_m, −1_n)`.
///
/// The row equalities force `Mu = 0` on the inner block, so every
/// eigenvector with `λ > 0` has equal coordinate sums on its two halves. A
/// solver meets them only to its tolerance, and that error is divided by λ
/// in the sums. Projecting keeps the matrix PSD and moves entries by the
/// size of the residual.
pub fn project_row_identity<T: Real>(matrix: &Matrix<T>, m: usize, n: usize) -> Matrix<T> {
    let k = m + n;
    let kt = T::from_usize_lossy(k);
    let u = |i: usize| if i < m { T::one() } else { -T::one() };
    // r = M'·(u, 0): the inner residual and, in its last entry, uᵀz.
    let r: Vec<T> = (0..=k).map(|i| (0..k).map(|j| matrix[(i, j)] * u(j)).sum()).collect();
    let uru: T = (0..k).map(|i| u(i) * r[i]).sum::<T>() / (kt * kt);
    let ui = |i: usize| if i < k { u(i) } else { T::zero() };
    Matrix::from_fn(k + 1, k + 1, |i, j| matrix[(i, j)] - (r[i] * ui(j) + ui(i) * r[j]) / kt + ui(i) * ui(j) * uru)
        .symmetrized()
}

/// `Σ σ_k · rank1_embed(p_k)`, for weights summing to one.
pub fn mixture_embed<T: Real>(parts: &[(T, &StrategyProfile<T>)]) -> Result<MomentSolution<T>> {
    let first = parts.first().ok_or_else(|| Error::input("empty mixture"))?;
    let (m, n) = (first.1.x().len(), first.1.y().len());
    let mut acc = Matrix::zeros(m + n + 1, m + n + 1);
    for (w, p) in parts {
        if p.x().len() != m || p.y().len() != n {
            return Err(Error::dim("mixture components differ in shape"));
        }
        acc = acc.add(&rank1_embed(p).matrix.scale(*w));
    }
    MomentSolution::new(m, n, acc)
}

/// Worst violation of each constraint family, plus the PSD margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport<T> {
    pub relaxed_nash: T,
    pub unity: T,
    pub row: T,
    pub correlated: T,
    pub distribution: T,
    pub mccormick: T,
    pub corner: T,
    pub nonnegativity: T,
    /// Departure of `M'` from the identified structure of a symmetric model.
    pub structure: T,
    pub min_eigenvalue: T,
}

impl<T: Real> ResidualReport<T> {
    /// Largest linear violation (everything except the eigenvalue).
    pub fn max_violation(&self) -> T {
        [
            self.relaxed_nash,
            self.unity,
            self.row,
            self.correlated,
            self.distribution,
            self.mccormick,
            self.corner,
            self.nonnegativity,
            self.structure,
        ]
        .into_iter()
        .fold(T::zero(), T::max)
    }

    pub fn is_feasible(&self, tau: T) -> bool {
        self.max_violation() <= tau && self.min_eigenvalue >= -tau
    }
}

/// Evaluates every constraint of `problem` at `solution`.
pub fn residuals<T: Real>(problem: &ConicProblem<T>, solution: &MomentSolution<T>) -> Result<ResidualReport<T>> {
    if solution.m != problem.m || solution.n != problem.n {
        return Err(Error::dim("solution and problem have different game sizes"));
    }
    let full = &solution.matrix;
    let w = problem.compress(full);
    let structure = problem.expand(&w).max_abs_diff(full);
    let zero = T::zero();
    let mut report = ResidualReport {
        relaxed_nash: zero,
        unity: zero,
        row: zero,
        correlated: zero,
        distribution: zero,
        mccormick: zero,
        corner: zero,
        nonnegativity: zero,
        structure,
        min_eigenvalue: zero,
    };
    for c in &problem.constraints {
        let v = c.violation(&w);
        let slot = match c.family {
            Family::RelaxedNashA | Family::RelaxedNashB => &mut report.relaxed_nash,
            Family::Unity => &mut report.unity,
            Family::Row => &mut report.row,
            Family::CorrelatedA | Family::CorrelatedB => &mut report.correlated,
            Family::Distribution => &mut report.distribution,
            Family::McCormick => &mut report.mccormick,
            Family::Corner => &mut report.corner,
        };
        *slot = slot.max(v);
    }
    report.nonnegativity = problem.nonnegative.iter().fold(zero, |acc, &(i, j)| acc.max(-w[(i, j)]));
    let (values, _) = symmetric_eigen(full);
    report.min_eigenvalue = values.last().copied().unwrap_or(zero);
    Ok(report)
}
