//! Eigenstructure of moment matrices.
//!
//! Every eigenvector `v_i` of the inner block `M` is split as `(a_i, b_i)`
//! along the two players, and `s_i = Σ a_i` is its partition sum. On
//! feasible points of the strengthened relaxation `Σ a_i = Σ b_i`,
//! `Σ λ_i s_i² = 1`, and the profile and the product gap `P − xyᵀ` can be
//! rebuilt from the eigenpairs alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Real;

/// Default numerical-rank cutoff, relative to `max(λ₁, 1)`.
pub const RANK_TOL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    /// Length of the first part of every eigenvector.
    pub split: usize,
    /// All eigenvalues, descending, negatives clipped to 0.
    pub eigenvalues: Vec<T>,
    /// Unit eigenvectors matching `eigenvalues`, signed so that `s_i ≥ 0`.
    pub vectors: Vec<Vec<T>>,
    /// `s_i = Σ a_i`.
    pub sums: Vec<T>,
    /// Count of eigenvalues above `rank_tol · max(λ₁, 1)`.
    pub rank: usize,
    pub rank_tol: T,
    matrix: Matrix<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn a(&self, i: usize) -> &[T] {
        &self.vectors[i][..self.split]
    }

    pub fn b(&self, i: usize) -> &[T] {
        &self.vectors[i][self.split..]
    }

    pub fn sum_b(&self, i: usize) -> T {
        self.b(i).iter().copied().sum()
    }

    /// The matrix that was decomposed.
    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn lambda(&self, i: usize) -> T {
        self.eigenvalues.get(i).copied().unwrap_or(T::zero())
    }

    /// `λ₂ / λ₁`, zero for a zero matrix.
    pub fn ratio(&self) -> T {
        let l1 = self.lambda(0);
        if l1 > T::zero() {
            self.lambda(1) / l1
        } else {
            T::zero()
        }
    }

    /// `Σ_{i≥2} λ_i`.
    pub fn tail_sum(&self) -> T {
        self.eigenvalues.iter().skip(1).copied().sum()
    }

    /// `Σ λ_i s_i²`.
    pub fn weighted_sum_squares(&self) -> T {
        self.eigenvalues.iter().zip(&self.sums).map(|(&l, &s)| l * s * s).sum()
    }

    /// Largest `|Σ a_i − Σ b_i|` over the eigenvectors counted in the
    /// numerical rank. Below the cutoff the eigenvectors are noise and their
    /// sums carry no information.
    pub fn partition_defect(&self) -> T {
        (0..self.rank)
            .map(|i| (self.sums[i] - self.sum_b(i)).abs())
            .fold(T::zero(), T::max)
    }

    /// Eigenvector orthonormality defect `max |VᵀV − I|`.
    pub fn orthonormality_defect(&self) -> T {
        let k = self.vectors.len();
        let mut worst = T::zero();
        for i in 0..k {
            for j in i..k {
                let d: T = self.vectors[i].iter().zip(&self.vectors[j]).map(|(&p, &q)| p * q).sum();
                let want = if i == j { T::one() } else { T::zero() };
                worst = worst.max((d - want).abs());
            }
        }
        worst
    }
}

/// Eigendecomposition with the default rank cutoff.
pub fn eigendecompose<T: Real>(matrix: &Matrix<T>, split: usize) -> Result<Spectrum<T>> {
    eigendecompose_with(matrix, split, T::lit(RANK_TOL))
}

pub fn eigendecompose_with<T: Real>(matrix: &Matrix<T>, split: usize, rank_tol: T) -> Result<Spectrum<T>> {
    if !matrix.is_square() || split > matrix.rows() {
        return Err(Error::dim("eigendecompose needs a square matrix and split ≤ size"));
    }
    if !matrix.is_finite() {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    if matrix.asymmetry() > T::tol(SYMMETRY_TOL) {
        return Err(Error::Precondition("matrix is not symmetric".into()));
    }
    let (mut values, vecs) = symmetric_eigen(matrix);
    if let Some(&min) = values.last() {
        if min < -T::tol(PSD_TOL) {
            return Err(Error::Precondition(format!("matrix is indefinite: eigenvalue {min}")));
        }
    }
    for v in values.iter_mut() {
        *v = v.max(T::zero());
    }
    let cutoff = rank_tol * values.first().copied().unwrap_or(T::zero()).max(T::one());
    let rank = values.iter().filter(|&&v| v > cutoff).count();
    let vanish = T::tol(1e-12);
    let mut vectors = Vec::with_capacity(values.len());
    let mut sums = Vec::with_capacity(values.len());
    for c in 0..values.len() {
        let mut v = vecs.column(c);
        let mut s: T = v[..split].iter().copied().sum();
        let flip = if s.abs() > vanish {
            s < T::zero()
        } else {
            // No preferred sign; make the largest component positive.
            let k = (0..v.len()).fold(0, |best, k| if v[k].abs() > v[best].abs() { k } else { best });
            v[k] < T::zero()
        };
        if flip {
            v.iter_mut().for_each(|e| *e = -*e);
            s = -s;
        }
        vectors.push(v);
        sums.push(s);
    }
    Ok(Spectrum { split, eigenvalues: values, vectors, sums, rank, rank_tol, matrix: matrix.clone() })
}

/// Reconstructions from the eigenpairs, and the product gap both ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionIdentities<T> {
    /// `Σ λ_i s_i a_i`.
    pub x: Vec<T>,
    /// `Σ λ_i s_i b_i`.
    pub y: Vec<T>,
    /// `P − xyᵀ` from the matrix and the reconstructed `x`, `y`.
    pub gap_direct: Matrix<T>,
    /// `Σ_{i<j} λ_iλ_j (s_j a_i − s_i a_j)(s_j b_i − s_i b_j)ᵀ`.
    pub gap_double_sum: Matrix<T>,
}

impl<T: Real> PartitionIdentities<T> {
    pub fn gap_disagreement(&self) -> T {
        self.gap_direct.max_abs_diff(&self.gap_double_sum)
    }
}

pub fn partition_identities<T: Real>(spectrum: &Spectrum<T>) -> PartitionIdentities<T> {
    let m = spectrum.split;
    let n = spectrum.matrix.rows() - m;
    let k = spectrum.eigenvalues.len();
    let mut x = vec![T::zero(); m];
    let mut y = vec![T::zero(); n];
    for i in 0..k {
        let w = spectrum.eigenvalues[i] * spectrum.sums[i];
        for (xe, &ae) in x.iter_mut().zip(spectrum.a(i)) {
            *xe = *xe + w * ae;
        }
        for (ye, &be) in y.iter_mut().zip(spectrum.b(i)) {
            *ye = *ye + w * be;
        }
    }
    let p = spectrum.matrix.submatrix(0..m, m..m + n);
    let gap_direct = p.sub(&Matrix::outer(&x, &y));

    let mut gap = Matrix::zeros(m, n);
    let active: Vec<usize> = (0..k).filter(|&i| spectrum.eigenvalues[i] > T::zero()).collect();
    for (pos, &i) in active.iter().enumerate() {
        for &j in &active[pos + 1..] {
            let (si, sj) = (spectrum.sums[i], spectrum.sums[j]);
            let w = spectrum.eigenvalues[i] * spectrum.eigenvalues[j];
            let u: Vec<T> = spectrum.a(i).iter().zip(spectrum.a(j)).map(|(&ai, &aj)| sj * ai - si * aj).collect();
            let v: Vec<T> = spectrum.b(i).iter().zip(spectrum.b(j)).map(|(&bi, &bj)| sj * bi - si * bj).collect();
            for r in 0..m {
                for c in 0..n {
                    gap[(r, c)] = gap[(r, c)] + w * u[r] * v[c];
                }
            }
        }
    }
    PartitionIdentities { x, y, gap_direct, gap_double_sum: gap }
}

/// `M = σ₁ [a;b][a;b]ᵀ + σ₂ [c;d][c;d]ᵀ` with simplex vectors `a, b, c, d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpFactorization<T> {
    pub sigma1: T,
    pub sigma2: T,
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub d: Vec<T>,
    /// `max |reproduction − M|`.
    pub residual: T,
    /// The clamping fallback was needed.
    pub clamped: bool,
}

impl<T: Real> CpFactorization<T> {
    pub fn reproduce(&self) -> Matrix<T> {
        let ab: Vec<T> = self.a.iter().chain(&self.b).copied().collect();
        let cd: Vec<T> = self.c.iter().chain(&self.d).copied().collect();
        Matrix::outer(&ab, &ab).scale(self.sigma1).add(&Matrix::outer(&cd, &cd).scale(self.sigma2))
    }
}

const CP_RESIDUAL_TOL: f64 = 1e-6;

/// Nonnegative rank-2 factorization of the inner block `M` (size `m + n`).
///
/// `M = VVᵀ` with `V` of width 2 is unique up to a rotation. Each row of `V`
/// is nonnegative after rotating by `θ` iff `θ` lies in an arc, and the arc
/// midpoint of the common intersection is used. If rounding leaves the
/// intersection empty, negative entries are clamped and the result accepted
/// when it still reproduces `M` within `1e-6`.
pub fn cp_rank2_factorize<T: Real>(matrix: &Matrix<T>, m: usize) -> Result<CpFactorization<T>> {
    let spec = eigendecompose(matrix, m)?;
    if spec.rank != 2 {
        return Err(Error::Precondition(format!("CP factorization needs rank 2, got rank {}", spec.rank)));
    }
    if matrix.min_entry() < -T::tol(1e-9) {
        return Err(Error::Precondition("matrix has negative entries".into()));
    }
    let size = matrix.rows();
    let l1 = spec.eigenvalues[0].sqrt();
    let l2 = spec.eigenvalues[1].sqrt();
    let rows: Vec<(T, T)> = (0..size).map(|k| (l1 * spec.vectors[0][k], l2 * spec.vectors[1][k])).collect();

    let scale = rows.iter().fold(T::zero(), |acc, &(p, q)| acc.max((p * p + q * q).sqrt()));
    let tiny = scale * T::tol(1e-9);
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    // The Perron vector is nonnegative, so row angles sit in [−π/2, π/2].
    for &(p, q) in &rows {
        if (p * p + q * q).sqrt() <= tiny {
            continue;
        }
        let phi = q.atan2(p.max(T::zero()));
        lo = lo.min(phi);
        hi = hi.max(phi);
    }
    let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
    let theta = if lo.is_finite() { ((-lo) + (half_pi - hi)) * T::lit(0.5) } else { T::zero() };
    let (ct, st) = (theta.cos(), theta.sin());
    let mut clamped = false;
    let mut u1 = Vec::with_capacity(size);
    let mut u2 = Vec::with_capacity(size);
    for &(p, q) in &rows {
        // Rotating the row's angle by +θ.
        let r1 = ct * p - st * q;
        let r2 = st * p + ct * q;
        if r1 < T::zero() || r2 < T::zero() {
            clamped = true;
        }
        u1.push(r1.max(T::zero()));
        u2.push(r2.max(T::zero()));
    }

    let (a, b, sigma1) = split_factor(&u1, m)?;
    let (c, d, sigma2) = split_factor(&u2, m)?;
    let mut f = CpFactorization { sigma1, sigma2, a, b, c, d, residual: T::zero(), clamped };
    f.residual = f.reproduce().max_abs_diff(matrix);
    if f.residual > T::tol(CP_RESIDUAL_TOL) {
        return Err(Error::Numerical(format!("CP factorization residual {} exceeds 1e-6", f.residual)));
    }
    Ok(f)
}

/// Splits a nonnegative factor column `(α, β)` into simplex vectors and the
/// weight `σ = Σα · Σβ`.
fn split_factor<T: Real>(u: &[T], m: usize) -> Result<(Vec<T>, Vec<T>, T)> {
    let sa: T = u[..m].iter().copied().sum();
    let sb: T = u[m..].iter().copied().sum();
    if !(sa > T::zero()) || !(sb > T::zero()) {
        return Err(Error::Numerical("CP factor has an empty half".into()));
    }
    let a = u[..m].iter().map(|&v| v / sa).collect();
    let b = u[m..].iter().map(|&v| v / sb).collect();
    Ok((a, b, sa * sb))
}
