//! Symmetric quadratic forms: signatures, dual forms and restrictions to
//! hyperplanes, together with the law predicting the restricted signature from
//! the sign of the dual form on the defining covector.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::certificate::Certificate;

use crate::error::{Error, Result};
use crate::linalg::{householder_complement, symmetric_eigen, Matrix};
use crate::scalar::{norm, Real};

/// Relative eigenvalue threshold used for signatures and degeneracy tests.
pub const TOL_DEGENERATE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub plus: usize,
    pub minus: usize,
    pub zero: usize,
}

impl Signature {
    pub const fn new(plus: usize, minus: usize, zero: usize) -> Self {
        Self { plus, minus, zero }
    }

    pub fn dim(&self) -> usize {
        self.plus + self.minus + self.zero
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.zero == 0
    }

    /// Equality up to swapping the positive and negative counts, i.e. up to the
    /// choice of orientation of a hypersurface normal.
    pub fn matches_unordered(&self, other: &Signature) -> bool {
        self == other || (self.plus == other.minus && self.minus == other.plus && self.zero == other.zero)
    }

    pub fn flipped(&self) -> Self {
        Self::new(self.minus, self.plus, self.zero)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.plus, self.minus, self.zero)
    }
}

/// Counts eigenvalues above, below and inside `[-tol, tol]` where
/// `tol = rel_tol * max|λ|`.
pub fn signature_of_eigenvalues<T: Real>(values: &[T], rel_tol: T) -> Signature {
    let scale = values.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let tol = rel_tol * scale;
    let mut sig = Signature::default();
    for &v in values {
        if scale == T::zero() || v.abs() <= tol {
            sig.zero += 1;
        } else if v > T::zero() {
            sig.plus += 1;
        } else {
            sig.minus += 1;
        }
    }
    sig
}

pub fn signature_of_matrix<T: Real>(m: &Matrix<T>) -> Signature {
    let eig = symmetric_eigen(m);
    signature_of_eigenvalues(&eig.values, T::rel_tol(TOL_DEGENERATE))
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm<T> {
    matrix: Matrix<T>,
}

impl<T: Real> QuadraticForm<T> {
    /// Symmetrizes the given square matrix.
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        if matrix.rows() != matrix.cols() || matrix.rows() == 0 {
            return Err(Error::DimensionMismatch { expected: matrix.rows(), got: matrix.cols() });
        }
        Ok(Self { matrix: matrix.symmetrized() })
    }

    pub fn diagonal(d: &[T]) -> Self {
        Self { matrix: Matrix::from_diagonal(d) }
    }

    /// Builds from the row-major upper triangle (`dim (dim + 1) / 2` entries).
    pub fn from_upper(dim: usize, upper: &[T]) -> Result<Self> {
        let want = dim * (dim + 1) / 2;
        if dim == 0 || upper.len() != want {
            return Err(Error::DimensionMismatch { expected: want, got: upper.len() });
        }
        let mut m = Matrix::zeros(dim, dim);
        let mut it = upper.iter();
        for i in 0..dim {
            for j in i..dim {
                let v = *it.next().expect("length checked");
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(Self { matrix: m })
    }

    pub fn upper(&self) -> Vec<T> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                out.push(self.matrix[(i, j)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    /// `q(x, x)`.
    pub fn eval(&self, x: &[T]) -> T {
        self.matrix.bilinear(x, x)
    }

    /// Polar bilinear form `q(x, y)`.
    pub fn polar(&self, x: &[T], y: &[T]) -> T {
        self.matrix.bilinear(x, y)
    }

    /// Differential of `Q(x) = q(x, x)`, i.e. `2 A x` as a covector.
    pub fn differential(&self, x: &[T]) -> Vec<T> {
        self.matrix.matvec(x).into_iter().map(|v| v + v).collect()
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        symmetric_eigen(&self.matrix).values
    }

    pub fn min_abs_eigenvalue(&self) -> T {
        self.eigenvalues().into_iter().fold(T::infinity(), |m, v| m.min(v.abs()))
    }

    /// Smallest |eigenvalue| exceeds `TOL_DEGENERATE` relative to the largest.
    pub fn is_nondegenerate(&self) -> bool {
        signature_of(self).is_nondegenerate()
    }

    pub fn require_nondegenerate(&self) -> Result<()> {
        if self.is_nondegenerate() {
            Ok(())
        } else {
            Err(Error::DegenerateForm { min_abs_eigenvalue: self.min_abs_eigenvalue().to_f64_lossy() })
        }
    }

    /// `q*(ell, ell)` for the dual form, evaluated without forming the inverse.
    pub fn dual_value(&self, ell: &[T]) -> Result<T> {
        self.require_nondegenerate()?;
        let y = self
            .matrix
            .solve(ell, T::epsilon())
            .ok_or(Error::DegenerateForm { min_abs_eigenvalue: 0.0 })?;
        Ok(crate::scalar::dot(ell, &y))
    }
}

/// `Q(x) = x₁² + … + x_k² − x_{k+1}² − … − x_{k+l}²`.
pub fn standard_form<T: Real>(k: usize, l: usize) -> Result<QuadraticForm<T>> {
    if k == 0 || l == 0 {
        return Err(Error::Precondition(format!("standard form needs k, l >= 1 (got {k}, {l})")));
    }
    let d: Vec<T> = std::iter::repeat(T::one()).take(k).chain(std::iter::repeat(-T::one()).take(l)).collect();
    Ok(QuadraticForm::diagonal(&d))
}

pub fn signature_of<T: Real>(q: &QuadraticForm<T>) -> Signature {
    signature_of_matrix(&q.matrix)
}

/// The dual form `q*(ℓ₁, ℓ₂) = q(q̃ℓ₁, q̃ℓ₂)` where `ℓ(x) = q(q̃ℓ, x)`; its
/// matrix is the inverse of the matrix of `q`.
pub fn dual_form<T: Real>(q: &QuadraticForm<T>) -> Result<QuadraticForm<T>> {
    q.require_nondegenerate()?;
    let inv = q
        .matrix
        .inverse(T::epsilon())
        .ok_or(Error::DegenerateForm { min_abs_eigenvalue: q.min_abs_eigenvalue().to_f64_lossy() })?;
    let dual = QuadraticForm { matrix: inv.symmetrized() };
    if cfg!(debug_assertions) {
        // q*(e_i + e_j, ·) against q(q̃ℓ, q̃ℓ) with q̃ℓ solved independently
        let n = q.dim();
        for i in 0..n {
            let mut ell = vec![T::zero(); n];
            ell[i] = T::one();
            ell[(i + 1) % n] += T::lit(0.5);
            let lifted = q.matrix.solve(&ell, T::epsilon()).expect("nondegenerate");
            let lhs = dual.eval(&ell);
            let rhs = q.eval(&lifted);
            let scale = lhs.abs().max(rhs.abs()).max(T::one());
            debug_assert!(
                (lhs - rhs).abs() <= T::rel_tol(1e-8) * scale * dual.matrix.max_abs().max(T::one()),
                "dual form identity violated"
            );
        }
    }
    Ok(dual)
}

/// Restriction of `q` to `{ℓ = 0}` expressed in the Householder orthonormal
/// basis of that hyperplane, with its eigen-computed signature.
pub fn restrict_to_hyperplane<T: Real>(q: &QuadraticForm<T>, ell: &[T]) -> Result<(QuadraticForm<T>, Signature)> {
    if ell.len() != q.dim() {
        return Err(Error::DimensionMismatch { expected: q.dim(), got: ell.len() });
    }
    if q.dim() < 2 {
        return Err(Error::Precondition("restriction needs dim >= 2".into()));
    }
    let basis = householder_complement(ell).ok_or(Error::ZeroCovector)?;
    let restricted = QuadraticForm { matrix: q.matrix.congruence(&basis).symmetrized() };
    let sig = signature_of(&restricted);
    Ok((restricted, sig))
}

/// Predicted signature of `q|{ℓ=0}` for `q` of signature `(k, l)`:
/// `(k, l−1)` if `q*(ℓ,ℓ) < 0`, `(k−1, l−1)` plus a one-dimensional kernel if
/// it vanishes, `(k−1, l)` if positive.
pub fn predict_restricted_signature<T: Real>(q: &QuadraticForm<T>, ell: &[T]) -> Result<Signature> {
    if ell.len() != q.dim() {
        return Err(Error::DimensionMismatch { expected: q.dim(), got: ell.len() });
    }
    let len = norm(ell);
    if len == T::zero() {
        return Err(Error::ZeroCovector);
    }
    let sig = signature_of(q);
    if !sig.is_nondegenerate() {
        return Err(Error::DegenerateForm { min_abs_eigenvalue: q.min_abs_eigenvalue().to_f64_lossy() });
    }
    let (k, l) = (sig.plus, sig.minus);
    let dv = q.dual_value(ell)?;
    // scale of q* on unit covectors is 1/min|λ|
    let tol = T::rel_tol(TOL_DEGENERATE) * len * len / q.min_abs_eigenvalue();
    let pred = if dv < -tol {
        Signature::new(k, l.saturating_sub(1), 0)
    } else if dv > tol {
        Signature::new(k.saturating_sub(1), l, 0)
    } else {
        Signature::new(k.saturating_sub(1), l.saturating_sub(1), 1)
    };
    Ok(pred)
}

/// Predicted against eigen-computed restricted signatures for `n` random
/// forms of dimension `2..=max_dim` (entries uniform in `[−1, 1]`) and random
/// covectors with `|q*(ℓ,ℓ)| ≥ 1e-3 |ℓ|²`.
pub fn signature_law_certificate<T: Real>(n: usize, max_dim: usize, seed: u64) -> Result<Certificate> {
    if max_dim < 2 {
        return Err(Error::Precondition("max_dim must be >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut violations) = (0usize, 0usize);
    let mut witness = None;
    while checked < n {
        let dim = rng.gen_range(2..=max_dim);
        let upper: Vec<T> = (0..dim * (dim + 1) / 2).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
        let q = QuadraticForm::from_upper(dim, &upper)?;
        if q.min_abs_eigenvalue() < T::lit(1e-3) {
            continue;
        }
        let ell: Vec<T> = (0..dim).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
        let len2 = crate::scalar::dot(&ell, &ell);
        if len2 == T::zero() || q.dual_value(&ell)?.abs() < T::lit(1e-3) * len2 {
            continue;
        }
        checked += 1;
        let predicted = predict_restricted_signature(&q, &ell)?;
        let (_, computed) = restrict_to_hyperplane(&q, &ell)?;
        if predicted != computed {
            violations += 1;
            witness.get_or_insert_with(|| vec![dim as f64, checked as f64]);
        }
    }
    let cert = Certificate::new("signature_law", violations == 0, -(violations as f64))
        .with_detail(format!("{n} forms of dimension <= {max_dim}, {violations} disagreements"));
    Ok(match witness {
        Some(w) => cert.with_witness(w),
        None => cert,
    })
}

/// Largest `|q*(dQ(x), dQ(x)) − 4 Q(x)|` relative to `max(1, |x|²)` over `n`
/// random points for every standard form with `k, l ≤ max_kl`.
pub fn gauss_identity_residual<T: Real>(n: usize, max_kl: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 1..=max_kl {
        for l in 1..=max_kl {
            let q = standard_form::<T>(k, l)?;
            let dual = dual_form(&q)?;
            for _ in 0..n {
                let x: Vec<T> = (0..k + l).map(|_| T::lit(rng.gen_range(-2.0..2.0))).collect();
                let dq = q.differential(&x);
                let r = (dual.eval(&dq) - T::lit(4.0) * q.eval(&x)).abs() / crate::scalar::dot(&x, &x).max(T::one());
                worst = worst.max(r.to_f64_lossy());
            }
        }
    }
    Ok(worst)
}

#[derive(Serialize, Deserialize)]
struct FormJson<T> {
    dim: usize,
    upper: Vec<T>,
}

impl<T: Real + Serialize> Serialize for QuadraticForm<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FormJson { dim: self.dim(), upper: self.upper() }.serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for QuadraticForm<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = FormJson::<T>::deserialize(d)?;
        QuadraticForm::from_upper(j.dim, &j.upper).map_err(serde::de::Error::custom)
    }
}
