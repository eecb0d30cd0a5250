//! Small dense linear algebra: row-major matrices, cyclic Jacobi eigensolver,
//! pivoted elimination and Householder complements. Sizes here never exceed
//! a few dozen rows, so everything is direct and allocation-light.

use crate::scalar::{dot, norm, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds from row-major data. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_columns(cols: &[Vec<T>]) -> Self {
        let rows = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..rows {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `xᵀ M y`.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        dot(x, &self.matvec(y))
    }

    /// `Bᵀ M B`, the congruence used for restrictions to subspaces.
    pub fn congruence(&self, basis: &Self) -> Self {
        basis.transpose().matmul(&self.matmul(basis))
    }

    pub fn symmetrized(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        let half = T::lit(0.5);
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    /// Solves `M x = b` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot falls below `tol * max|M|`.
    pub fn solve(&self, b: &[T], tol: T) -> Option<Vec<T>> {
        let n = self.rows;
        assert_eq!(n, self.cols);
        assert_eq!(n, b.len());
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = self.max_abs();
        if scale == T::zero() {
            return None;
        }
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pv <= tol * scale {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                x.swap(k, p);
            }
            let piv = a[k * n + k];
            for i in (k + 1)..n {
                let f = a[i * n + k] / piv;
                if f == T::zero() {
                    continue;
                }
                for j in k..n {
                    let v = a[k * n + j];
                    a[i * n + j] -= f * v;
                }
                let xk = x[k];
                x[i] -= f * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in (k + 1)..n {
                s -= a[k * n + j] * x[j];
            }
            x[k] = s / a[k * n + k];
        }
        Some(x)
    }

    pub fn inverse(&self, tol: T) -> Option<Self> {
        let n = self.rows;
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            cols.push(self.solve(&e, tol)?);
        }
        Some(Self::from_columns(&cols))
    }

    /// Determinant via elimination; zero for numerically singular input.
    pub fn determinant(&self) -> T {
        let n = self.rows;
        assert_eq!(n, self.cols);
        let mut a = self.data.clone();
        let mut det = T::one();
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pv == T::zero() {
                return T::zero();
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            let piv = a[k * n + k];
            det *= piv;
            for i in (k + 1)..n {
                let f = a[i * n + k] / piv;
                for j in k..n {
                    let v = a[k * n + j];
                    a[i * n + j] -= f * v;
                }
            }
        }
        det
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= T::zero() {
                        return None;
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Some(l)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix<T>,
}

/// Cyclic Jacobi rotations; converges quadratically and is accurate to a few
/// ulps of the largest eigenvalue for the small sizes used here.
pub fn symmetric_eigen<T: Real>(m: &Matrix<T>) -> SymmetricEigen<T> {
    let n = m.rows();
    assert_eq!(n, m.cols(), "eigen of non-square matrix");
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        let mut diag = T::zero();
        for i in 0..n {
            diag += a[(i, i)] * a[(i, i)];
        }
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_columns(&order.iter().map(|&i| v.column(i)).collect::<Vec<_>>());
    SymmetricEigen { values, vectors }
}

/// Orthonormal basis of the hyperplane `{x : ⟨ell, x⟩ = 0}` as the columns of an
/// `n × (n-1)` matrix. Uses the Householder reflector sending `ell/|ell|` to a
/// coordinate axis; the remaining reflector columns span the complement.
pub fn householder_complement<T: Real>(ell: &[T]) -> Option<Matrix<T>> {
    let n = ell.len();
    let len = norm(ell);
    if len == T::zero() || !len.is_finite() {
        return None;
    }
    let u: Vec<T> = ell.iter().map(|&x| x / len).collect();
    // reflect onto the axis where |u_k| is largest for stability
    let k = (0..n)
        .max_by(|&i, &j| u[i].abs().partial_cmp(&u[j].abs()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let sign = if u[k] >= T::zero() { T::one() } else { -T::one() };
    let mut w = u.clone();
    w[k] += sign;
    let wn2 = dot(&w, &w);
    let two = T::lit(2.0);
    let mut cols = Vec::with_capacity(n - 1);
    for j in (0..n).filter(|&j| j != k) {
        // column j of H = I - 2 w wᵀ / |w|²
        let col: Vec<T> = (0..n)
            .map(|i| {
                let delta = if i == j { T::one() } else { T::zero() };
                delta - two * w[i] * w[j] / wn2
            })
            .collect();
        cols.push(col);
    }
    Some(Matrix::from_columns(&cols))
}

/// Singular values and right singular vectors of `m` by one-sided Jacobi
/// rotations on the columns of `mᵀ`; singular values are accurate to rounding
/// relative to the largest, which the normal-equations route is not.
/// Returns `(sigmas, vectors)` with `vectors[k]` the unit left singular vector
/// of `mᵀ`, i.e. a row-space direction of `m`, sorted by decreasing sigma.
pub fn row_space_svd<T: Real>(m: &Matrix<T>) -> (Vec<T>, Vec<Vec<T>>) {
    let mut cols: Vec<Vec<T>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
    let k = cols.len();
    let tiny = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= tiny * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..cols[p].len() {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pairs: Vec<(T, Vec<T>)> = cols
        .into_iter()
        .map(|c| {
            let n = norm(&c);
            let u = if n > T::zero() { c.iter().map(|&v| v / n).collect() } else { c };
            (n, u)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    pairs.into_iter().unzip()
}

/// Orthonormal basis of the right null space of `m`: the complement of the
/// row-space directions whose singular value exceeds `rel_tol` times the
/// largest. Also returns all singular values, largest first.
pub fn null_space<T: Real>(m: &Matrix<T>, rel_tol: T) -> (Vec<Vec<T>>, Vec<T>) {
    let n = m.cols();
    let (sigmas, dirs) = row_space_svd(m);
    let smax = sigmas.first().copied().unwrap_or(T::zero());
    let mut basis: Vec<Vec<T>> = dirs
        .into_iter()
        .zip(&sigmas)
        .filter(|(_, &s)| s > rel_tol * smax && s > T::zero())
        .map(|(d, _)| d)
        .collect();
    let rank = basis.len();
    // complete with coordinate axes by Gram–Schmidt, twice for stability
    let mut kernel = Vec::with_capacity(n - rank);
    let mut candidates: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            e
        })
        .collect();
    while basis.len() < n && !candidates.is_empty() {
        let mut best: Option<(usize, Vec<T>, T)> = None;
        for (ci, cand) in candidates.iter().enumerate() {
            let mut v = cand.clone();
            for _ in 0..2 {
                for b in &basis {
                    let d = dot(&v, b);
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= d * *y;
                    }
                }
            }
            let len = norm(&v);
            if best.as_ref().map_or(true, |b| len > b.2) {
                best = Some((ci, v, len));
            }
        }
        let (ci, v, len) = best.expect("candidates nonempty");
        candidates.remove(ci);
        if len <= T::lit(1e-6) {
            break;
        }
        let unit: Vec<T> = v.iter().map(|&x| x / len).collect();
        basis.push(unit.clone());
        kernel.push(unit);
    }
    (kernel, sigmas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let m = Matrix::from_row_major(3, 3, vec![2.0_f64, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, -1.0]);
        let e = symmetric_eigen(&m);
        let expect = [-1.0, 1.0, 3.0];
        for (v, x) in e.values.iter().zip(expect) {
            assert!((v - x).abs() < 1e-14);
        }
        // M v = λ v
        for k in 0..3 {
            let v = e.vectors.column(k);
            let mv = m.matvec(&v);
            for i in 0..3 {
                assert!((mv[i] - e.values[k] * v[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn householder_basis_is_orthonormal_and_orthogonal_to_ell() {
        let ell = [0.3_f64, -2.0, 1.5, 0.7];
        let b = householder_complement(&ell).unwrap();
        assert_eq!((b.rows(), b.cols()), (4, 3));
        let g = b.transpose().matmul(&b);
        for i in 0..3 {
            assert!(dot(&b.column(i), &ell).abs() < 1e-14);
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-14);
            }
        }
        assert!(householder_complement(&[0.0_f64, 0.0]).is_none());
    }

    #[test]
    fn inverse_and_determinant() {
        let m = Matrix::from_row_major(2, 2, vec![4.0_f64, 7.0, 2.0, 6.0]);
        assert!((m.determinant() - 10.0).abs() < 1e-12);
        let inv = m.inverse(1e-14).unwrap();
        let id = m.matmul(&inv);
        assert!(id.sub(&Matrix::identity(2)).max_abs() < 1e-14);
        let sing = Matrix::from_row_major(2, 2, vec![1.0_f64, 2.0, 2.0, 4.0]);
        assert!(sing.inverse(1e-12).is_none());
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = Matrix::from_row_major(1, 3, vec![1.0_f64, 1.0, 0.0]);
        let (basis, _) = null_space(&m, 1e-10);
        assert_eq!(basis.len(), 2);
        for b in basis {
            assert!(m.matvec(&b)[0].abs() < 1e-14);
        }
    }

    #[test]
    fn jacobi_singular_values_resolve_rank() {
        // rank 2: third row = first + second, fourth = 2·first
        let r1 = [1.0_f64, 2.0, 0.5, -1.0, 3.0, 0.25];
        let r2 = [0.0_f64, 1e-3, 2e-3, 0.0, -1e-3, 5e-4];
        let mut data = Vec::new();
        data.extend(r1);
        data.extend(r2);
        data.extend(r1.iter().zip(&r2).map(|(a, b)| a + b));
        data.extend(r1.iter().map(|a| 2.0 * a));
        let m = Matrix::from_row_major(4, 6, data);
        let (kernel, sigmas) = null_space(&m, 1e-8);
        assert!(sigmas[2] / sigmas[0] < 1e-14, "{sigmas:?}");
        assert_eq!(kernel.len(), 4);
        for k in &kernel {
            assert!(m.matvec(k).iter().all(|v| v.abs() < 1e-14));
        }
    }
}
