//! Minimal dense real linear algebra for small fixed-dimension problems.
//!
//! Everything here is deterministic: sums are accumulated left to right and
//! the LU factorization uses partial pivoting with a scale-invariant pivot
//! threshold, so repeated runs are bit-identical.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative pivot threshold: a pivot below `PIVOT_EPS * max|A|` is singular.
pub const PIVOT_EPS: f64 = 1e-14;

/// Default relative residual bound for a successful linear solve.
pub const TOL_SOLVE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular matrix: pivot {pivot:.3e} below threshold {threshold:.3e}")]
    SingularMatrix { pivot: f64, threshold: f64 },
}

/// Dense real vector of dimension `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Self {
        Vector(entries)
    }

    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    /// Standard basis vector `e_i`.
    pub fn basis(len: usize, i: usize) -> Self {
        let mut v = vec![0.0; len];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Euclidean inner product, accumulated left to right.
    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.0[i] * other.0[i];
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|x| c * x).collect())
    }

    /// Component-wise division; exact where `scale(1/c)` would round twice.
    pub fn div(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|x| x / c).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "add: length mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "sub: length mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + c * other`, the workhorse of projector application.
    pub fn add_scaled(&self, c: f64, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "add_scaled: length mismatch");
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(v: [f64; N]) -> Self {
        Vector(v.to_vec())
    }
}

/// Outer product `a bᵀ`.
pub fn outer(a: &Vector, b: &Vector) -> Matrix {
    assert_eq!(a.len(), b.len(), "outer: length mismatch");
    let d = a.len();
    let mut m = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            m.data[i * d + j] = a[i] * b[j];
        }
    }
    m
}

/// Dense square real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(LinalgError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest entry of `|A - Aᵀ|`; zero for a symmetric matrix.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn transpose(&self) -> Matrix {
        let mut m = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[j * self.dim + i] = self.data[i * self.dim + j];
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut acc = 0.0;
        for x in &self.data {
            acc += x * x;
        }
        acc.sqrt()
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim, "add: dimension mismatch");
        Matrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim, "sub: dimension mismatch");
        Matrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self + c * a bᵀ` without forming the outer product separately.
    pub fn add_outer_scaled(&self, c: f64, a: &Vector, b: &Vector) -> Matrix {
        assert_eq!(self.dim, a.len(), "add_outer_scaled: dimension mismatch");
        assert_eq!(self.dim, b.len(), "add_outer_scaled: dimension mismatch");
        let d = self.dim;
        let mut out = self.clone();
        for i in 0..d {
            for j in 0..d {
                out.data[i * d + j] += c * a[i] * b[j];
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        assert_eq!(self.dim, v.len(), "mul_vec: dimension mismatch");
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (i, entry) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.data[i * d + j] * v[j];
            }
            *entry = acc;
        }
        Vector(out)
    }

    /// `Aᵀ v`, accumulated in row order for determinism.
    pub fn transpose_mul_vec(&self, v: &Vector) -> Vector {
        assert_eq!(self.dim, v.len(), "transpose_mul_vec: dimension mismatch");
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (j, entry) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..d {
                acc += self.data[i * d + j] * v[i];
            }
            *entry = acc;
        }
        Vector(out)
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim, "matmul: dimension mismatch");
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.data[i * d + k] * other.data[k * d + j];
                }
                out.data[i * d + j] = acc;
            }
        }
        out
    }

    /// Solves `A x = b` by dense LU with partial pivoting.
    ///
    /// A pivot whose magnitude falls below `PIVOT_EPS * max|A|` signals a
    /// singular system (in the stepper: the step size is too large or the
    /// energy is degenerate).
    pub fn solve(&self, b: &Vector) -> Result<Vector, LinalgError> {
        if b.len() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                found: b.len(),
            });
        }
        let d = self.dim;
        let threshold = PIVOT_EPS * self.max_abs();
        let mut lu = self.data.clone();
        let mut rhs = b.0.clone();

        for col in 0..d {
            // partial pivoting: largest magnitude in the column at or below the diagonal
            let mut pivot_row = col;
            let mut pivot_mag = lu[col * d + col].abs();
            for row in (col + 1)..d {
                let mag = lu[row * d + col].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = row;
                }
            }
            if pivot_mag <= threshold {
                return Err(LinalgError::SingularMatrix {
                    pivot: pivot_mag,
                    threshold,
                });
            }
            if pivot_row != col {
                for j in 0..d {
                    lu.swap(col * d + j, pivot_row * d + j);
                }
                rhs.swap(col, pivot_row);
            }
            let pivot = lu[col * d + col];
            for row in (col + 1)..d {
                let factor = lu[row * d + col] / pivot;
                lu[row * d + col] = factor;
                for j in (col + 1)..d {
                    lu[row * d + j] -= factor * lu[col * d + j];
                }
                rhs[row] -= factor * rhs[col];
            }
        }

        // back substitution
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let mut acc = rhs[i];
            for j in (i + 1)..d {
                acc -= lu[i * d + j] * x[j];
            }
            x[i] = acc / lu[i * d + i];
        }
        Ok(Vector(x))
    }
}

/// Relative residual `‖A x − b‖ / (‖A‖·‖x‖ + ‖b‖)` of a computed solution.
pub fn relative_residual(a: &Matrix, x: &Vector, b: &Vector) -> f64 {
    let r = a.mul_vec(x).sub(b).norm();
    let scale = a.frobenius_norm() * x.norm() + b.norm();
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand::rngs::StdRng;

    #[test]
    fn dot_orthogonal_axes() {
        let a = Vector::from([1.0, 0.0, 0.0]);
        let b = Vector::from([0.0, 1.0, 0.0]);
        assert_eq!(a.dot(&b), 0.0);
    }

    #[test]
    fn dot_ones() {
        let a = Vector::from([1.0, 1.0, 1.0]);
        assert_eq!(a.dot(&a), 3.0);
    }

    /// Neumaier-compensated summation of the products, as an independent
    /// extended-precision oracle for `dot`.
    fn dot_oracle(a: &Vector, b: &Vector) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for i in 0..a.len() {
            let term = a[i] * b[i];
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    #[test]
    fn dot_matches_compensated_oracle() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let a = Vector::new((0..7).map(|_| rng.random_range(-5.0..5.0)).collect());
            let b = Vector::new((0..7).map(|_| rng.random_range(-5.0..5.0)).collect());
            assert_relative_eq!(a.dot(&b), dot_oracle(&a, &b), max_relative = 1e-13, epsilon = 1e-13);
        }
    }

    #[test]
    fn norm_examples() {
        assert_eq!(Vector::from([3.0, 4.0, 0.0]).norm(), 5.0);
        assert_eq!(Vector::from([0.0, 0.0, 0.0]).norm(), 0.0);
        assert_relative_eq!(
            Vector::from([1.0, 1.0, 1.0]).norm(),
            3f64.sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn outer_examples() {
        let m = outer(&Vector::from([1.0, 0.0]), &Vector::from([0.0, 1.0]));
        assert_eq!(
            m,
            Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap()
        );

        let e1 = Vector::from([1.0, 0.0, 0.0]);
        let p = outer(&e1, &e1);
        // rank-1 projector onto e1
        assert_eq!(p.mul_vec(&e1), e1);
        assert_eq!(
            p.mul_vec(&Vector::from([0.0, 1.0, 0.0])),
            Vector::zeros(3)
        );
    }

    #[test]
    fn solve_identity() {
        let a = Matrix::identity(3);
        let b = Vector::from([1.0, 2.0, 3.0]);
        assert_eq!(a.solve(&b).unwrap(), b);
    }

    #[test]
    fn solve_diagonal() {
        let a = Matrix::from_diag(&[2.0, 4.0]);
        let x = a.solve(&Vector::from([2.0, 4.0])).unwrap();
        assert_eq!(x, Vector::from([1.0, 1.0]));
    }

    /// Explicit 3x3 inverse via the adjugate, independent of the LU path.
    pub(crate) fn adjugate_solve_3x3(a: &Matrix, b: &Vector) -> Vector {
        assert_eq!(a.dim(), 3);
        let m = |i: usize, j: usize| a.get(i, j);
        let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
            - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        let cof = [
            [
                m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1),
                -(m(0, 1) * m(2, 2) - m(0, 2) * m(2, 1)),
                m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1),
            ],
            [
                -(m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)),
                m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0),
                -(m(0, 0) * m(1, 2) - m(0, 2) * m(1, 0)),
            ],
            [
                m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0),
                -(m(0, 0) * m(2, 1) - m(0, 1) * m(2, 0)),
                m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
            ],
        ];
        let mut x = [0.0; 3];
        for i in 0..3 {
            x[i] = (cof[i][0] * b[0] + cof[i][1] * b[1] + cof[i][2] * b[2]) / det;
        }
        Vector::from(x)
    }

    #[test]
    fn solve_matches_adjugate_oracle() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..50 {
            // diagonally dominant, hence well conditioned
            let mut rows = Vec::new();
            for i in 0..3 {
                let mut row: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                row[i] += 4.0;
                rows.push(row);
            }
            let a = Matrix::from_rows(&rows).unwrap();
            let b = Vector::new((0..3).map(|_| rng.random_range(-2.0..2.0)).collect());
            let x = a.solve(&b).unwrap();
            let x_oracle = adjugate_solve_3x3(&a, &b);
            for i in 0..3 {
                assert_relative_eq!(x[i], x_oracle[i], max_relative = 1e-12, epsilon = 1e-14);
            }
            assert!(relative_residual(&a, &x, &b) <= TOL_SOLVE);
        }
    }

    #[test]
    fn solve_rejects_singular() {
        let a = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        let err = a.solve(&Vector::from([1.0, 2.0, 0.0])).unwrap_err();
        assert!(matches!(err, LinalgError::SingularMatrix { .. }));
    }

    #[test]
    fn solve_pivot_threshold_is_scale_invariant() {
        // scaling a singular matrix must not make it look regular
        let a = Matrix::from_rows(&[vec![1e-20, 0.0], vec![0.0, 1e-20]]).unwrap();
        // uniformly tiny but perfectly conditioned: must still solve
        let x = a.solve(&Vector::from([1e-20, 2e-20])).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(x[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn solve_dimension_mismatch() {
        let a = Matrix::identity(3);
        let err = a.solve(&Vector::from([1.0, 2.0])).unwrap_err();
        assert!(matches!(err, LinalgError::DimensionMismatch { .. }));
    }

    proptest! {
        #[test]
        fn outer_applied_equals_scaled_dot(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
            c in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let (a, b, c) = (Vector::new(a), Vector::new(b), Vector::new(c));
            let lhs = outer(&a, &b).mul_vec(&c);
            let rhs = a.scale(b.dot(&c));
            // scale against the summand magnitudes: the two routes may cancel
            let bc_mass: f64 = b.iter().zip(c.iter()).map(|(x, y)| (x * y).abs()).sum();
            for i in 0..4 {
                prop_assert!((lhs[i] - rhs[i]).abs() <= 1e-14 * (1.0 + a[i].abs() * bc_mass));
            }
        }

        #[test]
        fn solve_recovers_known_solution(
            entries in proptest::collection::vec(-1.0f64..1.0, 16),
            xs in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            // diagonal dominance keeps the condition number far below 1e6
            let mut rows = Vec::new();
            for i in 0..4 {
                let mut row = entries[i * 4..(i + 1) * 4].to_vec();
                row[i] += 5.0;
                rows.push(row);
            }
            let a = Matrix::from_rows(&rows).unwrap();
            let x_true = Vector::new(xs);
            let b = a.mul_vec(&x_true);
            let x = a.solve(&b).unwrap();
            let err = x.sub(&x_true).norm();
            prop_assert!(err <= 1e-10 * (1.0 + x_true.norm()));
        }
    }
}
