//! Small dense matrices over any [`Scalar`].
//!
//! The storage type itself has no bound so it can also hold ciphertexts.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::{max_abs, sum, Real, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("empty input")]
    Empty,
}

fn mismatch(expected: impl ToString, got: impl ToString) -> LinalgError {
    LinalgError::DimensionMismatch {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T> Matrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(mismatch(rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn try_map<U, E>(&self, f: impl FnMut(&T) -> Result<U, E>) -> Result<Matrix<U>, E> {
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect::<Result<_, _>>()?,
        })
    }
}

impl<T: Clone> Matrix<T> {
    pub fn filled(rows: usize, cols: usize, v: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(mismatch(c, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    /// Column-stacks equally long vectors into a `len × k` matrix.
    pub fn from_columns(cols: &[Vec<T>]) -> Result<Self, LinalgError> {
        let first = cols.first().ok_or(LinalgError::Empty)?;
        let d = first.len();
        if let Some(bad) = cols.iter().find(|c| c.len() != d) {
            return Err(mismatch(d, bad.len()));
        }
        Ok(Self::from_fn(d, cols.len(), |i, j| cols[j][i].clone()))
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn column_vector(v: Vec<T>) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v,
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    sum(a.iter().zip(b).map(|(x, y)| x.clone() * y.clone()))
}

pub fn outer<T: Scalar>(u: &[T], v: &[T]) -> Matrix<T> {
    Matrix::from_fn(u.len(), v.len(), |i, j| u[i].clone() * v[j].clone())
}

pub fn norm2<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![T::one(); n])
    }

    pub fn diag(d: &[T]) -> Self {
        let n = d.len();
        Self::from_fn(n, n, |i, j| if i == j { d[i].clone() } else { T::zero() })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(mismatch(format!("{} rows", self.cols), format!("{} rows", other.rows)));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = &self[(i, l)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a.clone() * other[(l, j)].clone();
                    let cell = &mut out[(i, j)];
                    *cell = cell.clone() + prod;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>, LinalgError> {
        if self.cols != v.len() {
            return Err(mismatch(self.cols, v.len()));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Result<Self, LinalgError> {
        if self.shape() != other.shape() {
            return Err(mismatch(format!("{:?}", self.shape()), format!("{:?}", other.shape())));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    pub fn scale(&self, s: &T) -> Self {
        self.map(|a| a.clone() * s.clone())
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| sum((0..self.rows).map(|i| self[(i, j)].abs())))
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| sum(self.row(i).iter().map(|x| x.abs())))
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn frobenius_sq(&self) -> T {
        dot(&self.data, &self.data)
    }

    pub fn max_abs(&self) -> T {
        max_abs(self.data.iter().cloned())
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// Solves `self · x = b` by Gaussian elimination with partial pivoting.
    ///
    /// Exact when `T` is a rational type.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        let n = self.rows;
        if !self.is_square() {
            return Err(mismatch("square", format!("{:?}", self.shape())));
        }
        if b.len() != n {
            return Err(mismatch(n, b.len()));
        }
        let mut a = self.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| {
                    a[(i, k)]
                        .abs()
                        .partial_cmp(&a[(j, k)].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty range");
            if a[(pivot, k)].is_zero() {
                return Err(LinalgError::Singular);
            }
            if pivot != k {
                for j in 0..n {
                    a.data.swap(pivot * n + j, k * n + j);
                }
                x.swap(pivot, k);
            }
            let p = a[(k, k)].clone();
            for i in k + 1..n {
                if a[(i, k)].is_zero() {
                    continue;
                }
                let factor = a[(i, k)].clone() / p.clone();
                for j in k..n {
                    let v = a[(i, j)].clone() - factor.clone() * a[(k, j)].clone();
                    a[(i, j)] = v;
                }
                x[i] = x[i].clone() - factor * x[k].clone();
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k].clone();
            for j in k + 1..n {
                acc = acc - a[(k, j)].clone() * x[j].clone();
            }
            x[k] = acc / a[(k, k)].clone();
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Self, LinalgError> {
        let n = self.rows;
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            cols.push(self.solve(&e)?);
        }
        Matrix::from_columns(&cols)
    }
}

impl<T: Real> Matrix<T> {
    /// Solves `self · x = b` for symmetric positive-definite `self` via Cholesky.
    pub fn cholesky_solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        let n = self.rows;
        if !self.is_square() || b.len() != n {
            return Err(mismatch(n, b.len()));
        }
        let mut l = Matrix::<T>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= T::zero() {
                        return Err(LinalgError::NotPositiveDefinite);
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        let mut z = vec![T::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - l[(i, k)] * z[k];
            }
            z[i] = s / l[(i, i)];
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s = s - l[(k, i)] * x[k];
            }
            x[i] = s / l[(i, i)];
        }
        Ok(x)
    }
}

/// `Aᵀ / (‖A‖₁ ‖A‖∞)`, which guarantees `‖I − V₀A‖₂ < 1` for invertible `A`.
pub fn newton_schulz_init<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    let denom = a.norm_one() * a.norm_inf();
    if denom.is_zero() {
        return Err(LinalgError::Singular);
    }
    Ok(a.transpose().scale(&(T::one() / denom)))
}

/// `‖V A − I‖∞`.
pub fn inverse_residual<T: Scalar>(v: &Matrix<T>, a: &Matrix<T>) -> Result<T, LinalgError> {
    let va = v.matmul(a)?;
    Ok(va.sub(&Matrix::identity(a.rows()))?.norm_inf())
}

/// One step of the third-order recurrence `V ← V(3I − AV(3I − AV))`.
pub fn newton_schulz_step<T: Scalar>(a: &Matrix<T>, v: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    let n = a.rows();
    let three = Matrix::identity(n).scale(&T::from_usize(3));
    let m = a.matmul(v)?;
    let inner = m.matmul(&three.sub(&m)?)?;
    v.matmul(&three.sub(&inner)?)
}

/// Runs `iterations` steps from `v0`, recording the residual after each one.
pub fn newton_schulz<T: Scalar>(
    a: &Matrix<T>,
    v0: Matrix<T>,
    iterations: usize,
) -> Result<(Matrix<T>, Vec<T>), LinalgError> {
    if !a.is_square() || v0.shape() != a.shape() {
        return Err(mismatch(format!("{:?}", a.shape()), format!("{:?}", v0.shape())));
    }
    let mut v = v0;
    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        v = newton_schulz_step(a, &v)?;
        trace.push(inverse_residual(&v, a)?);
    }
    Ok((v, trace))
}
