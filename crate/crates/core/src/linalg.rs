//! Small dense and banded solvers used by the moment and time-stepping code.
//!
//! The Cholesky routines are generic over [`Scalar`] so the same code runs in
//! `f64` and in the software extended-precision type from [`crate::precision`].

use crate::error::{Error, Result};
use crate::precision::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..self.n {
                    acc = acc + self.get(i, j).clone() * x[j].clone();
                }
                acc
            })
            .collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix { n: self.n, data: self.data.iter().map(f).collect() }
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        let n = a.dim();
        let mut l = Matrix::from_fn(n, |_, _| T::zero());
        for j in 0..n {
            let mut d = a.get(j, j).clone();
            for k in 0..j {
                let ljk = l.data[j * n + k].clone();
                d = d - ljk.clone() * ljk;
            }
            if !(d.to_f64() > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let djj = d.sqrt();
            l.data[j * n + j] = djj.clone();
            for i in j + 1..n {
                let mut s = a.get(i, j).clone();
                for k in 0..j {
                    s = s - l.data[i * n + k].clone() * l.data[j * n + k].clone();
                }
                l.data[i * n + j] = s / djj.clone();
            }
        }
        Ok(Cholesky { l })
    }

    /// Condition estimate from diagonal growth: `(max Lᵢᵢ / min Lᵢᵢ)²`.
    ///
    /// A lower bound on the 2-norm condition number that tracks it closely for
    /// the exponential Gram matrices handled here.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.l.dim();
        let diag: Vec<f64> = (0..n).map(|i| self.l.get(i, i).to_f64()).collect();
        let max = diag.iter().cloned().fold(0.0_f64, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if n == 0 {
            return 1.0;
        }
        (max / min).powi(2)
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.dim();
        let mut y: Vec<T> = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = b[i].clone();
            for k in 0..i {
                s = s - self.l.get(i, k).clone() * y[k].clone();
            }
            y.push(s / self.l.get(i, i).clone());
        }
        let mut x = y;
        for i in (0..n).rev() {
            let mut s = x[i].clone();
            for k in i + 1..n {
                s = s - self.l.get(k, i).clone() * x[k].clone();
            }
            x[i] = s / self.l.get(i, i).clone();
        }
        x
    }
}

/// Factored tridiagonal matrix (no pivoting; the time-stepping matrices are
/// symmetric positive definite and diagonally dominant).
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    /// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is ignored);
    /// `upper[i]` multiplies `x[i+1]` in row `i`.
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Option<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n {
            return None;
        }
        let mut t = Tridiagonal { lower, diag, upper };
        for i in 1..n {
            if t.diag[i - 1] == 0.0 {
                return None;
            }
            let m = t.lower[i] / t.diag[i - 1];
            t.lower[i] = m;
            t.diag[i] -= m * t.upper[i - 1];
        }
        if n > 0 && (t.diag[n - 1] == 0.0 || !t.diag.iter().all(|d| d.is_finite())) {
            return None;
        }
        Some(t)
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.diag.len();
        for i in 1..n {
            rhs[i] -= self.lower[i] * rhs[i - 1];
        }
        rhs[n - 1] /= self.diag[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.diag[i];
        }
    }
}
