//! Small dense symmetric matrices (dimension <= 5 in practice).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "square matrix");
        Self { dim, data: rows.concat() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks_exact(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `(A + A') / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut s = self.clone();
        let half = T::lit(0.5);
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                let v = half * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.dim);
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| *a * *b).sum())
            .collect()
    }

    /// `v' A v`.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| *a * *b).sum()
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|x| *x * c).collect() }
    }

    /// Lower Cholesky factor of a symmetric positive-definite matrix.
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.dim;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(Error::Numerical("matrix is not positive definite".into()));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Inverse via Cholesky; the input must be symmetric positive definite.
    pub fn spd_inverse(&self) -> Result<Self> {
        let n = self.dim;
        let l = self.cholesky()?;
        let mut inv = Self::zeros(n);
        let mut col = vec![T::zero(); n];
        for c in 0..n {
            // Forward solve L y = e_c.
            for i in 0..n {
                let mut s = if i == c { T::one() } else { T::zero() };
                for k in 0..i {
                    s = s - l[(i, k)] * col[k];
                }
                col[i] = s / l[(i, i)];
            }
            // Back solve L' x = y.
            for i in (0..n).rev() {
                let mut s = col[i];
                for k in i + 1..n {
                    s = s - l[(k, i)] * col[k];
                }
                col[i] = s / l[(i, i)];
            }
            for i in 0..n {
                inv[(i, c)] = col[i];
            }
        }
        Ok(inv.symmetrized())
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let n = self.dim;
        let mut a = self.symmetrized();
        let tiny = T::epsilon() * T::epsilon();
        for _sweep in 0..100 {
            let off: T = (0..n).flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            let diag: T = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
            if off <= tiny * diag.max(T::min_positive_value()) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
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
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    /// Spectral condition number of a symmetric matrix; infinite if singular
    /// or indefinite.
    pub fn condition_number(&self) -> T {
        let ev = self.symmetric_eigenvalues();
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo > T::zero() {
            hi / lo
        } else {
            T::infinity()
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}
