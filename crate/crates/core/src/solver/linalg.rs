//! Small dense linear algebra for the Newton systems.

use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = self.data[i * self.cols + j] + v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.rows) {
            *yi = dot(self.row(i), x);
        }
    }

    /// `y = Aᵀ x`.
    pub fn mul_t_vec(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for (i, &xi) in x.iter().enumerate().take(self.rows) {
            if xi == T::zero() {
                continue;
            }
            for (yj, &aij) in y.iter_mut().zip(self.row(i)) {
                *yj = *yj + aij * xi;
            }
        }
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Solves `A x = b` in place (`b` becomes `x`) by Gaussian elimination with partial
/// pivoting after one pass of row and column equilibration. Returns `false` when the
/// matrix is numerically singular.
pub fn solve_in_place<T: Real>(a: &mut Matrix<T>, b: &mut [T]) -> bool {
    let n = a.rows;
    assert_eq!(n, a.cols, "square system expected");
    assert_eq!(n, b.len());
    let mut col_scale = vec![T::one(); n];
    for i in 0..n {
        let m = a.row(i).iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        if m == T::zero() || !m.is_finite() {
            return false;
        }
        let r = m.recip();
        for j in 0..n {
            a.set(i, j, a.get(i, j) * r);
        }
        b[i] = b[i] * r;
    }
    for (j, cs) in col_scale.iter_mut().enumerate() {
        let m = (0..n).fold(T::zero(), |acc, i| acc.max(a.get(i, j).abs()));
        if m == T::zero() {
            return false;
        }
        *cs = m.recip();
        for i in 0..n {
            a.set(i, j, a.get(i, j) * *cs);
        }
    }
    for k in 0..n {
        let (p, pmax) = (k..n).fold((k, T::zero()), |(bi, bv), i| {
            let v = a.get(i, k).abs();
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
        if pmax <= T::epsilon() * T::lit(1e-6) || !pmax.is_finite() {
            return false;
        }
        if p != k {
            for j in 0..n {
                let tmp = a.get(k, j);
                a.set(k, j, a.get(p, j));
                a.set(p, j, tmp);
            }
            b.swap(k, p);
        }
        let inv = a.get(k, k).recip();
        for i in k + 1..n {
            let f = a.get(i, k) * inv;
            if f == T::zero() {
                continue;
            }
            for j in k + 1..n {
                a.set(i, j, a.get(i, j) - f * a.get(k, j));
            }
            a.set(i, k, T::zero());
            b[i] = b[i] - f * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s = s - a.get(k, j) * b[j];
        }
        b[k] = s / a.get(k, k);
    }
    for (bj, cs) in b.iter_mut().zip(&col_scale) {
        *bj = *bj * *cs;
    }
    true
}
