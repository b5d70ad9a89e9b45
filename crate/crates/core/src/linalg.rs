//! Dense square matrices in row-major storage.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

/// Square `n × n` real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Builds from row-major data; `None` if the length is not a square.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == n * n).then_some(Self { n, data })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Rank-one matrix `c · v vᵀ`.
    pub fn outer(v: &[f64], c: f64) -> Self {
        Self::from_fn(v.len(), |i, j| c * v[i] * v[j])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Writes `value` at `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, value: f64) {
        self[(i, j)] = value;
        self[(j, i)] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(l)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `tr(Mᵏ)` by repeated multiplication; `k = 0` gives `n`.
    pub fn trace_of_power(&self, k: u32) -> f64 {
        if k == 0 {
            return self.n as f64;
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.matmul(self);
        }
        acc.trace()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// `max |M(i,j) − M(j,i)|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Rank by Gaussian elimination with partial pivoting. A pivot counts
    /// when its magnitude exceeds `tol · max(1, max|M|)`.
    pub fn rank(&self, tol: f64) -> usize {
        let n = self.n;
        let threshold = tol * self.max_abs().max(1.0);
        let mut a = self.data.clone();
        let mut rank = 0;
        for col in 0..n {
            if rank == n {
                break;
            }
            let (pivot, best) = (rank..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= threshold {
                continue;
            }
            if pivot != rank {
                for j in 0..n {
                    a.swap(pivot * n + j, rank * n + j);
                }
            }
            let p = a[rank * n + col];
            for r in rank + 1..n {
                let factor = a[r * n + col] / p;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[r * n + j] -= factor * a[rank * n + j];
                }
            }
            rank += 1;
        }
        rank
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_simple_matrices() {
        assert_eq!(Matrix::zeros(4).rank(1e-10), 0);
        assert_eq!(Matrix::identity(5).rank(1e-10), 5);
        assert_eq!(Matrix::outer(&[1.0, 2.0, -1.0], 3.0).rank(1e-10), 1);
        let two = Matrix::outer(&[1.0, 0.0, 1.0], 1.0).add(&Matrix::outer(&[0.0, 1.0, 1.0], 1.0));
        assert_eq!(two.rank(1e-10), 2);
    }

    #[test]
    fn trace_of_power_matches_hand_computation() {
        // [[1,2],[2,3]]² = [[5,8],[8,13]]
        let m = Matrix::from_row_major(2, vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.trace_of_power(2), 18.0);
        assert_eq!(m.trace_of_power(0), 2.0);
        assert_eq!(m.trace_of_power(1), 4.0);
    }

    #[test]
    fn asymmetry_detects_offending_pair() {
        let mut m = Matrix::identity(3);
        m[(0, 2)] = 0.5;
        assert_eq!(m.asymmetry(), 0.5);
        assert!(!m.is_symmetric());
        m[(2, 0)] = 0.5;
        assert!(m.is_symmetric());
    }
}
