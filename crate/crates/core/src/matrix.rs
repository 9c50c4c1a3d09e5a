//! Small dense square matrices for communication and transition matrices.

use std::ops::Index;

use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<S> {
    size: usize,
    data: Vec<S>,
}

impl<S: Scalar> SquareMatrix<S> {
    pub fn zeros(size: usize) -> Self {
        Self { size, data: vec![S::zero(); size * size] }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size);
        for i in 0..size {
            m.set(i, i, S::one());
        }
        m
    }

    /// Builds a matrix from rows. Returns `None` when the rows are ragged or
    /// the matrix is not square.
    pub fn from_rows(rows: &[Vec<S>]) -> Option<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return None;
        }
        Some(Self { size, data: rows.iter().flatten().copied().collect() })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: S) {
        self.data[i * self.size + j] = value;
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<S>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn row_sums(&self) -> Vec<S> {
        (0..self.size).map(|i| self.row(i).iter().fold(S::zero(), |a, &b| a + b)).collect()
    }

    pub fn col_sums(&self) -> Vec<S> {
        (0..self.size)
            .map(|j| (0..self.size).fold(S::zero(), |a, i| a + self.get(i, j)))
            .collect()
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.size, rhs.size, "matmul of differently sized matrices");
        let n = self.size;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self.get(i, l);
                if a == S::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.get(l, j);
                }
            }
        }
        out
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn is_symmetric(&self, tol: S) -> bool {
        (0..self.size).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Nonnegative entries with every row and column summing to one.
    pub fn is_doubly_stochastic(&self, tol: S) -> bool {
        self.data.iter().all(|&a| a >= -tol)
            && self.row_sums().iter().all(|&s| (s - S::one()).abs() <= tol)
            && self.col_sums().iter().all(|&s| (s - S::one()).abs() <= tol)
    }

    pub fn entries(&self) -> &[S] {
        &self.data
    }
}

impl<S: Scalar> Index<(usize, usize)> for SquareMatrix<S> {
    type Output = S;

    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.size + j]
    }
}
