//! Dense matrices over GF(2^r) and exact Gaussian elimination.

use crate::galois::{Fe, Field};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Fe>,
}

/// Outcome of solving `A x = b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    Inconsistent,
    Unique(Vec<Fe>),
    /// Consistent but rank-deficient. `particular` sets free variables to zero;
    /// `pinned[j]` is true iff x_j takes the same value in every solution.
    Underdetermined { particular: Vec<Fe>, pinned: Vec<bool> },
}

impl Solution {
    pub fn is_consistent(&self) -> bool {
        !matches!(self, Solution::Inconsistent)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![Fe::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Fe::ONE);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Fe>]) -> Matrix {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<Fe>]) -> Matrix {
        let mut m = Matrix::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (i, &v) in col.iter().enumerate() {
                m.set(i, j, v);
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

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Fe {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Fe) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Fe] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Fe> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Submatrix with the given rows and columns, in the order given.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                m.set(i, j, self.get(r, c));
            }
        }
        m
    }

    pub fn mul_vec(&self, field: &Field, x: &[Fe]) -> Vec<Fe> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .fold(Fe::ZERO, |acc, (&a, &b)| acc + field.mul(a, b))
            })
            .collect()
    }

    pub fn rank(&self, field: &Field) -> usize {
        let mut m = self.clone();
        m.row_reduce(field, self.cols).len()
    }

    pub fn has_full_column_rank(&self, field: &Field) -> bool {
        self.cols <= self.rows && self.rank(field) == self.cols
    }

    /// In-place reduced row echelon form over the first `limit` columns.
    /// Returns the pivot columns.
    fn row_reduce(&mut self, field: &Field, limit: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut lead = 0;
        for c in 0..limit {
            if lead == self.rows {
                break;
            }
            let Some(p) = (lead..self.rows).find(|&r| !self.get(r, c).is_zero()) else {
                continue;
            };
            self.swap_rows(lead, p);
            let inv = field.inv(self.get(lead, c)).expect("nonzero pivot");
            for j in 0..self.cols {
                let v = field.mul(self.get(lead, j), inv);
                self.set(lead, j, v);
            }
            for r in 0..self.rows {
                if r == lead {
                    continue;
                }
                let factor = self.get(r, c);
                if factor.is_zero() {
                    continue;
                }
                for j in 0..self.cols {
                    let v = self.get(r, j) + field.mul(factor, self.get(lead, j));
                    self.set(r, j, v);
                }
            }
            pivots.push(c);
            lead += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Solve `self * x = b` exactly.
    pub fn solve(&self, field: &Field, b: &[Fe]) -> Solution {
        assert_eq!(b.len(), self.rows);
        let n = self.cols;
        let mut aug = Matrix::zeros(self.rows, n + 1);
        for r in 0..self.rows {
            for c in 0..n {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, n, b[r]);
        }
        let pivots = aug.row_reduce(field, n);
        let rank = pivots.len();
        if (rank..aug.rows).any(|r| !aug.get(r, n).is_zero()) {
            return Solution::Inconsistent;
        }
        let mut x = vec![Fe::ZERO; n];
        for (r, &c) in pivots.iter().enumerate() {
            x[c] = aug.get(r, n);
        }
        if rank == n {
            return Solution::Unique(x);
        }
        let is_pivot = {
            let mut v = vec![false; n];
            for &c in &pivots {
                v[c] = true;
            }
            v
        };
        // A pivot variable is pinned iff its row has no free-column entries.
        let mut pinned = vec![false; n];
        for (r, &c) in pivots.iter().enumerate() {
            pinned[c] = (0..n).all(|j| is_pivot[j] || aug.get(r, j).is_zero());
        }
        Solution::Underdetermined { particular: x, pinned }
    }

    /// A nonzero vector in the right null space, if one exists.
    pub fn null_vector(&self, field: &Field) -> Option<Vec<Fe>> {
        let mut m = self.clone();
        let pivots = m.row_reduce(field, self.cols);
        let free = (0..self.cols).find(|c| !pivots.contains(c))?;
        let mut x = vec![Fe::ZERO; self.cols];
        x[free] = Fe::ONE;
        for (r, &c) in pivots.iter().enumerate() {
            // char 2: x_c = -(entry * 1) = entry
            x[c] = m.get(r, free);
        }
        Some(x)
    }
}
