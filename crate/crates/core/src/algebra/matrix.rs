//! Dense row-major matrices over a [`Field`] with exact Gaussian elimination.

use std::fmt;

use super::{AlgebraError, Field};

/// Where a square matrix loses rank; see [`Matrix::dependency`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dependency {
    /// Changing this nonzero entry to any other value raises the rank.
    Entry(usize, usize),
    /// Rows taking part in a dependency.
    Rows(Vec<usize>),
}

#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Matrix {}x{} over {}",
            self.rows,
            self.cols,
            self.field.spec()
        )?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Self {
        Self {
            field: field.clone(),
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: &Field, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from row-major data; values must already be reduced.
    pub fn from_vec(field: &Field, rows: usize, cols: usize, data: Vec<u32>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "entries length must equal rows * cols"
        );
        debug_assert!(data.iter().all(|&v| v < field.order()));
        Self {
            field: field.clone(),
            rows,
            cols,
            data,
        }
    }

    pub fn from_rows(field: &Field, rows: &[Vec<u32>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend(r.iter().map(|&v| v % field.order()));
        }
        Self {
            field: field.clone(),
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// A single-column matrix.
    pub fn column(field: &Field, values: &[u32]) -> Self {
        Self::from_vec(field, values.len(), 1, values.to_vec())
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [u32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col_values(&self, c: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(&self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix, AlgebraError> {
        self.check_field(other)?;
        if self.cols != other.rows {
            return Err(AlgebraError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(&self.field, self.rows, other.cols);
        for r in 0..self.rows {
            let mut acc = vec![0u32; other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                self.field.axpy(&mut acc, a, other.row(k));
            }
            out.row_mut(r).copy_from_slice(&acc);
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[u32]) -> Vec<u32> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| self.field.dot(self.row(r), v))
            .collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            data.extend_from_slice(self.row(r));
        }
        Matrix::from_vec(&self.field, idx.len(), self.cols, data)
    }

    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(idx.iter().map(|&c| row[c]));
        }
        Matrix::from_vec(&self.field, self.rows, idx.len(), data)
    }

    pub fn vstack(&self, other: &Matrix) -> Result<Matrix, AlgebraError> {
        self.check_field(other)?;
        if self.cols != other.cols && self.rows > 0 && other.rows > 0 {
            return Err(AlgebraError::DimensionMismatch(
                "vstack column count".into(),
            ));
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix::from_vec(
            &self.field,
            self.rows + other.rows,
            cols,
            data,
        ))
    }

    pub fn push_row(&mut self, row: &[u32]) {
        if self.rows == 0 {
            self.cols = row.len();
        }
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    fn check_field(&self, other: &Matrix) -> Result<(), AlgebraError> {
        if self.field != other.field {
            return Err(AlgebraError::FieldMismatch {
                left: self.field.spec(),
                right: other.field.spec(),
            });
        }
        Ok(())
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (head, tail) = self.data.split_at_mut(hi * self.cols);
        head[lo * self.cols..(lo + 1) * self.cols].swap_with_slice(&mut tail[..self.cols]);
    }

    /// `row[dst] += c * row[src]` restricted to columns `from..`.
    fn row_axpy(&mut self, dst: usize, c: u32, src: usize, from: usize) {
        let cols = self.cols;
        let (d, s) = if dst < src {
            let (head, tail) = self.data.split_at_mut(src * cols);
            (&mut head[dst * cols..(dst + 1) * cols], &tail[..cols])
        } else {
            let (head, tail) = self.data.split_at_mut(dst * cols);
            (&mut tail[..cols], &head[src * cols..(src + 1) * cols])
        };
        self.field.axpy(&mut d[from..], c, &s[from..]);
    }

    /// Forward elimination over the first `pivot_cols` columns with
    /// first-nonzero pivoting. Pivot rows are normalized to a leading 1.
    /// Returns the pivot column of each of the leading `rank` rows.
    fn forward_eliminate(&mut self, pivot_cols: usize) -> Vec<usize> {
        let f = self.field.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..pivot_cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = f.inv(self.get(r, c)).expect("pivot is nonzero");
            let cols = self.cols;
            f.scale(&mut self.data[r * cols + c..(r + 1) * cols], inv);
            for i in r + 1..self.rows {
                let v = self.get(i, c);
                if v != 0 {
                    self.row_axpy(i, f.neg(v), r, c);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.forward_eliminate(self.cols).len()
    }

    /// Connected blocks of the row/column incidence graph of the nonzero
    /// entries, as `(rows, cols)` pairs. Rows or columns that are entirely
    /// zero form singleton blocks.
    pub fn blocks(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let (nr, nc) = (self.rows, self.cols);
        let mut parent: Vec<usize> = (0..nr + nc).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for r in 0..nr {
            for (c, &v) in self.row(r).iter().enumerate() {
                if v != 0 {
                    let (a, b) = (find(&mut parent, r), find(&mut parent, nr + c));
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
        }
        let mut index = vec![usize::MAX; nr + nc];
        let mut out: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for v in 0..nr + nc {
            let root = find(&mut parent, v);
            if index[root] == usize::MAX {
                index[root] = out.len();
                out.push((Vec::new(), Vec::new()));
            }
            let block = &mut out[index[root]];
            if v < nr {
                block.0.push(v);
            } else {
                block.1.push(v - nr);
            }
        }
        out
    }

    /// Rank computed independently on each block of [`Matrix::blocks`].
    pub fn block_rank(&self) -> usize {
        self.blocks()
            .into_iter()
            .filter(|(r, c)| !r.is_empty() && !c.is_empty())
            .map(|(r, c)| self.select_rows(&r).select_cols(&c).rank())
            .sum()
    }

    /// Locates a rank deficiency of a square matrix.
    ///
    /// Prefers a single nonzero entry `(r, c)` with `y_r x_c != 0` for a
    /// left null vector `y` and right null vector `x`: changing that entry
    /// to any other value raises the rank by one.
    pub fn dependency(&self) -> Option<Dependency> {
        for (rows, cols) in self.blocks() {
            if rows.is_empty() {
                continue;
            }
            if rows.len() != cols.len() {
                if rows.len() > cols.len() {
                    return Some(Dependency::Rows(rows));
                }
                continue;
            }
            let sub = self.select_rows(&rows).select_cols(&cols);
            if sub.rank() == rows.len() {
                continue;
            }
            let y = sub.transpose().kernel_vector().expect("dependent rows");
            let x = sub.kernel_vector().expect("dependent columns");
            for (ri, &yr) in y.iter().enumerate() {
                if yr == 0 {
                    continue;
                }
                for (ci, &xc) in x.iter().enumerate() {
                    if xc != 0 && sub.get(ri, ci) != 0 {
                        return Some(Dependency::Entry(rows[ri], cols[ci]));
                    }
                }
            }
            let support = rows
                .iter()
                .zip(&y)
                .filter(|(_, &v)| v != 0)
                .map(|(&r, _)| r)
                .collect();
            return Some(Dependency::Rows(support));
        }
        None
    }

    /// A nonzero `x` with `self * x = 0`, when the columns are dependent.
    pub fn kernel_vector(&self) -> Option<Vec<u32>> {
        let mut m = self.clone();
        let pivots = m.forward_eliminate(self.cols);
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let free = (0..self.cols).find(|&c| !is_pivot[c])?;
        let f = &self.field;
        let mut x = vec![0; self.cols];
        x[free] = 1;
        for (i, &p) in pivots.iter().enumerate().rev() {
            let row = m.row(i);
            let s = (p + 1..self.cols).fold(0, |acc, j| f.add(acc, f.mul(row[j], x[j])));
            x[p] = f.neg(s);
        }
        Some(x)
    }

    /// Solves `self * x = b` for `x`, where `self` is square or tall.
    ///
    /// Fails with [`AlgebraError::Singular`] when the columns of `self` are
    /// dependent and with [`AlgebraError::Inconsistent`] when `b` leaves the
    /// column space.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix, AlgebraError> {
        self.check_field(b)?;
        if b.rows != self.rows {
            return Err(AlgebraError::DimensionMismatch(format!(
                "lhs has {} rows, rhs has {}",
                self.rows, b.rows
            )));
        }
        let n = self.cols;
        let s = b.cols;
        let width = n + s;
        let mut aug = Matrix::zeros(&self.field, self.rows, width);
        for r in 0..self.rows {
            aug.row_mut(r)[..n].copy_from_slice(self.row(r));
            aug.row_mut(r)[n..].copy_from_slice(b.row(r));
        }
        let pivots = aug.forward_eliminate(n);
        let rank = pivots.len();
        for r in rank..aug.rows {
            if aug.row(r)[n..].iter().any(|&v| v != 0) {
                return Err(AlgebraError::Inconsistent { rank });
            }
        }
        if rank < n {
            return Err(AlgebraError::Singular { rank, expected: n });
        }
        // Back substitution; pivots[i] == i here.
        let f = self.field.clone();
        let mut x = Matrix::zeros(&self.field, n, s);
        for i in (0..n).rev() {
            let mut acc = aug.row(i)[n..].to_vec();
            for j in i + 1..n {
                let a = aug.get(i, j);
                if a != 0 {
                    f.axpy(&mut acc, f.neg(a), x.row(j));
                }
            }
            x.row_mut(i).copy_from_slice(&acc);
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix, AlgebraError> {
        if self.rows != self.cols {
            return Err(AlgebraError::DimensionMismatch(
                "inverse of non-square matrix".into(),
            ));
        }
        self.solve(&Matrix::identity(&self.field, self.rows))
    }
}

pub fn mat_rank(m: &Matrix) -> usize {
    m.rank()
}

pub fn mat_solve(a: &Matrix, b: &Matrix) -> Result<Matrix, AlgebraError> {
    a.solve(b)
}
