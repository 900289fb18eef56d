//! Dense matrices over GF(q^m) with the elimination primitives the decoder
//! and the LIF machinery rely on: rank and reduced column echelon form.

use crate::field::{Field, FieldSpec};
use crate::{Error, Result};

#[derive(Clone)]
pub struct Matrix {
    spec: FieldSpec,
    rows: usize,
    cols: usize,
    /// Row-major entries, encoded field elements.
    data: Vec<u16>,
}

impl Matrix {
    pub fn zero(spec: FieldSpec, rows: usize, cols: usize) -> Self {
        Matrix {
            spec,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(spec: FieldSpec, n: usize) -> Self {
        let mut m = Matrix::zero(spec, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(spec: FieldSpec, rows: &[Vec<u16>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut m = Matrix::zero(spec, nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::InvalidArgument("ragged matrix rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if v as u32 >= spec.size() {
                    return Err(Error::Config(format!("entry {v} out of range for {spec}")));
                }
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    /// Parses one row per string of single base-q digits, e.g. `["10","01","11"]`.
    pub fn from_digit_rows(spec: FieldSpec, rows: &[&str]) -> Result<Self> {
        let parsed: Vec<Vec<u16>> = rows
            .iter()
            .map(|s| {
                s.chars()
                    .map(|c| {
                        c.to_digit(10)
                            .filter(|&d| d < spec.q() as u32)
                            .map(|d| d as u16)
                            .ok_or_else(|| {
                                Error::Parse {
                                    offset: 0,
                                    message: format!("invalid digit '{c}' for {spec}"),
                                }
                            })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Matrix::from_rows(spec, &parsed)
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn field(&self) -> &'static Field {
        self.spec.field()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u16 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u16) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<u16> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn row(&self, r: usize) -> &[u16] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Submatrix keeping the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut m = Matrix::zero(self.spec, rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            for c in 0..self.cols {
                m.set(i, c, self.get(r, c));
            }
        }
        m
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows || self.spec != rhs.spec {
            return Err(Error::InvalidArgument("matmul dimension/field mismatch".into()));
        }
        let f = self.field();
        let mut out = Matrix::zero(self.spec, self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = f.add(out.get(i, j), f.mul(a, rhs.get(k, j)));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for r in 0..self.rows {
            self.data.swap(r * self.cols + a, r * self.cols + b);
        }
    }

    /// Scales column `c` by `factor`.
    fn scale_col(&mut self, c: usize, factor: u16) {
        let f = self.field();
        for r in 0..self.rows {
            let v = f.mul(self.get(r, c), factor);
            self.set(r, c, v);
        }
    }

    /// column dst -= factor * column src
    fn axpy_col(&mut self, dst: usize, src: usize, factor: u16) {
        if factor == 0 {
            return;
        }
        let f = self.field();
        for r in 0..self.rows {
            let v = f.sub(self.get(r, dst), f.mul(factor, self.get(r, src)));
            self.set(r, dst, v);
        }
    }

    /// Reduced column echelon form. Returns `(h_hat, phi)` with
    /// `self * phi == h_hat`, `phi` invertible. In `h_hat`, pivot rows are
    /// strictly increasing across pivot columns, each pivot entry is 1 and a
    /// pivot row is zero in every other column.
    pub fn reduced_column_echelon(&self) -> (Matrix, Matrix) {
        let f = self.field();
        let mut h = self.clone();
        let mut phi = Matrix::identity(self.spec, self.cols);
        let mut pivot_col = 0usize;
        for row in 0..self.rows {
            if pivot_col == self.cols {
                break;
            }
            let Some(j) = (pivot_col..self.cols).find(|&j| h.get(row, j) != 0) else {
                continue;
            };
            h.swap_cols(j, pivot_col);
            phi.swap_cols(j, pivot_col);
            let inv = f.inv(h.get(row, pivot_col)).expect("pivot is nonzero");
            h.scale_col(pivot_col, inv);
            phi.scale_col(pivot_col, inv);
            for j2 in 0..self.cols {
                if j2 == pivot_col {
                    continue;
                }
                let factor = h.get(row, j2);
                h.axpy_col(j2, pivot_col, factor);
                phi.axpy_col(j2, pivot_col, factor);
            }
            pivot_col += 1;
        }
        (h, phi)
    }

    /// Rank over the matrix's field.
    pub fn rank(&self) -> usize {
        let (h, _) = self.reduced_column_echelon();
        (0..h.cols)
            .filter(|&j| (0..h.rows).any(|r| h.get(r, j) != 0))
            .count()
    }

    pub fn is_full_column_rank(&self) -> bool {
        self.cols > 0 && self.rank() == self.cols
    }

    /// Support of column `c`: row indices with nonzero entries.
    pub fn column_support(&self, c: usize) -> Vec<usize> {
        (0..self.rows).filter(|&r| self.get(r, c) != 0).collect()
    }

    /// Solves `self * w = unit(e)` for a column-combination vector `w`, where
    /// `unit(e)` has a 1 in row `target` and zeros elsewhere. Returns `None`
    /// when the unit vector is not in the column space.
    pub fn solve_unit_combination(&self, target: usize) -> Option<Vec<u16>> {
        let (h, phi) = self.reduced_column_echelon();
        for j in 0..h.cols {
            let support = h.column_support(j);
            if support.len() == 1 && support[0] == target && h.get(target, j) == 1 {
                return Some(phi.column(j));
            }
        }
        None
    }
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.rows == other.rows
            && self.cols == other.cols
            && self.data == other.data
    }
}

impl Eq for Matrix {}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Matrix {}x{} over {}", self.rows, self.cols, self.spec)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}
