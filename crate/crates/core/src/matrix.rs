//! Dense matrices over `Q`, in the row-vector convention (`v ↦ v·M`).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut, Mul};

use num_traits::{One, Zero};

use crate::rational::{fmt_q, min_val, valuation, Q};
use crate::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Q::one();
        }
        m
    }

    pub fn scalar(n: usize, s: &Q) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s.clone();
        }
        m
    }

    pub fn diagonal(entries: &[Q]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, e) in entries.iter().enumerate() {
            m[(i, i)] = e.clone();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch(alloc::string::String::from("ragged rows")));
        }
        Ok(Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<Q>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn scale(&self, s: &Q) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Mat) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Self {
        self.add(&other.scale(&-Q::one()))
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Q::one())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }

    /// The sub-matrix of rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        let mut b = Self::zeros(r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                b[(i - r0, j - c0)] = self[(i, j)].clone();
            }
        }
        b
    }

    /// Writes `b` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)].clone();
            }
        }
    }

    /// `[[a, b], [c, d]]` from four equally sized square blocks.
    pub fn from_blocks(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Self {
        let n = a.rows;
        let mut m = Self::zeros(2 * n, 2 * n);
        m.set_block(0, 0, a);
        m.set_block(0, n, b);
        m.set_block(n, 0, c);
        m.set_block(n, n, d);
        m
    }

    /// Row vector times matrix.
    pub fn apply_row(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols)
            .map(|j| {
                let mut acc = Q::zero();
                for (i, x) in v.iter().enumerate() {
                    if !x.is_zero() {
                        let e = &self[(i, j)];
                        if !e.is_zero() {
                            acc += x * e;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    pub fn det(&self) -> Q {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut det = Q::one();
        for col in 0..n {
            let Some(piv) = (col..n).find(|&r| !m[(r, col)].is_zero()) else {
                return Q::zero();
            };
            if piv != col {
                m.swap_rows(piv, col);
                det = -det;
            }
            let pv = m[(col, col)].clone();
            det *= &pv;
            for r in col + 1..n {
                if m[(r, col)].is_zero() {
                    continue;
                }
                let f = &m[(r, col)] / &pv;
                for c in col..n {
                    let delta = &f * &m[(col, c)];
                    m[(r, c)] -= delta;
                }
            }
        }
        det
    }

    pub fn inverse(&self) -> Result<Mat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let piv = (col..n).find(|&r| !m[(r, col)].is_zero()).ok_or(Error::SingularMatrix)?;
            m.swap_rows(piv, col);
            inv.swap_rows(piv, col);
            let pv = m[(col, col)].clone();
            for c in 0..n {
                m[(col, c)] /= &pv;
                inv[(col, c)] /= &pv;
            }
            for r in 0..n {
                if r == col || m[(r, col)].is_zero() {
                    continue;
                }
                let f = m[(r, col)].clone();
                for c in 0..n {
                    let dm = &f * &m[(col, c)];
                    m[(r, c)] -= dm;
                    let di = &f * &inv[(col, c)];
                    inv[(r, c)] -= di;
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for r in 0..self.rows {
            self.data.swap(r * self.cols + a, r * self.cols + b);
        }
    }

    pub fn rank(&self) -> usize {
        self.rank_normal_form(None).0
    }

    /// Finds invertible `left`, `right` with `left · self · right = diag(I_r, 0)`,
    /// returning `(r, left, right)`. With a prime given, pivots of least
    /// `p`-adic valuation are preferred.
    pub fn rank_normal_form(&self, p: Option<u64>) -> (usize, Mat, Mat) {
        let (rows, cols) = (self.rows, self.cols);
        let mut m = self.clone();
        let mut left = Mat::identity(rows);
        let mut right = Mat::identity(cols);
        let mut r = 0;
        while r < rows.min(cols) {
            let mut best: Option<(usize, usize, i64)> = None;
            for i in r..rows {
                for j in r..cols {
                    if m[(i, j)].is_zero() {
                        continue;
                    }
                    let v = p.map_or(0, |p| valuation(&m[(i, j)], p).unwrap_or(0));
                    if best.is_none_or(|(_, _, bv)| v < bv) {
                        best = Some((i, j, v));
                    }
                }
            }
            let Some((pi, pj, _)) = best else { break };
            m.swap_rows(pi, r);
            left.swap_rows(pi, r);
            m.swap_cols(pj, r);
            right.swap_cols(pj, r);
            let pv = m[(r, r)].clone();
            for c in 0..cols {
                m[(r, c)] /= &pv;
            }
            for c in 0..rows {
                left[(r, c)] /= &pv;
            }
            for i in 0..rows {
                if i == r || m[(i, r)].is_zero() {
                    continue;
                }
                let f = m[(i, r)].clone();
                for c in 0..cols {
                    let d = &f * &m[(r, c)];
                    m[(i, c)] -= d;
                }
                for c in 0..rows {
                    let d = &f * &left[(r, c)];
                    left[(i, c)] -= d;
                }
            }
            for j in 0..cols {
                if j == r || m[(r, j)].is_zero() {
                    continue;
                }
                let f = m[(r, j)].clone();
                for i in 0..rows {
                    let d = &f * &m[(i, r)];
                    m[(i, j)] -= d;
                }
                for i in 0..cols {
                    let d = &f * &right[(i, r)];
                    right[(i, j)] -= d;
                }
            }
            r += 1;
        }
        (r, left, right)
    }

    /// Least `p`-adic valuation of the entries; `None` for the zero matrix.
    pub fn min_valuation(&self, p: u64) -> Option<i64> {
        self.data.iter().fold(None, |acc, x| min_val(acc, valuation(x, p)))
    }

    pub fn entries(&self) -> &[Q] {
        &self.data
    }

    /// Entries formatted row by row as `"a/b"`.
    pub fn entry_strings(&self) -> Vec<Vec<alloc::string::String>> {
        (0..self.rows).map(|i| self.row(i).iter().map(fmt_q).collect()).collect()
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = Q;
    fn index(&self, (i, j): (usize, usize)) -> &Q {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Q {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul<&Mat> for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matrix dimensions");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = &rhs[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }
}

impl Mul<Mat> for Mat {
    type Output = Mat;
    fn mul(self, rhs: Mat) -> Mat {
        &self * &rhs
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for i in 0..self.rows {
            if i > 0 {
                f.write_str("; ")?;
            }
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                f.write_str(&fmt_q(x))?;
            }
        }
        f.write_str("]")
    }
}
