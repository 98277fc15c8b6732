//! Bruhat–Schwartz functions on `Q_p^n` with values in `E_N`, stored as dense
//! tables on a lattice cell.
//!
//! A cell `(j, k)` stands for the functions supported on `p^j O^n` and
//! constant on the cosets of `p^k O^n`. Coset representatives are the vectors
//! `c·p^j` with integer `0 <= c_t < p^{k-j}`, indexed in mixed radix with the
//! first coordinate most significant. Every value is kept in canonical form:
//! largest `j`, then smallest `k`; the zero function sits on the cell `(0, 0)`.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::cyclo::{CyclotomicNumber, GaloisElement, Subfield, Tower};
use crate::numtheory::inv_mod;
use crate::rational::{pow_p, scaled_residue, valuation, Q};
use crate::{Error, Result};

/// Largest table size built without complaint.
pub const DEFAULT_CELL_LIMIT: u128 = 1 << 22;

#[derive(Debug, Clone, Eq)]
pub struct SchwartzFunction {
    tower: Tower,
    n: usize,
    j: i64,
    k: i64,
    table: Vec<CyclotomicNumber>,
}

/// Number of cosets in the cell, checked against `limit`.
pub fn cell_size(p: u64, n: usize, j: i64, k: i64, limit: u128) -> Result<usize> {
    if j > k {
        return Err(Error::InvalidCell { j, k });
    }
    let exp = (k - j) as u128 * n as u128;
    let entries = u32::try_from(exp)
        .ok()
        .and_then(|e| (p as u128).checked_pow(e))
        .unwrap_or(u128::MAX);
    if entries > limit {
        return Err(Error::CellOverflow { entries, limit });
    }
    Ok(entries as usize)
}

// Values compare across tower depths, like the values themselves.
impl PartialEq for SchwartzFunction {
    fn eq(&self, other: &Self) -> bool {
        self.tower.p() == other.tower.p()
            && (self.n, self.j, self.k) == (other.n, other.j, other.k)
            && self.table == other.table
    }
}

impl SchwartzFunction {
    pub fn zero(tower: Tower, n: usize) -> Self {
        SchwartzFunction { tower, n, j: 0, k: 0, table: vec![tower.zero()] }
    }

    /// The indicator of `p^j O^n`.
    pub fn lattice_indicator(tower: Tower, n: usize, j: i64) -> Self {
        SchwartzFunction { tower, n, j, k: j, table: vec![tower.one()] }
    }

    /// The indicator of the coset `c + p^k O^n`.
    pub fn atom(tower: Tower, c: &[Q], k: i64) -> Result<Self> {
        let p = tower.p();
        let j = c
            .iter()
            .filter_map(|x| valuation(x, p))
            .fold(k, i64::min);
        let n = c.len();
        let size = cell_size(p, n, j, k, DEFAULT_CELL_LIMIT)?;
        let mut table = vec![tower.zero(); size];
        let idx = index_in_cell(p, n, j, k, c).expect("coset lies in its own cell");
        table[idx] = tower.one();
        Self::from_table(tower, n, j, k, table)
    }

    /// Every atom `1_{c + p^k O^n}` with `c ∈ p^j O^n`, in table order.
    pub fn atoms(tower: Tower, n: usize, j: i64, k: i64, limit: u128) -> Result<Vec<Self>> {
        let size = cell_size(tower.p(), n, j, k, limit)?;
        (0..size)
            .map(|idx| Self::atom(tower, &rep_of(tower.p(), n, j, k, idx), k))
            .collect()
    }

    /// Builds from a raw table on the cell `(j, k)` and canonicalizes.
    pub fn from_table(
        tower: Tower,
        n: usize,
        j: i64,
        k: i64,
        table: Vec<CyclotomicNumber>,
    ) -> Result<Self> {
        let size = cell_size(tower.p(), n, j, k, u128::MAX)?;
        if table.len() != size {
            return Err(Error::DimensionMismatch(alloc::format!(
                "table has {} entries, cell needs {size}",
                table.len()
            )));
        }
        let depth = tower.depth();
        let table = table
            .into_iter()
            .map(|x| if x.depth() < depth { x.lift(depth) } else { x })
            .collect();
        let mut f = SchwartzFunction { tower, n, j, k, table };
        f.canonicalize();
        Ok(f)
    }

    /// Tabulates `f` on the coset representatives of the cell `(j, k)`.
    pub fn from_fn<F>(tower: Tower, n: usize, j: i64, k: i64, limit: u128, mut f: F) -> Result<Self>
    where
        F: FnMut(&[Q]) -> Result<CyclotomicNumber>,
    {
        let size = cell_size(tower.p(), n, j, k, limit)?;
        let mut table = Vec::with_capacity(size);
        for idx in 0..size {
            let x = rep_of(tower.p(), n, j, k, idx);
            table.push(f(&x)?);
        }
        Self::from_table(tower, n, j, k, table)
    }

    pub fn tower(&self) -> Tower {
        self.tower
    }

    pub fn p(&self) -> u64 {
        self.tower.p()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(j, k)`.
    pub fn cell(&self) -> (i64, i64) {
        (self.j, self.k)
    }

    pub fn width(&self) -> i64 {
        self.k - self.j
    }

    pub fn table(&self) -> &[CyclotomicNumber] {
        &self.table
    }

    pub fn is_zero(&self) -> bool {
        self.table.iter().all(CyclotomicNumber::is_zero)
    }

    /// Coset representative of table slot `idx`.
    pub fn rep(&self, idx: usize) -> Vec<Q> {
        rep_of(self.p(), self.n, self.j, self.k, idx)
    }

    /// `(representative, value)` for every non-zero table entry.
    pub fn support(&self) -> Vec<(Vec<Q>, &CyclotomicNumber)> {
        self.table
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| (self.rep(i), v))
            .collect()
    }

    pub fn eval(&self, x: &[Q]) -> CyclotomicNumber {
        assert_eq!(x.len(), self.n, "point dimension");
        match index_in_cell(self.p(), self.n, self.j, self.k, x) {
            Some(i) => self.table[i].clone(),
            None => self.tower.zero(),
        }
    }

    /// Table slot of `x`, or `None` outside the support lattice.
    pub fn index_of(&self, x: &[Q]) -> Option<usize> {
        index_in_cell(self.p(), self.n, self.j, self.k, x)
    }

    /// The same function tabulated on a finer cell `(j2, k2)`, `j2 <= j`,
    /// `k2 >= k`; the result is not canonicalized.
    pub fn refine(&self, j2: i64, k2: i64, limit: u128) -> Result<Vec<CyclotomicNumber>> {
        if j2 > self.j || k2 < self.k {
            return Err(Error::InvalidCell { j: j2, k: k2 });
        }
        let p = self.p();
        let size = cell_size(p, self.n, j2, k2, limit)?;
        let radix2 = p.pow((k2 - j2) as u32);
        let radix = p.pow((self.k - self.j) as u32);
        let step = p.pow((self.j - j2) as u32);
        let mut out = Vec::with_capacity(size);
        let mut coords = vec![0u64; self.n];
        for idx in 0..size {
            digits(idx as u64, radix2, &mut coords);
            let mut old = 0u64;
            let mut inside = true;
            for &c in &coords {
                if c % step != 0 {
                    inside = false;
                    break;
                }
                old = old * radix + (c / step) % radix;
            }
            out.push(if inside { self.table[old as usize].clone() } else { self.tower.zero() });
        }
        Ok(out)
    }

    /// Both tables on the common cell `(min j, max k)`.
    fn aligned(&self, other: &Self) -> (i64, i64, Vec<CyclotomicNumber>, Vec<CyclotomicNumber>) {
        assert_eq!(self.n, other.n, "Schwartz functions of different dimension");
        let j = self.j.min(other.j);
        let k = self.k.max(other.k);
        let a = self.refine(j, k, u128::MAX).expect("common cell");
        let b = other.refine(j, k, u128::MAX).expect("common cell");
        (j, k, a, b)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (j, k, a, b) = self.aligned(other);
        let tower = deeper(self.tower, other.tower);
        let table = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        Self::from_table(tower, self.n, j, k, table).expect("aligned tables")
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&self.tower.from_int(-1)))
    }

    pub fn scale(&self, c: &CyclotomicNumber) -> Self {
        let tower = deeper(self.tower, c.tower());
        let table = self.table.iter().map(|x| x * c).collect();
        Self::from_table(tower, self.n, self.j, self.k, table).expect("same cell")
    }

    pub fn neg(&self) -> Self {
        self.scale(&self.tower.from_int(-1))
    }

    pub fn linear_combination(terms: &[(CyclotomicNumber, &SchwartzFunction)]) -> Option<Self> {
        let mut iter = terms.iter();
        let (c, f) = iter.next()?;
        let mut acc = f.scale(c);
        for (c, f) in iter {
            acc = acc.add(&f.scale(c));
        }
        Some(acc)
    }

    /// Applies `σ` to every value.
    pub fn galois(&self, sigma: &GaloisElement) -> Self {
        let table = self.table.iter().map(|x| x.apply(sigma)).collect();
        let tower = deeper(self.tower, sigma.tower());
        Self::from_table(tower, self.n, self.j, self.k, table).expect("same cell")
    }

    pub fn is_rational_over(&self, field: Subfield) -> bool {
        self.table.iter().all(|x| x.in_subfield(field))
    }

    /// `x ↦ φ(r^{-1} x)` for a `p`-adic unit `r`; only `r mod p^{k-j}` matters.
    pub fn dilate_unit(&self, r: &Q) -> Result<Self> {
        let p = self.p();
        if valuation(r, p) != Some(0) {
            return Err(Error::NotAUnit { value: crate::rational::fmt_q(r), modulus: p });
        }
        let radix = p.pow(self.width() as u32);
        let r = scaled_residue(r, p, 0, radix.max(1));
        let rinv = inv_mod(r, radix.max(1)).unwrap_or(0);
        Ok(self.dilate_residue(rinv))
    }

    /// `x ↦ φ(s x)` for an integer `s` prime to `p`, reduced mod `p^{k-j}`.
    pub(crate) fn dilate_residue(&self, s: u64) -> Self {
        let radix = self.p().pow(self.width() as u32);
        let mut coords = vec![0u64; self.n];
        let table = (0..self.table.len())
            .map(|idx| {
                digits(idx as u64, radix, &mut coords);
                let src = coords
                    .iter()
                    .fold(0u64, |acc, &c| acc * radix + ((c as u128 * s as u128) % radix as u128) as u64);
                self.table[src as usize].clone()
            })
            .collect();
        SchwartzFunction { tower: self.tower, n: self.n, j: self.j, k: self.k, table }
    }

    /// Lifts every value to the tower of depth `depth`.
    pub fn lift(&self, depth: u32) -> Self {
        let tower = self.tower.with_depth(depth).expect("valid depth");
        SchwartzFunction {
            tower,
            n: self.n,
            j: self.j,
            k: self.k,
            table: self.table.iter().map(|x| x.lift(depth)).collect(),
        }
    }

    fn canonicalize(&mut self) {
        let p = self.p();
        if self.is_zero() {
            *self = Self::zero(self.tower, self.n);
            return;
        }
        // Raise j while the support allows it.
        while self.j < self.k {
            let radix = p.pow(self.width() as u32);
            let mut coords = vec![0u64; self.n];
            let all_inside = self.table.iter().enumerate().all(|(idx, v)| {
                v.is_zero() || {
                    digits(idx as u64, radix, &mut coords);
                    coords.iter().all(|c| c % p == 0)
                }
            });
            if !all_inside {
                break;
            }
            let new_radix = radix / p;
            let size = new_radix.pow(self.n as u32) as usize;
            let mut table = Vec::with_capacity(size);
            for idx in 0..size {
                digits(idx as u64, new_radix, &mut coords);
                let old = coords.iter().fold(0u64, |acc, &c| acc * radix + c * p);
                table.push(core::mem::replace(&mut self.table[old as usize], self.tower.zero()));
            }
            self.table = table;
            self.j += 1;
        }
        // Lower k while the function is constant on the coarser cosets.
        while self.k > self.j {
            let radix = p.pow(self.width() as u32);
            let new_radix = radix / p;
            let mut coords = vec![0u64; self.n];
            let constant = (0..self.table.len()).all(|idx| {
                digits(idx as u64, radix, &mut coords);
                let rep = coords.iter().fold(0u64, |acc, &c| acc * radix + c % new_radix);
                self.table[idx] == self.table[rep as usize]
            });
            if !constant {
                break;
            }
            let size = new_radix.pow(self.n as u32) as usize;
            let mut table = Vec::with_capacity(size);
            for idx in 0..size {
                digits(idx as u64, new_radix, &mut coords);
                let old = coords.iter().fold(0u64, |acc, &c| acc * radix + c);
                table.push(core::mem::replace(&mut self.table[old as usize], self.tower.zero()));
            }
            self.table = table;
            self.k -= 1;
        }
    }
}

fn deeper(a: Tower, b: Tower) -> Tower {
    if a.depth() >= b.depth() {
        a
    } else {
        b
    }
}

/// Writes the base-`radix` digits of `idx` into `out`, most significant first.
pub(crate) fn digits(mut idx: u64, radix: u64, out: &mut [u64]) {
    for slot in out.iter_mut().rev() {
        if radix <= 1 {
            *slot = 0;
        } else {
            *slot = idx % radix;
            idx /= radix;
        }
    }
}

/// The representative `c·p^j` of slot `idx` of the cell `(j, k)`.
pub fn rep_of(p: u64, n: usize, j: i64, k: i64, idx: usize) -> Vec<Q> {
    let radix = p.pow((k - j) as u32);
    let mut coords = vec![0u64; n];
    digits(idx as u64, radix, &mut coords);
    let scale = pow_p(p, j);
    coords
        .iter()
        .map(|&c| Q::from_integer(BigInt::from(c)) * &scale)
        .collect()
}

/// Slot of the coset of `x` in the cell `(j, k)`, or `None` if some
/// coordinate has valuation below `j`.
pub fn index_in_cell(p: u64, n: usize, j: i64, k: i64, x: &[Q]) -> Option<usize> {
    debug_assert_eq!(x.len(), n);
    let radix = p.pow((k - j) as u32);
    let mut idx = 0u64;
    for xi in x {
        if let Some(v) = valuation(xi, p) {
            if v < j {
                return None;
            }
        }
        let c = if xi.is_zero() || radix == 1 {
            0
        } else {
            scaled_residue(xi, p, -j, radix)
        };
        idx = idx * radix + c;
    }
    Some(idx.to_usize().expect("index fits"))
}
