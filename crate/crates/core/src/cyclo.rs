//! Exact arithmetic in the cyclotomic tower `E_N = Q(ζ_m)`, `m = 4 p^N`.
//!
//! Elements are integer coefficient vectors over the power basis of
//! `Q[x]/Φ_m(x)` with one positive common denominator, kept in lowest terms.
//! That form is canonical, so equality is structural. Values of different
//! depths over the same prime are lifted to the deeper tower on the fly.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use core::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::numtheory::{crt_mod4, factorize, gcd, is_prime, legendre, primitive_root_prime_power};
use crate::rational::{fmt_q, Q};
use crate::{Error, Result};

/// A level of the tower: an odd prime `p` and a depth `N >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tower {
    p: u64,
    depth: u32,
}

impl Tower {
    pub fn new(p: u64, depth: u32) -> Result<Self> {
        if p == 2 || !is_prime(p) {
            return Err(Error::InvalidPrime(p));
        }
        if depth < 1 {
            return Err(Error::InvalidDepth(depth));
        }
        Ok(Tower { p, depth })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `p^N`.
    pub fn pn(&self) -> u64 {
        self.p.pow(self.depth)
    }

    /// The conductor `m = 4 p^N`.
    pub fn conductor(&self) -> u64 {
        4 * self.pn()
    }

    /// `φ(m)`, the degree of `E_N` over `Q`.
    pub fn degree(&self) -> usize {
        (2 * (self.p - 1) * self.p.pow(self.depth - 1)) as usize
    }

    fn block(&self) -> usize {
        (2 * self.p.pow(self.depth - 1)) as usize
    }

    pub fn with_depth(&self, depth: u32) -> Result<Tower> {
        Tower::new(self.p, depth)
    }

    pub fn zero(&self) -> CyclotomicNumber {
        CyclotomicNumber {
            tower: *self,
            num: vec![BigInt::zero(); self.degree()],
            den: BigInt::one(),
        }
    }

    pub fn one(&self) -> CyclotomicNumber {
        self.from_rational(&Q::one())
    }

    pub fn from_int(&self, n: i64) -> CyclotomicNumber {
        self.from_rational(&Q::from_integer(BigInt::from(n)))
    }

    pub fn from_rational(&self, x: &Q) -> CyclotomicNumber {
        let mut num = vec![BigInt::zero(); self.degree()];
        num[0] = x.numer().clone();
        CyclotomicNumber::normalized(*self, num, x.denom().clone())
    }

    /// `ζ_m^e` for any integer `e`.
    pub fn zeta(&self, e: i64) -> CyclotomicNumber {
        let m = self.conductor() as i64;
        let mut acc = vec![BigInt::zero(); m as usize];
        acc[e.rem_euclid(m) as usize] = BigInt::one();
        CyclotomicNumber::from_unreduced(*self, acc, BigInt::one())
    }

    /// `ζ_{p^k}^a`; requires `k <= N`.
    pub fn zeta_pk(&self, k: u32, a: i64) -> Result<CyclotomicNumber> {
        if k > self.depth {
            return Err(Error::TowerTooShallow { needed: k, available: self.depth });
        }
        Ok(self.zeta(4 * self.p.pow(self.depth - k) as i64 * a))
    }

    /// `i = ζ_4`.
    pub fn i(&self) -> CyclotomicNumber {
        self.zeta(self.pn() as i64)
    }

    /// Builds `Σ c_e ζ_m^e` from exponent/coefficient pairs.
    pub fn from_powers(&self, terms: &[(i64, Q)]) -> CyclotomicNumber {
        let m = self.conductor() as i64;
        let den = terms
            .iter()
            .fold(BigInt::one(), |acc, (_, c)| acc.lcm(c.denom()));
        let mut acc = vec![BigInt::zero(); m as usize];
        for (e, c) in terms {
            acc[e.rem_euclid(m) as usize] += c.numer() * (&den / c.denom());
        }
        CyclotomicNumber::from_unreduced(*self, acc, den)
    }

    /// Reduces an exponent-indexed vector of length `m` modulo `Φ_m`, in place,
    /// and truncates it to the `φ(m)` basis coefficients.
    pub(crate) fn reduce(&self, acc: &mut Vec<BigInt>) {
        let phi = self.degree();
        let block = self.block();
        let p = self.p as usize;
        for e in (phi..acc.len()).rev() {
            if acc[e].is_zero() {
                continue;
            }
            let c = core::mem::take(&mut acc[e]);
            let base = e - phi;
            // x^φ = -Σ_{k<p-1} (-1)^k x^{k·block}
            for k in 0..p - 1 {
                if k % 2 == 0 {
                    acc[base + k * block] -= &c;
                } else {
                    acc[base + k * block] += &c;
                }
            }
        }
        acc.truncate(phi);
        acc.resize(phi, BigInt::zero());
    }

    /// Generator of order 2: exponent `≡ -1 mod 4`, `≡ 1 mod p^N`.
    pub fn complex_generator(&self) -> GaloisElement {
        GaloisElement { tower: *self, exponent: crt_mod4(1, self.pn(), 3) }
    }

    /// Generator of the cyclic part: a primitive root mod `p^N`, `≡ 1 mod 4`.
    pub fn cyclic_generator(&self) -> GaloisElement {
        let g = primitive_root_prime_power(self.p, self.depth);
        GaloisElement { tower: *self, exponent: crt_mod4(g, self.pn(), 1) }
    }

    /// Order of the cyclic part, `(p-1) p^{N-1}`.
    pub fn cyclic_order(&self) -> u64 {
        (self.p - 1) * self.p.pow(self.depth - 1)
    }

    /// All units mod `m`, in increasing order.
    pub fn units(&self) -> Vec<u64> {
        let m = self.conductor();
        (1..m).filter(|&s| gcd(s, m) == 1).collect()
    }

    pub fn galois(&self, exponent: i64) -> Result<GaloisElement> {
        GaloisElement::new(*self, exponent)
    }

    pub fn sqrt_table(&self) -> SqrtTable {
        SqrtTable::new(*self)
    }
}

/// An exact element of `Q(ζ_m)`.
#[derive(Clone, Eq)]
pub struct CyclotomicNumber {
    tower: Tower,
    num: Vec<BigInt>,
    den: BigInt,
}

impl CyclotomicNumber {
    fn normalized(tower: Tower, mut num: Vec<BigInt>, mut den: BigInt) -> Self {
        if den.is_negative() {
            den = -den;
            for c in num.iter_mut() {
                *c = -core::mem::take(c);
            }
        }
        if !den.is_one() {
            let mut g = den.clone();
            for c in &num {
                if g.is_one() {
                    break;
                }
                if !c.is_zero() {
                    g = g.gcd(c);
                }
            }
            if num.iter().all(Zero::is_zero) {
                g = den.clone();
            }
            if !g.is_one() {
                for c in num.iter_mut() {
                    if !c.is_zero() {
                        *c = &*c / &g;
                    }
                }
                den /= g;
            }
        }
        CyclotomicNumber { tower, num, den }
    }

    /// Builds a value from an exponent-indexed integer vector (length `m`,
    /// or any length `>= φ(m)` whose indices are exponents below `m`) and a
    /// common denominator.
    pub fn from_unreduced(tower: Tower, mut acc: Vec<BigInt>, den: BigInt) -> Self {
        tower.reduce(&mut acc);
        Self::normalized(tower, acc, den)
    }

    pub fn tower(&self) -> Tower {
        self.tower
    }

    pub fn p(&self) -> u64 {
        self.tower.p
    }

    pub fn depth(&self) -> u32 {
        self.tower.depth
    }

    /// Basis coefficients as exact rationals.
    pub fn coeffs(&self) -> Vec<Q> {
        self.num
            .iter()
            .map(|c| Q::new(c.clone(), self.den.clone()))
            .collect()
    }

    /// Coefficients formatted as `"a/b"` strings.
    pub fn coeff_strings(&self) -> Vec<String> {
        self.coeffs().iter().map(fmt_q).collect()
    }

    pub fn numerators(&self) -> &[BigInt] {
        &self.num
    }

    pub fn denominator(&self) -> &BigInt {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().is_some_and(|q| q.is_one())
    }

    /// The rational value, if this element lies in `Q`.
    pub fn as_rational(&self) -> Option<Q> {
        if self.num[1..].iter().all(Zero::is_zero) {
            Some(Q::new(self.num[0].clone(), self.den.clone()))
        } else {
            None
        }
    }

    /// Re-expresses this value in the tower of depth `depth >= self.depth()`.
    pub fn lift(&self, depth: u32) -> CyclotomicNumber {
        assert!(depth >= self.tower.depth, "cannot lower a cyclotomic value");
        if depth == self.tower.depth {
            return self.clone();
        }
        let target = Tower { p: self.tower.p, depth };
        let step = self.tower.p.pow(depth - self.tower.depth) as usize;
        let mut acc = vec![BigInt::zero(); target.conductor() as usize];
        for (e, c) in self.num.iter().enumerate() {
            if !c.is_zero() {
                acc[e * step] = c.clone();
            }
        }
        Self::from_unreduced(target, acc, self.den.clone())
    }

    /// The same value in the shallower tower of depth `depth`, if it lies
    /// there. Over `E_depth` the powers `ζ^e`, `e < p^{N - depth}`, form a
    /// basis, so membership means only exponents divisible by that step occur.
    pub fn descend(&self, depth: u32) -> Option<CyclotomicNumber> {
        if depth >= self.tower.depth {
            return Some(self.lift(depth));
        }
        let target = Tower { p: self.tower.p, depth };
        let step = self.tower.p.pow(self.tower.depth - depth) as usize;
        let mut num = vec![BigInt::zero(); target.degree()];
        for (e, c) in self.num.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if e % step != 0 {
                return None;
            }
            num[e / step] = c.clone();
        }
        Some(Self::normalized(target, num, self.den.clone()))
    }

    /// Both operands expressed in their common tower.
    fn aligned<'a>(
        a: &'a CyclotomicNumber,
        b: &'a CyclotomicNumber,
    ) -> (alloc::borrow::Cow<'a, CyclotomicNumber>, alloc::borrow::Cow<'a, CyclotomicNumber>) {
        use alloc::borrow::Cow;
        assert_eq!(
            a.tower.p, b.tower.p,
            "{}",
            Error::PrimeMismatch(a.tower.p as u32, b.tower.p as u32)
        );
        match a.tower.depth.cmp(&b.tower.depth) {
            core::cmp::Ordering::Equal => (Cow::Borrowed(a), Cow::Borrowed(b)),
            core::cmp::Ordering::Less => (Cow::Owned(a.lift(b.tower.depth)), Cow::Borrowed(b)),
            core::cmp::Ordering::Greater => (Cow::Borrowed(a), Cow::Owned(b.lift(a.tower.depth))),
        }
    }

    fn add_impl(&self, other: &CyclotomicNumber, sign: bool) -> CyclotomicNumber {
        let (a, b) = Self::aligned(self, other);
        let den = a.den.lcm(&b.den);
        let fa = &den / &a.den;
        let fb = &den / &b.den;
        let num = a
            .num
            .iter()
            .zip(&b.num)
            .map(|(x, y)| {
                let l = if fa.is_one() { x.clone() } else { x * &fa };
                let r = if fb.is_one() { y.clone() } else { y * &fb };
                if sign {
                    l + r
                } else {
                    l - r
                }
            })
            .collect();
        Self::normalized(a.tower, num, den)
    }

    fn mul_impl(&self, other: &CyclotomicNumber) -> CyclotomicNumber {
        let (a, b) = Self::aligned(self, other);
        let tower = a.tower;
        if let Some(q) = a.as_rational() {
            return b.scale(&q);
        }
        if let Some(q) = b.as_rational() {
            return a.scale(&q);
        }
        let mut acc = vec![BigInt::zero(); tower.conductor() as usize];
        let rhs: Vec<(usize, &BigInt)> =
            b.num.iter().enumerate().filter(|(_, c)| !c.is_zero()).collect();
        for (i, x) in a.num.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for &(j, y) in &rhs {
                acc[i + j] += x * y;
            }
        }
        Self::from_unreduced(tower, acc, &a.den * &b.den)
    }

    /// Multiplication by a rational.
    pub fn scale(&self, q: &Q) -> CyclotomicNumber {
        let num = self.num.iter().map(|c| c * q.numer()).collect();
        Self::normalized(self.tower, num, &self.den * q.denom())
    }

    /// Multiplication by `ζ_m^e`.
    pub fn mul_zeta(&self, e: i64) -> CyclotomicNumber {
        let m = self.tower.conductor() as i64;
        let shift = e.rem_euclid(m) as usize;
        let mut acc = vec![BigInt::zero(); m as usize];
        for (i, c) in self.num.iter().enumerate() {
            if !c.is_zero() {
                acc[(i + shift) % m as usize] = c.clone();
            }
        }
        Self::from_unreduced(self.tower, acc, self.den.clone())
    }

    /// Applies `ζ_m ↦ ζ_m^s`; `s` must be a unit mod `m` (unchecked).
    fn galois_raw(&self, s: u64) -> CyclotomicNumber {
        let m = self.tower.conductor();
        let mut acc = vec![BigInt::zero(); m as usize];
        for (i, c) in self.num.iter().enumerate() {
            if !c.is_zero() {
                acc[((i as u64 * s) % m) as usize] = c.clone();
            }
        }
        Self::from_unreduced(self.tower, acc, self.den.clone())
    }

    /// `σ(self)`; the value is lifted first if `σ` lives deeper.
    pub fn apply(&self, sigma: &GaloisElement) -> CyclotomicNumber {
        assert_eq!(self.tower.p, sigma.tower.p, "Galois element over a different prime");
        if sigma.tower.depth >= self.tower.depth {
            let x = self.lift(sigma.tower.depth);
            x.galois_raw(sigma.exponent)
        } else {
            panic!(
                "Galois element of depth {} cannot act on a value of depth {}",
                sigma.tower.depth, self.tower.depth
            );
        }
    }

    pub fn inverse(&self) -> Result<CyclotomicNumber> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if let Some(q) = self.as_rational() {
            return Ok(self.tower.from_rational(&q.recip()));
        }
        let tower = self.tower;
        let mut y = self.clone();
        let mut cofactor = tower.one();
        // Norm down the cyclic part one prime step at a time, then the
        // complex-conjugation part. At each step y is fixed by the subgroup
        // generated so far.
        let gen = tower.cyclic_generator();
        let order = tower.cyclic_order();
        let mut sub = 1u64;
        for q in factorize(order) {
            let g = gen.pow(order / (sub * q));
            let mut conj = y.galois_raw(g.exponent);
            let mut c = conj.clone();
            for _ in 2..q {
                conj = conj.galois_raw(g.exponent);
                c = &c * &conj;
            }
            cofactor = &cofactor * &c;
            y = &y * &c;
            sub *= q;
        }
        let c = y.galois_raw(tower.complex_generator().exponent);
        cofactor = &cofactor * &c;
        y = &y * &c;
        let norm = y.as_rational().expect("norm down to Q is rational");
        Ok(cofactor.scale(&norm.recip()))
    }

    pub fn checked_div(&self, other: &CyclotomicNumber) -> Result<CyclotomicNumber> {
        Ok(self * &other.inverse()?)
    }

    pub fn pow(&self, e: i64) -> Result<CyclotomicNumber> {
        let base = if e < 0 { self.inverse()? } else { self.clone() };
        let mut acc = self.tower.one();
        let mut b = base;
        let mut e = e.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &b;
            }
            e >>= 1;
            if e > 0 {
                b = &b * &b;
            }
        }
        Ok(acc)
    }

    /// Field norm to `Q`, the product of all conjugates.
    pub fn norm(&self) -> Q {
        if self.is_zero() {
            return Q::zero();
        }
        let mut prod = self.clone();
        for s in self.tower.units().into_iter().skip(1) {
            prod = &prod * &self.galois_raw(s);
        }
        prod.as_rational().expect("norm is rational")
    }

    pub fn in_subfield(&self, field: Subfield) -> bool {
        field
            .fixing_generators(self.tower)
            .iter()
            .all(|g| &self.galois_raw(g.exponent) == self)
    }
}

impl PartialEq for CyclotomicNumber {
    fn eq(&self, other: &Self) -> bool {
        if self.tower == other.tower {
            return self.num == other.num && self.den == other.den;
        }
        if self.tower.p != other.tower.p {
            return false;
        }
        let (a, b) = Self::aligned(self, other);
        a.num == b.num && a.den == b.den
    }
}

impl fmt::Debug for CyclotomicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for CyclotomicNumber {
    /// Sum of `c·z^e` terms, `z = ζ_m`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in self.num.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let q = fmt_q(&Q::new(c.clone(), self.den.clone()));
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            if e == 0 {
                write!(f, "{q}")?;
            } else {
                write!(f, "{q}*z^{e}")?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        write!(f, " [m={}]", self.tower.conductor())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&CyclotomicNumber> for &CyclotomicNumber {
            type Output = CyclotomicNumber;
            fn $method(self, rhs: &CyclotomicNumber) -> CyclotomicNumber {
                let f: fn(&CyclotomicNumber, &CyclotomicNumber) -> CyclotomicNumber = $body;
                f(self, rhs)
            }
        }
        impl $tr<CyclotomicNumber> for CyclotomicNumber {
            type Output = CyclotomicNumber;
            fn $method(self, rhs: CyclotomicNumber) -> CyclotomicNumber {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&CyclotomicNumber> for CyclotomicNumber {
            type Output = CyclotomicNumber;
            fn $method(self, rhs: &CyclotomicNumber) -> CyclotomicNumber {
                (&self).$method(rhs)
            }
        }
        impl $tr<CyclotomicNumber> for &CyclotomicNumber {
            type Output = CyclotomicNumber;
            fn $method(self, rhs: CyclotomicNumber) -> CyclotomicNumber {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a.add_impl(b, true));
forward_binop!(Sub, sub, |a, b| a.add_impl(b, false));
forward_binop!(Mul, mul, |a, b| a.mul_impl(b));

impl AddAssign<&CyclotomicNumber> for CyclotomicNumber {
    fn add_assign(&mut self, rhs: &CyclotomicNumber) {
        *self = self.add_impl(rhs, true);
    }
}

impl SubAssign<&CyclotomicNumber> for CyclotomicNumber {
    fn sub_assign(&mut self, rhs: &CyclotomicNumber) {
        *self = self.add_impl(rhs, false);
    }
}

impl MulAssign<&CyclotomicNumber> for CyclotomicNumber {
    fn mul_assign(&mut self, rhs: &CyclotomicNumber) {
        *self = self.mul_impl(rhs);
    }
}

impl Neg for &CyclotomicNumber {
    type Output = CyclotomicNumber;
    fn neg(self) -> CyclotomicNumber {
        CyclotomicNumber {
            tower: self.tower,
            num: self.num.iter().map(|c| -c).collect(),
            den: self.den.clone(),
        }
    }
}

impl Neg for CyclotomicNumber {
    type Output = CyclotomicNumber;
    fn neg(self) -> CyclotomicNumber {
        -&self
    }
}

/// `ζ_m ↦ ζ_m^s` for a unit `s` modulo `m = 4 p^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GaloisElement {
    tower: Tower,
    exponent: u64,
}

impl GaloisElement {
    pub fn new(tower: Tower, exponent: i64) -> Result<Self> {
        let m = tower.conductor();
        let s = exponent.rem_euclid(m as i64) as u64;
        if gcd(s, m) != 1 {
            return Err(Error::NotAUnit { value: alloc::format!("{exponent}"), modulus: m });
        }
        Ok(GaloisElement { tower, exponent: s })
    }

    pub fn identity(tower: Tower) -> Self {
        GaloisElement { tower, exponent: 1 }
    }

    pub fn tower(&self) -> Tower {
        self.tower
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    /// The exponent modulo `p^N`: the restriction to `Q(ζ_{p^N})`.
    pub fn restriction(&self) -> u64 {
        self.exponent % self.tower.pn()
    }

    /// `+1` if `σ(i) = i`, `-1` otherwise.
    pub fn sign_on_i(&self) -> i8 {
        if self.exponent % 4 == 1 {
            1
        } else {
            -1
        }
    }

    /// `(s | p)`: the sign of `σ` on the Gauss sum.
    pub fn legendre(&self) -> i8 {
        legendre(self.exponent as i64, self.tower.p)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &GaloisElement) -> GaloisElement {
        assert_eq!(self.tower, other.tower, "Galois elements of different towers");
        let m = self.tower.conductor() as u128;
        GaloisElement {
            tower: self.tower,
            exponent: ((self.exponent as u128 * other.exponent as u128) % m) as u64,
        }
    }

    pub fn inverse(&self) -> GaloisElement {
        let m = self.tower.conductor();
        GaloisElement {
            tower: self.tower,
            exponent: crate::numtheory::inv_mod(self.exponent, m).expect("unit"),
        }
    }

    pub fn pow(&self, e: u64) -> GaloisElement {
        GaloisElement {
            tower: self.tower,
            exponent: crate::numtheory::pow_mod(self.exponent, e, self.tower.conductor()),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.exponent == 1
    }

    /// Lifts to a deeper tower by the smallest exponent congruent modulo `m`.
    pub fn lift(&self, depth: u32) -> GaloisElement {
        let target = Tower { p: self.tower.p, depth };
        let m = self.tower.conductor();
        let mt = target.conductor();
        let mut s = self.exponent;
        while gcd(s, mt) != 1 {
            s += m;
        }
        GaloisElement { tower: target, exponent: s % mt }
    }

    pub fn apply(&self, x: &CyclotomicNumber) -> CyclotomicNumber {
        x.apply(self)
    }

    pub fn fixes(&self, field: Subfield) -> bool {
        field.contains_exponent(self.tower, self.exponent)
    }
}

/// The distinguished square roots of `E_N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqrtTable {
    pub gauss: CyclotomicNumber,
    pub sqrt_pstar: CyclotomicNumber,
    pub sqrt_p: CyclotomicNumber,
    pub sqrt_mp: CyclotomicNumber,
    pub sqrt_m1: CyclotomicNumber,
}

impl SqrtTable {
    pub fn new(tower: Tower) -> Self {
        let p = tower.p;
        let step = 4 * p.pow(tower.depth - 1) as i64;
        let terms: Vec<(i64, Q)> = (1..p as i64)
            .map(|a| (a * step, Q::from_integer(BigInt::from(legendre(a, p)))))
            .collect();
        let gauss = tower.from_powers(&terms);
        let i = tower.i();
        let (sqrt_p, sqrt_mp) = if p % 4 == 1 {
            (gauss.clone(), &i * &gauss)
        } else {
            (-(&i * &gauss), gauss.clone())
        };
        SqrtTable { sqrt_pstar: gauss.clone(), gauss, sqrt_p, sqrt_mp, sqrt_m1: i }
    }
}

/// The subfields of `E_N` used for rationality tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subfield {
    /// `Q`.
    Rational,
    /// `Q(√p)`.
    RealQuadratic,
    /// `Q(√p, √−p) = Q(√p, i)`.
    Biquadratic,
    /// `Q(ζ_p, i)`.
    PCyclotomicI,
}

impl Subfield {
    pub fn tag(&self) -> &'static str {
        match self {
            Subfield::Rational => "Q",
            Subfield::RealQuadratic => "Q(sqrt p)",
            Subfield::Biquadratic => "Q(sqrt p,sqrt -p)",
            Subfield::PCyclotomicI => "Q(zeta_p,i)",
        }
    }

    /// Whether `σ_s` fixes this subfield pointwise.
    pub fn contains_exponent(&self, tower: Tower, s: u64) -> bool {
        let p = tower.p;
        let chi4: i8 = if s % 4 == 1 { 1 } else { -1 };
        let leg = legendre(s as i64, p);
        match self {
            Subfield::Rational => true,
            Subfield::RealQuadratic => {
                if p % 4 == 1 {
                    leg == 1
                } else {
                    leg == chi4
                }
            }
            Subfield::Biquadratic => chi4 == 1 && leg == 1,
            Subfield::PCyclotomicI => chi4 == 1 && s % p == 1,
        }
    }

    /// Generators of `Gal(E_N / K)`.
    pub fn fixing_generators(&self, tower: Tower) -> Vec<GaloisElement> {
        let c = tower.complex_generator();
        let g = tower.cyclic_generator();
        match self {
            Subfield::Rational => vec![c, g],
            Subfield::RealQuadratic => {
                if tower.p % 4 == 1 {
                    vec![c, g.pow(2)]
                } else {
                    vec![c.compose(&g), g.pow(2)]
                }
            }
            Subfield::Biquadratic => vec![g.pow(2)],
            Subfield::PCyclotomicI => vec![g.pow(tower.p - 1)],
        }
    }

    /// Every element of `Gal(E_N / K)`.
    pub fn fixing_group(&self, tower: Tower) -> Vec<GaloisElement> {
        tower
            .units()
            .into_iter()
            .filter(|&s| self.contains_exponent(tower, s))
            .map(|s| GaloisElement { tower, exponent: s })
            .collect()
    }
}

impl FromStr for Subfield {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "q" | "rational" => Ok(Subfield::Rational),
            "q(sqrtp)" | "q(sqrtq)" | "q(√p)" | "q(√q)" | "real-quadratic" => {
                Ok(Subfield::RealQuadratic)
            }
            "q(sqrtp,sqrt-p)" | "q(√p,√−p)" | "q(√p,√-p)" | "k" | "biquadratic" => {
                Ok(Subfield::Biquadratic)
            }
            "q(zeta_p,i)" | "q(ζ_p,i)" | "p-cyclotomic-i" => Ok(Subfield::PCyclotomicI),
            _ => Err(Error::UnknownSubfield(String::from(s))),
        }
    }
}

impl fmt::Display for Subfield {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, q};
    use proptest::prelude::*;

    fn t(p: u64, n: u32) -> Tower {
        Tower::new(p, n).unwrap()
    }

    /// Independent oracle: multiply two exponent-indexed vectors as
    /// polynomials mod x^m - 1, then divide by Φ_m with schoolbook long
    /// division over the rationals.
    fn oracle_reduce(tower: Tower, poly: &[Q]) -> Vec<Q> {
        let phi = tower.degree();
        let block = tower.block();
        let mut cyc = vec![Q::zero(); phi + 1];
        for k in 0..tower.p as usize {
            cyc[k * block] = if k % 2 == 0 { Q::one() } else { -Q::one() };
        }
        let mut r: Vec<Q> = poly.to_vec();
        while r.len() > phi {
            let lead = r.pop().unwrap();
            let shift = r.len() - phi;
            for (e, c) in cyc.iter().enumerate().take(phi) {
                r[shift + e] -= &lead * c;
            }
        }
        r.resize(phi, Q::zero());
        r
    }

    #[test]
    fn basic_elements() {
        let tw = t(3, 1);
        let z3 = tw.zeta(4);
        assert_eq!(&z3 + &z3.pow(2).unwrap(), tw.from_int(-1));
        assert_eq!(&tw.i() * &tw.i(), tw.from_int(-1));
        assert_eq!(tw.zeta(3), tw.i());
        let deep = t(3, 2);
        assert_eq!(z3.lift(2), deep.zeta(12));
        assert_eq!(z3, deep.zeta(12));
        assert_eq!(tw.zeta_pk(1, 1).unwrap(), z3);
        assert!(tw.zeta_pk(2, 1).is_err());
        assert!(Tower::new(2, 1).is_err());
        assert!(Tower::new(9, 1).is_err());
        assert!(Tower::new(3, 0).is_err());
    }

    #[test]
    fn reduction_matches_long_division() {
        for tw in [t(3, 1), t(5, 1), t(3, 2), t(7, 1)] {
            let m = tw.conductor() as usize;
            let poly: Vec<Q> = (0..m).map(|e| frac((e as i64 * 7) % 5 - 2, 1 + e as i64 % 3)).collect();
            let terms: Vec<(i64, Q)> = poly.iter().cloned().enumerate().map(|(e, c)| (e as i64, c)).collect();
            assert_eq!(tw.from_powers(&terms).coeffs(), oracle_reduce(tw, &poly));
        }
    }

    #[test]
    fn inverse_of_one_plus_zeta5() {
        let tw = t(5, 1);
        let x = &tw.one() + &tw.zeta(4);
        let z = x.inverse().unwrap();
        assert!((&z * &x).is_one());
        assert_eq!(tw.zero().inverse(), Err(Error::DivisionByZero));
    }

    #[test]
    fn gauss_sums() {
        for p in [3u64, 5, 7, 13] {
            let tw = t(p, 1);
            let st = tw.sqrt_table();
            let pstar = if p % 4 == 1 { p as i64 } else { -(p as i64) };
            assert_eq!(&st.gauss * &st.gauss, tw.from_int(pstar));
            assert_eq!(&st.sqrt_p * &st.sqrt_p, tw.from_int(p as i64));
            assert_eq!(&st.sqrt_mp * &st.sqrt_mp, tw.from_int(-(p as i64)));
            for s in tw.units() {
                let sigma = tw.galois(s as i64).unwrap();
                let expected = st.gauss.scale(&q(legendre(s as i64, p) as i64));
                assert_eq!(st.gauss.apply(&sigma), expected);
            }
        }
        // p = 5 expansion: ζ - ζ² - ζ³ + ζ⁴
        let tw = t(5, 1);
        let expected = tw.from_powers(&[(4, q(1)), (8, q(-1)), (12, q(-1)), (16, q(1))]);
        assert_eq!(tw.sqrt_table().gauss, expected);
    }

    #[test]
    fn galois_action_examples() {
        let tw = t(3, 1);
        let z3 = tw.zeta(4);
        // exponent 2 is not a unit mod 12; 5 ≡ 2 mod 3 is its lift
        assert!(tw.galois(2).is_err());
        assert_eq!(z3.apply(&tw.galois(5).unwrap()), z3.pow(2).unwrap());
        assert_eq!(tw.i().apply(&tw.galois(5).unwrap()), tw.i());
        assert_eq!(tw.i().apply(&tw.galois(7).unwrap()), -tw.i());
        let tw = t(5, 1);
        let g = tw.sqrt_table().gauss;
        let sigma = tw.galois(7).unwrap();
        assert_eq!(g.apply(&sigma), -&g);
    }

    #[test]
    fn subfield_membership() {
        for p in [3u64, 5, 7] {
            for n in [1u32, 2] {
                let tw = t(p, n);
                let st = tw.sqrt_table();
                let x = &st.sqrt_p + &st.sqrt_mp;
                assert!(tw.from_int(5).in_subfield(Subfield::Biquadratic));
                assert!(x.in_subfield(Subfield::Biquadratic));
                assert!(!x.in_subfield(Subfield::RealQuadratic));
                assert!(st.sqrt_p.in_subfield(Subfield::RealQuadratic));
                // ζ_3 = (-1 + √-3)/2 does lie in Q(√3, √-3)
                assert_eq!(
                    tw.zeta_pk(1, 1).unwrap().in_subfield(Subfield::Biquadratic),
                    p == 3
                );
                assert!(tw.zeta_pk(1, 1).unwrap().in_subfield(Subfield::PCyclotomicI));
                if n > 1 {
                    assert!(!tw.zeta_pk(2, 1).unwrap().in_subfield(Subfield::PCyclotomicI));
                }
                // generators agree with brute force over the full fixing group
                for field in [
                    Subfield::Rational,
                    Subfield::RealQuadratic,
                    Subfield::Biquadratic,
                    Subfield::PCyclotomicI,
                ] {
                    let group = field.fixing_group(tw);
                    for y in [&x, &st.sqrt_p, &st.sqrt_mp, &tw.i(), &tw.zeta(4 * tw.pn() as i64 / p as i64)] {
                        let brute = group.iter().all(|g| &y.apply(g) == y);
                        assert_eq!(y.in_subfield(field), brute, "{field} p={p} n={n}");
                    }
                    let closure = generated_size(tw, &field.fixing_generators(tw));
                    assert_eq!(closure, group.len(), "{field} p={p} n={n}");
                }
            }
        }
        assert!("nope".parse::<Subfield>().is_err());
        assert_eq!("Q(√p,√−p)".parse::<Subfield>().unwrap(), Subfield::Biquadratic);
    }

    fn generated_size(tw: Tower, gens: &[GaloisElement]) -> usize {
        let mut seen = alloc::collections::BTreeSet::new();
        let mut frontier = vec![GaloisElement::identity(tw)];
        seen.insert(1u64);
        while let Some(x) = frontier.pop() {
            for g in gens {
                let y = x.compose(g);
                if seen.insert(y.exponent) {
                    frontier.push(y);
                }
            }
        }
        seen.len()
    }

    #[test]
    fn norms() {
        let tw = t(5, 1);
        let x = &tw.one() - &tw.zeta(4);
        assert_eq!(x.norm(), q(25));
        assert_eq!(tw.i().norm(), q(1));
    }

    fn arb_elem(tw: Tower) -> impl Strategy<Value = CyclotomicNumber> {
        let m = tw.conductor() as i64;
        proptest::collection::vec((0..m, -4i64..5, 1i64..4), 1..5).prop_map(move |terms| {
            let terms: Vec<(i64, Q)> = terms.into_iter().map(|(e, a, b)| (e, frac(a, b))).collect();
            tw.from_powers(&terms)
        })
    }

    #[test]
    fn descend_inverts_lift() {
        let t = Tower::new(3, 1).unwrap();
        let x = &t.zeta(5) + &t.from_rational(&frac(2, 7));
        let deep = x.lift(3);
        assert_eq!(deep.descend(1), Some(x.clone()));
        assert_eq!(deep.descend(2), Some(x.lift(2)));
        let t3 = Tower::new(3, 3).unwrap();
        assert_eq!(t3.zeta(1).descend(2), None);
        // a Gauss sum over ninth roots of unity lands in depth 1
        let g: CyclotomicNumber = (0..9).map(|w| t3.zeta_pk(2, w * w * 3).unwrap()).fold(t3.zero(), |a, b| a + b);
        assert!(g.descend(1).is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn field_axioms(a in arb_elem(t(3, 2)), b in arb_elem(t(3, 2)), c in arb_elem(t(3, 2))) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert!((&a - &a).is_zero());
            if !a.is_zero() {
                prop_assert!((&a * &a.inverse().unwrap()).is_one());
            }
        }

        #[test]
        fn galois_is_a_homomorphism(a in arb_elem(t(5, 1)), b in arb_elem(t(5, 1)), s in 0usize..8, r in 0usize..8) {
            let tw = t(5, 1);
            let units = tw.units();
            let sigma = tw.galois(units[s] as i64).unwrap();
            let tau = tw.galois(units[r] as i64).unwrap();
            prop_assert_eq!((&a * &b).apply(&sigma), &a.apply(&sigma) * &b.apply(&sigma));
            prop_assert_eq!((&a + &b).apply(&sigma), &a.apply(&sigma) + &b.apply(&sigma));
            prop_assert_eq!(a.apply(&sigma.compose(&tau)), a.apply(&tau).apply(&sigma));
        }

        #[test]
        fn inverse_in_deeper_tower(a in arb_elem(t(5, 2))) {
            if !a.is_zero() {
                prop_assert!((&a * &a.inverse().unwrap()).is_one());
            }
        }
    }
}
