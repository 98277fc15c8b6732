//! `Q_p` modelled by exact rationals, additive characters and self-dual
//! Haar measures.

use core::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::cyclo::{CyclotomicNumber, Tower};
use crate::rational::{fmt_q, p_fractional_part, pow_p, valuation, Q};
use crate::{Error, Result};

/// A rational viewed as an element of `Q_p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalScalar {
    p: u64,
    value: Q,
}

impl LocalScalar {
    pub fn new(p: u64, value: Q) -> Self {
        LocalScalar { p, value }
    }

    pub fn value(&self) -> &Q {
        &self.value
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// `v(x)`, `None` for zero.
    pub fn valuation(&self) -> Option<i64> {
        valuation(&self.value, self.p)
    }

    /// The exponent `e` with `|x| = p^e`, `None` for zero.
    pub fn abs_exponent(&self) -> Option<i64> {
        self.valuation().map(|v| -v)
    }

    /// `|x|` as an exact rational.
    pub fn abs(&self) -> Q {
        self.abs_exponent().map_or_else(Q::zero, |e| pow_p(self.p, e))
    }

    /// `|x|^{1/2}` in `E_N`.
    pub fn abs_sqrt(&self, tower: Tower) -> Result<CyclotomicNumber> {
        match self.abs_exponent() {
            Some(e) => Ok(half_power(tower, e)),
            None => Err(Error::DivisionByZero),
        }
    }
}

impl fmt::Display for LocalScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_q(&self.value))
    }
}

/// `p^{e/2}` with the distinguished `√p` for odd `e`.
pub fn half_power(tower: Tower, e: i64) -> CyclotomicNumber {
    let p = tower.p();
    let whole = pow_p(p, e.div_euclid(2));
    if e.rem_euclid(2) == 0 {
        tower.from_rational(&whole)
    } else {
        tower.sqrt_table().sqrt_p.scale(&whole)
    }
}

/// `λ_std[t] : x ↦ λ_std(t x)`, where `λ_std(a/p^k + r) = ζ_{p^k}^a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdditiveCharacter {
    p: u64,
    twist: Q,
}

impl AdditiveCharacter {
    /// The standard character, of level 0.
    pub fn standard(p: u64) -> Self {
        AdditiveCharacter { p, twist: Q::from_integer(BigInt::from(1)) }
    }

    pub fn twisted(p: u64, twist: Q) -> Result<Self> {
        if twist.is_zero() {
            return Err(Error::ZeroTwist);
        }
        Ok(AdditiveCharacter { p, twist })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn twist_parameter(&self) -> &Q {
        &self.twist
    }

    /// `λ[s]`.
    pub fn twist(&self, s: &Q) -> Result<Self> {
        Self::twisted(self.p, &self.twist * s)
    }

    /// The level `-v(t)`: the conductor is `p^{level} O`.
    pub fn level(&self) -> i64 {
        -valuation(&self.twist, self.p).expect("twist is non-zero")
    }

    /// The exponent `e` (mod `m`) with `λ(x) = ζ_m^e`.
    pub fn exponent(&self, x: &Q, tower: Tower) -> Result<u64> {
        if x.is_zero() {
            return Ok(0);
        }
        let (a, k) = p_fractional_part(&(&self.twist * x), self.p);
        if k > tower.depth() {
            return Err(Error::TowerTooShallow { needed: k, available: tower.depth() });
        }
        let m = tower.conductor();
        let a = (a % BigInt::from(m)).to_u64().expect("small residue");
        let step = 4 * self.p.pow(tower.depth() - k);
        Ok((a as u128 * step as u128 % m as u128) as u64)
    }

    pub fn eval(&self, x: &Q, tower: Tower) -> Result<CyclotomicNumber> {
        Ok(tower.zeta(self.exponent(x, tower)? as i64))
    }

    /// `∫_{p^k O} d_λ t = p^{(level - 2k)/2}`.
    pub fn lattice_measure(&self, k: i64, tower: Tower) -> CyclotomicNumber {
        half_power(tower, self.level() - 2 * k)
    }
}
