//! Exact rationals viewed as elements of `Q_p`.

use alloc::string::{String, ToString};
use core::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// `p`-adic valuation of a non-zero integer.
pub fn int_valuation(n: &BigInt, p: u64) -> i64 {
    debug_assert!(!n.is_zero());
    let pb = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (quot, rem) = n.div_rem(&pb);
        if !rem.is_zero() {
            return v;
        }
        n = quot;
        v += 1;
    }
}

/// `p`-adic valuation; `None` stands for `+∞` (the valuation of zero).
pub fn valuation(x: &Q, p: u64) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    Some(int_valuation(x.numer(), p) - int_valuation(x.denom(), p))
}

/// Minimum of valuations, treating `None` as `+∞`.
pub fn min_val(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

pub fn pow_p(p: u64, e: i64) -> Q {
    let base = BigInt::from(p).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        Q::from_integer(base)
    } else {
        Q::new(BigInt::one(), base)
    }
}

/// Splits `x = a / p^k + r` with `r` a `p`-adic integer and `0 <= a < p^k`,
/// returning `(a, k)`; `k = 0` means `x` is `p`-integral.
pub fn p_fractional_part(x: &Q, p: u64) -> (BigInt, u32) {
    if x.is_zero() {
        return (BigInt::zero(), 0);
    }
    let den = x.denom();
    let k = int_valuation(den, p);
    if k == 0 {
        return (BigInt::zero(), 0);
    }
    let pk = BigInt::from(p).pow(k as u32);
    let unit = den / &pk;
    let inv = mod_inverse(&unit, &pk).expect("unit part of denominator is prime to p");
    let a = (x.numer() * inv).mod_floor(&pk);
    (a, k as u32)
}

pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let g = a.extended_gcd(m);
    if !g.gcd.is_one() {
        return None;
    }
    Some(g.x.mod_floor(m))
}

/// `p^shift · x` reduced modulo `p^prec`, as a machine integer. Requires the
/// scaled value to be `p`-integral.
pub fn scaled_residue(x: &Q, p: u64, shift: i64, modulus: u64) -> u64 {
    if x.is_zero() {
        return 0;
    }
    let m = BigInt::from(modulus);
    let num = if shift >= 0 {
        x.numer() * BigInt::from(p).pow(shift as u32)
    } else {
        x.numer().clone()
    };
    let den = if shift < 0 {
        x.denom() * BigInt::from(p).pow((-shift) as u32)
    } else {
        x.denom().clone()
    };
    // The p-part of the denominator must have been cancelled by the shift.
    let g = num.gcd(&den);
    let (num, den) = (num / &g, den / g);
    let inv = mod_inverse(&den.mod_floor(&m), &m).expect("scaled value is p-integral");
    (num.mod_floor(&m) * inv)
        .mod_floor(&m)
        .to_u64()
        .expect("residue fits")
}

/// Formats as `"a/b"` (or `"a"` for integers).
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        alloc::format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `"a"`, `"a/b"` or `"-a/b"`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let a = BigInt::from_str(a.trim()).ok()?;
            let b = BigInt::from_str(b.trim()).ok()?;
            if b.is_zero() {
                return None;
            }
            Some(Q::new(a, b))
        }
        None => BigInt::from_str(s).ok().map(Q::from_integer),
    }
}

pub fn is_p_integral(x: &Q, p: u64) -> bool {
    valuation(x, p).is_none_or(|v| v >= 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valuations() {
        assert_eq!(valuation(&frac(1, 25), 5), Some(-2));
        assert_eq!(valuation(&frac(50, 3), 5), Some(2));
        assert_eq!(valuation(&q(0), 5), None);
    }

    #[test]
    fn fractional_parts() {
        assert_eq!(p_fractional_part(&frac(1, 3), 3), (BigInt::from(1), 1));
        assert_eq!(p_fractional_part(&q(2), 3), (BigInt::zero(), 0));
        // 7/18 = 7/(2*9): 7 * 2^{-1} mod 9 = 7 * 5 = 35 = 8 mod 9
        assert_eq!(p_fractional_part(&frac(7, 18), 3), (BigInt::from(8), 2));
    }

    #[test]
    fn residues_and_parsing() {
        assert_eq!(scaled_residue(&frac(1, 2), 5, 0, 25), 13);
        assert_eq!(scaled_residue(&frac(1, 5), 5, 1, 25), 1);
        assert_eq!(parse_q("-3/6"), Some(frac(-1, 2)));
        assert_eq!(fmt_q(&frac(4, 2)), "2");
        assert!(parse_q("1/0").is_none());
    }
}
