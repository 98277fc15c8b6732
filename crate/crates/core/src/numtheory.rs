//! Small-integer number theory: primality, primitive roots, Legendre symbols,
//! modular inverses and the Teichmüller lift.

use alloc::vec::Vec;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn pow_mod(base: u64, mut exp: u64, modulus: u64) -> u64 {
    if modulus == 1 {
        return 0;
    }
    let m = modulus as u128;
    let mut b = base as u128 % m;
    let mut acc = 1u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = ((a % m) as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Prime factors with multiplicity, in increasing order.
pub fn factorize(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        while n.is_multiple_of(d) {
            out.push(d);
            n /= d;
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Legendre symbol `(a | p)` for an odd prime `p`.
pub fn legendre(a: i64, p: u64) -> i8 {
    let r = a.rem_euclid(p as i64) as u64;
    if r == 0 {
        return 0;
    }
    if pow_mod(r, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

/// Smallest primitive root modulo the odd prime `p`.
pub fn primitive_root(p: u64) -> u64 {
    let mut distinct = factorize(p - 1);
    distinct.dedup();
    (2..p)
        .find(|&g| distinct.iter().all(|&q| pow_mod(g, (p - 1) / q, p) != 1))
        .unwrap_or(1)
}

/// A generator of the cyclic group `(Z/p^e)^*`.
pub fn primitive_root_prime_power(p: u64, e: u32) -> u64 {
    let g = primitive_root(p);
    if e <= 1 {
        return g;
    }
    let p2 = p * p;
    let g = if pow_mod(g, p - 1, p2) == 1 { g + p } else { g };
    g % p.pow(e)
}

/// Teichmüller lift of the smallest primitive root: the primitive `(p-1)`-st
/// root of unity modulo `p^e` congruent to it modulo `p`.
pub fn teichmuller(p: u64, e: u32) -> u64 {
    let modulus = p.pow(e);
    let mut a = primitive_root(p) % modulus;
    loop {
        let next = pow_mod(a, p, modulus);
        if next == a {
            return a;
        }
        a = next;
    }
}

/// The smallest `s` with `s² ≡ r (mod p^e)`, if any. Exhaustive; `p^e` is small here.
pub fn sqrt_mod_prime_power(r: u64, p: u64, e: u32) -> Option<u64> {
    let m = p.pow(e);
    let r = r % m;
    (0..m).find(|&s| (s as u128 * s as u128 % m as u128) as u64 == r)
}

/// Multiplicative order of a unit `a` modulo `m`.
pub fn mult_order(a: u64, m: u64) -> u64 {
    let mut x = a % m;
    let mut k = 1;
    while x != 1 % m {
        x = (x as u128 * a as u128 % m as u128) as u64;
        k += 1;
    }
    k
}

/// The CRT lift of `(r mod p^n, q mod 4)` to a residue modulo `4 p^n`.
pub fn crt_mod4(r: u64, pn: u64, q: u64) -> u64 {
    let m = 4 * pn;
    (0..4).map(|t| r % pn + t * pn).find(|x| x % 4 == q % 4).unwrap_or(0) % m
}
