//! Machine-integer kernel for the finite sums behind the Weil operators.
//!
//! The integrand on a box `u = u_c + p^J w`, `w ∈ (Z/p^r)^i`, is an affine
//! argument `z(w)` fed to a tabulated function times a character of a
//! quadratic phase `P(w)`. After scaling by powers of `p` both are integral,
//! so everything is done modulo prime powers below `2^62`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::rational::{min_val, scaled_residue, valuation, Q};
use crate::{Error, Result};

const MAX_MODULUS: u128 = 1 << 62;

/// `p^e`, refusing anything at or above `2^62`.
pub(crate) fn checked_power(p: u64, e: i64) -> Result<u64> {
    let overflow = Error::PrecisionOverflow { exponent: e.max(0) as u32 };
    if e < 0 {
        return Err(overflow);
    }
    let mut acc: u128 = 1;
    for _ in 0..e {
        acc *= p as u128;
        if acc >= MAX_MODULUS {
            return Err(overflow);
        }
    }
    Ok(acc as u64)
}

/// A quadratic phase `P(w) = c + Σ lin_a w_a + Σ_{a<=b} quad_ab w_a w_b`
/// with rational coefficients, and an affine map `z(w) = z0 + Σ w_a rows_a`.
pub(crate) struct BoxSum<'a> {
    pub p: u64,
    /// Number of free coordinates `i`.
    pub dim: usize,
    /// `w` ranges over `(Z/p^range)^dim`.
    pub range: u32,
    pub constant: &'a Q,
    pub linear: &'a [Q],
    /// Upper-triangular, row-major `dim × dim`.
    pub quadratic: &'a [Q],
    pub z0: &'a [Q],
    /// `dim` rows of length `n`.
    pub z_rows: &'a [Vec<Q>],
    /// Cell of the tabulated function.
    pub j: i64,
    pub k: i64,
}

/// Counts of `(table slot, phase residue)` with the phase modulus exponent.
pub(crate) struct PhaseCounts {
    pub phase_exp: u32,
    pub counts: BTreeMap<(usize, u64), u64>,
}

impl BoxSum<'_> {
    pub fn run(&self) -> Result<PhaseCounts> {
        let p = self.p;
        let n = self.z0.len();

        let phase_val = self
            .linear
            .iter()
            .chain(self.quadratic)
            .chain(core::iter::once(self.constant))
            .fold(None, |acc, x| min_val(acc, valuation(x, p)));
        let phase_exp = (-phase_val.unwrap_or(0)).max(0);
        let phase_mod = checked_power(p, phase_exp)?;
        let res = |x: &Q, shift: i64, m: u64| -> u128 { scaled_residue(x, p, shift, m) as u128 };
        let c0 = res(self.constant, phase_exp, phase_mod);
        let lin: Vec<u128> = self.linear.iter().map(|x| res(x, phase_exp, phase_mod)).collect();
        let quad: Vec<u128> = self.quadratic.iter().map(|x| res(x, phase_exp, phase_mod)).collect();

        let z_val = self
            .z0
            .iter()
            .chain(self.z_rows.iter().flatten())
            .fold(None, |acc, x| min_val(acc, valuation(x, p)));
        let shift = (-z_val.unwrap_or(0)).max(-self.j).max(0);
        let z_mod = checked_power(p, shift + self.k)?;
        let support_mod = checked_power(p, shift + self.j)? as u128;
        let radix = checked_power(p, self.k - self.j)? as u128;
        let z0: Vec<u128> = self.z0.iter().map(|x| res(x, shift, z_mod)).collect();
        let rows: Vec<Vec<u128>> = self
            .z_rows
            .iter()
            .map(|r| r.iter().map(|x| res(x, shift, z_mod)).collect())
            .collect();

        let (pm, zm) = (phase_mod as u128, z_mod as u128);
        let side = checked_power(p, self.range as i64)?;
        let mut w = vec![0u128; self.dim];
        let mut counts = BTreeMap::new();
        loop {
            let mut z_ok = true;
            let mut slot: u128 = 0;
            for t in 0..n {
                let mut zt = z0[t];
                for a in 0..self.dim {
                    zt = (zt + rows[a][t] * w[a]) % zm;
                }
                if !zt.is_multiple_of(support_mod) {
                    z_ok = false;
                    break;
                }
                slot = slot * radix + (zt / support_mod) % radix;
            }
            if z_ok {
                let mut ph = c0;
                for a in 0..self.dim {
                    ph = (ph + lin[a] * w[a]) % pm;
                    for b in a..self.dim {
                        let wab = w[a] * w[b] % pm;
                        ph = (ph + quad[a * self.dim + b] * wab) % pm;
                    }
                }
                *counts.entry((slot as usize, ph as u64)).or_insert(0u64) += 1;
            }
            // odometer
            let mut a = 0;
            loop {
                if a == self.dim {
                    return Ok(PhaseCounts { phase_exp: phase_exp as u32, counts });
                }
                w[a] += 1;
                if w[a] < side as u128 {
                    break;
                }
                w[a] = 0;
                a += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, q};

    #[test]
    fn counts_a_one_dimensional_fourier_sum() {
        // Σ_{w mod 3} λ(w x / 3) 1_{Z_3}(w) for x = 1: phases 0, 1, 2 once each.
        let lin = [frac(1, 3)];
        let quad = [q(0)];
        let z0 = [q(0)];
        let rows = [vec![q(1)]];
        let sum = BoxSum {
            p: 3,
            dim: 1,
            range: 1,
            constant: &q(0),
            linear: &lin,
            quadratic: &quad,
            z0: &z0,
            z_rows: &rows,
            j: 0,
            k: 0,
        };
        let out = sum.run().unwrap();
        assert_eq!(out.phase_exp, 1);
        let expected: BTreeMap<(usize, u64), u64> = [((0, 0), 1), ((0, 1), 1), ((0, 2), 1)].into();
        assert_eq!(out.counts, expected);
    }

    #[test]
    fn precision_guard() {
        assert!(checked_power(3, 38).is_ok());
        assert_eq!(checked_power(3, 40), Err(Error::PrecisionOverflow { exponent: 40 }));
    }
}
