//! Deterministic probe functions, group words and Heisenberg elements.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weil_core::rational::{fmt_q, frac, q, Q};
use weil_core::schwartz::DEFAULT_CELL_LIMIT;
use weil_core::{HeisenbergElement, Result, SchwartzFunction, Tower};

/// One independent random stream per `(seed, stream)`; streams are derived
/// from the check being run, so adding checks never perturbs others.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Stream id from a short tag and a few small integers.
pub fn stream(tag: &str, parts: &[i64]) -> u64 {
    // FNV-1a: stable across platforms and toolchains
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = tag.bytes().chain(parts.iter().flat_map(|x| x.to_le_bytes()));
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[(rng.next_u64() % items.len() as u64) as usize]
}

/// Where random probe coefficients live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficients {
    /// All of `Q(ζ_{4p^N})`.
    Cyclotomic,
    /// `Q(√p, √−p)`.
    Biquadratic,
}

/// Every atom of the cell, then `extra` random combinations of three atoms.
pub fn probes(
    tower: Tower,
    n: usize,
    cell: (i64, i64),
    extra: usize,
    rng: &mut ChaCha8Rng,
    field: Coefficients,
) -> Result<Vec<SchwartzFunction>> {
    let atoms = SchwartzFunction::atoms(tower, n, cell.0, cell.1, DEFAULT_CELL_LIMIT)?;
    let mut out = atoms.clone();
    let roots = tower.sqrt_table();
    for _ in 0..extra {
        let mut f = SchwartzFunction::zero(tower, n);
        for _ in 0..3 {
            let atom = pick(rng, &atoms);
            let small = |rng: &mut ChaCha8Rng| (rng.next_u64() % 5) as i64 - 2;
            let c = match field {
                Coefficients::Cyclotomic => {
                    let m = tower.conductor();
                    let a = tower.zeta((rng.next_u64() % m) as i64).scale(&q(small(rng)));
                    let b = tower.zeta((rng.next_u64() % m) as i64).scale(&frac(small(rng), 2));
                    &a + &b
                }
                Coefficients::Biquadratic => {
                    let basis = [tower.one(), roots.sqrt_p.clone(), roots.sqrt_m1.clone(), roots.sqrt_mp.clone()];
                    basis.iter().fold(tower.zero(), |acc, x| &acc + &x.scale(&q(small(rng))))
                }
            };
            f = f.add(&atom.scale(&c));
        }
        out.push(f);
    }
    Ok(out)
}

/// The generator set: partial Fourier elements, the reflection, and one of
/// each parabolic type.
pub fn generators(p: u64, n: usize) -> Vec<String> {
    let mut out: Vec<String> = (1..=n).map(|i| format!("tau{i}")).collect();
    out.extend(["iota".into(), "levi(2)".into(), "unip(1)".into(), format!("unip(1/{p})"), format!("g({p})")]);
    out
}

/// A word of length 1 to 3 in the generators with bounded parameters.
pub fn random_word(rng: &mut ChaCha8Rng, p: u64, n: usize) -> String {
    let p = p as i64;
    let scalars = [q(2), q(-1), frac(1, 2), q(p), frac(1, p), frac(-1, 2)];
    let shears = [q(1), q(-1), frac(1, p), q(p), q(2), frac(-1, p)];
    let dilations = [q(p), frac(1, p), q(2), q(-1)];
    let len = 1 + (rng.next_u64() % 3) as usize;
    let factors: Vec<String> = (0..len)
        .map(|_| match rng.next_u64() % 5 {
            0 => format!("tau{}", 1 + rng.next_u64() % n as u64),
            1 => "iota".into(),
            2 => format!("levi({})", fmt_q(pick(rng, &scalars))),
            3 => format!("unip({})", fmt_q(pick(rng, &shears))),
            _ => format!("g({})", fmt_q(pick(rng, &dilations))),
        })
        .collect();
    factors.join("*")
}

fn random_coordinate(rng: &mut ChaCha8Rng, p: i64) -> Q {
    let choices = [q(0), q(1), q(-1), q(2), frac(1, p), frac(-1, p), frac(2, p), q(p)];
    pick(rng, &choices).clone()
}

pub fn random_heisenberg(rng: &mut ChaCha8Rng, p: u64, n: usize) -> HeisenbergElement {
    let p = p as i64;
    let x = (0..n).map(|_| random_coordinate(rng, p)).collect();
    let y = (0..n).map(|_| random_coordinate(rng, p)).collect();
    let t = pick(rng, &[q(0), q(1), frac(1, p), frac(1, p * p), frac(-2, p)]).clone();
    HeisenbergElement::new(x, y, t)
}

/// Unit vectors in each coordinate at valuations 0 and −1, and a central
/// element.
pub fn heisenberg_generators(p: u64, n: usize) -> Vec<HeisenbergElement> {
    let mut out = Vec::new();
    for i in 0..n {
        for c in [q(1), frac(1, p as i64)] {
            let mut v = vec![q(0); n];
            v[i] = c;
            out.push(HeisenbergElement::new(v.clone(), vec![q(0); n], q(0)));
            out.push(HeisenbergElement::new(vec![q(0); n], v, q(0)));
        }
    }
    out.push(HeisenbergElement::central(n, frac(1, p as i64)));
    out
}

/// `x(a)+y2(b),t` in the syntax of the operator parser.
pub fn heisenberg_label(h: &HeisenbergElement) -> String {
    let n = h.n();
    let coord = |axis: &str, i: usize| if n == 1 { axis.to_string() } else { format!("{axis}{}", i + 1) };
    let mut parts = Vec::new();
    for (i, c) in h.x().iter().enumerate() {
        if *c != q(0) {
            parts.push(format!("{}({})", coord("x", i), fmt_q(c)));
        }
    }
    for (i, c) in h.y().iter().enumerate() {
        if *c != q(0) {
            parts.push(format!("{}({})", coord("y", i), fmt_q(c)));
        }
    }
    let v = if parts.is_empty() { "0".to_string() } else { parts.join("+") };
    format!("{v},{}", fmt_q(&h.t))
}
