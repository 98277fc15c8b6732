//! `Sp(2n)` over `Q` (standing in for `Q_p`), its distinguished elements,
//! the Heisenberg group, and the decomposition `g = p₁ τ_i p₂`.
//!
//! Vectors are rows `(x, y)` with `x ∈ X`, `y ∈ Y`, and `g` acts on the
//! right. The form is `⟨(x,y),(x',y')⟩ = x·y' − y·x'`, whose Gram matrix is
//! `J = [[0, I], [−I, 0]]`; `g` is symplectic iff `g J gᵀ = J`.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::matrix::Mat;
use crate::rational::{parse_q, Q};
use crate::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SymplecticElement {
    n: usize,
    m: Mat,
}

fn gram(n: usize) -> Mat {
    let mut j = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = Q::one();
        j[(n + i, i)] = -Q::one();
    }
    j
}

/// `⟨v, w⟩` for `v = (x, y)`, `w = (x', y')` of length `2n`.
pub fn form(v: &[Q], w: &[Q]) -> Q {
    let n = v.len() / 2;
    let mut acc = Q::zero();
    for i in 0..n {
        acc += &v[i] * &w[n + i];
        acc -= &v[n + i] * &w[i];
    }
    acc
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

impl SymplecticElement {
    pub fn from_matrix(m: Mat) -> Result<Self> {
        if m.rows() != m.cols() || !m.rows().is_multiple_of(2) || m.rows() == 0 {
            return Err(Error::DimensionMismatch(alloc::format!(
                "expected a 2n×2n matrix, got {}×{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows() / 2;
        let j = gram(n);
        if &(&m * &j) * &m.transpose() != j {
            return Err(Error::NotSymplectic);
        }
        Ok(SymplecticElement { n, m })
    }

    pub fn from_blocks(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Result<Self> {
        Self::from_matrix(Mat::from_blocks(a, b, c, d))
    }

    fn trusted(n: usize, m: Mat) -> Self {
        debug_assert!(Self::from_matrix(m.clone()).is_ok());
        SymplecticElement { n, m }
    }

    pub fn identity(n: usize) -> Self {
        Self::trusted(n, Mat::identity(2 * n))
    }

    /// `x_j ↦ −y_j`, `y_j ↦ x_j` for `j <= i`; identity on the rest.
    pub fn tau(n: usize, i: usize) -> Self {
        assert!(i <= n, "tau index out of range");
        let mut m = Mat::identity(2 * n);
        for j in 0..i {
            m[(j, j)] = Q::zero();
            m[(n + j, n + j)] = Q::zero();
            m[(j, n + j)] = -Q::one();
            m[(n + j, j)] = Q::one();
        }
        Self::trusted(n, m)
    }

    /// `[[a, 0], [0, a^{−T}]]`.
    pub fn levi(a: &Mat) -> Result<Self> {
        let n = a.rows();
        let d = a.inverse()?.transpose();
        Ok(Self::trusted(n, Mat::from_blocks(a, &Mat::zeros(n, n), &Mat::zeros(n, n), &d)))
    }

    /// `[[I, b], [0, I]]` for symmetric `b`.
    pub fn unip(b: &Mat) -> Result<Self> {
        if !b.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        let n = b.rows();
        Ok(Self::trusted(n, Mat::from_blocks(&Mat::identity(n), b, &Mat::zeros(n, n), &Mat::identity(n))))
    }

    /// `g_s : x + y ↦ s^{−1} x + s y`.
    pub fn g_s(n: usize, s: &Q) -> Result<Self> {
        Self::p_is(n, n, s)
    }

    /// `x_j ↦ s^{−1} x_j`, `y_j ↦ s y_j` for `j <= i`.
    pub fn p_is(n: usize, i: usize, s: &Q) -> Result<Self> {
        if s.is_zero() {
            return Err(Error::ZeroTwist);
        }
        let mut m = Mat::identity(2 * n);
        for j in 0..i {
            m[(j, j)] = s.recip();
            m[(n + j, n + j)] = s.clone();
        }
        Ok(Self::trusted(n, m))
    }

    /// The central involution `g_{−1}`.
    pub fn iota(n: usize) -> Self {
        Self::trusted(n, Mat::scalar(2 * n, &-Q::one()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }

    pub fn a(&self) -> Mat {
        self.m.block(0, self.n, 0, self.n)
    }

    pub fn b(&self) -> Mat {
        self.m.block(0, self.n, self.n, 2 * self.n)
    }

    pub fn c(&self) -> Mat {
        self.m.block(self.n, 2 * self.n, 0, self.n)
    }

    pub fn d(&self) -> Mat {
        self.m.block(self.n, 2 * self.n, self.n, 2 * self.n)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "symplectic elements of different rank");
        Self::trusted(self.n, &self.m * &other.m)
    }

    pub fn inverse(&self) -> Self {
        let j = gram(self.n);
        let jinv = j.neg();
        Self::trusted(self.n, &(&j * &self.m.transpose()) * &jinv)
    }

    /// Membership in the Siegel parabolic `P` (block `c = 0`).
    pub fn in_parabolic(&self) -> bool {
        self.c().is_zero()
    }

    pub fn is_identity(&self) -> bool {
        self.m == Mat::identity(2 * self.n)
    }

    /// `f_s^{−1} g f_s = [[a, s b], [s^{−1} c, d]]`, with `f_s : x + y ↦ x + s y`.
    pub fn conj_fs(&self, s: &Q) -> Result<Self> {
        if s.is_zero() {
            return Err(Error::ZeroTwist);
        }
        Ok(Self::trusted(
            self.n,
            Mat::from_blocks(&self.a(), &self.b().scale(s), &self.c().scale(&s.recip()), &self.d()),
        ))
    }

    /// `(x, y) ↦ (x, y)·g`.
    pub fn act(&self, v: &[Q]) -> Vec<Q> {
        self.m.apply_row(v)
    }

    /// Writes `g = p₁ τ_i p₂` with `p₁, p₂ ∈ P` and `i = rank c`.
    pub fn bruhat_siegel(&self, p: u64) -> SiegelDecomposition {
        let n = self.n;
        if self.in_parabolic() {
            return SiegelDecomposition { p1: self.clone(), rank: 0, p2: Self::identity(n) };
        }
        let (i, left, right) = self.c().rank_normal_form(Some(p));
        // left·c·right = E_i; conjugating by Levi elements moves c to E_i.
        let m1 = Self::levi(&left.transpose()).expect("invertible");
        let m1_inv = m1.inverse();
        let m2_inv = Self::levi(&right).expect("invertible");
        let m2 = m2_inv.inverse();
        let h = m1_inv.mul(self).mul(&m2_inv);
        let (ha, hd) = (h.a(), h.d());
        let mut left_sym = Mat::zeros(n, n);
        let mut right_sym = Mat::zeros(n, n);
        for r in 0..i {
            for s in 0..i {
                left_sym[(r, s)] = -ha[(r, s)].clone();
                right_sym[(r, s)] = -hd[(r, s)].clone();
            }
            for s in i..n {
                left_sym[(r, s)] = -ha[(s, r)].clone();
                left_sym[(s, r)] = -ha[(s, r)].clone();
                right_sym[(r, s)] = -hd[(r, s)].clone();
                right_sym[(s, r)] = -hd[(r, s)].clone();
            }
        }
        let ul = Self::unip(&left_sym).expect("symmetric by construction");
        let ur = Self::unip(&right_sym).expect("symmetric by construction");
        let core = ul.mul(&h).mul(&ur);
        // core = τ_i · m with m ∈ P
        let middle = Self::tau(n, i).inverse().mul(&core);
        let p1 = m1.mul(&ul.inverse());
        let p2 = middle.mul(&ur.inverse()).mul(&m2);
        let dec = SiegelDecomposition { p1, rank: i, p2 };
        debug_assert!(dec.p1.in_parabolic() && dec.p2.in_parabolic());
        debug_assert_eq!(&dec.product(), self);
        dec
    }

    /// Row-major entries as `"a/b"` strings.
    pub fn entry_strings(&self) -> Vec<Vec<String>> {
        self.m.entry_strings()
    }
}

impl fmt::Debug for SymplecticElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sp{:?}", self.m)
    }
}

/// `g = p₁ τ_i p₂`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiegelDecomposition {
    pub p1: SymplecticElement,
    pub rank: usize,
    pub p2: SymplecticElement,
}

impl SiegelDecomposition {
    pub fn product(&self) -> SymplecticElement {
        let n = self.p1.n();
        self.p1.mul(&SymplecticElement::tau(n, self.rank)).mul(&self.p2)
    }

    /// `det(p₁ p₂ |_Y)`.
    pub fn y_determinant(&self) -> Q {
        (&self.p1.d() * &self.p2.d()).det()
    }
}

/// `(v, t)` with `v = (x, y) ∈ V` and `t` central.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HeisenbergElement {
    pub v: Vec<Q>,
    pub t: Q,
}

impl HeisenbergElement {
    pub fn new(x: Vec<Q>, y: Vec<Q>, t: Q) -> Self {
        assert_eq!(x.len(), y.len());
        let mut v = x;
        v.extend(y);
        HeisenbergElement { v, t }
    }

    pub fn identity(n: usize) -> Self {
        HeisenbergElement { v: vec![Q::zero(); 2 * n], t: Q::zero() }
    }

    pub fn central(n: usize, t: Q) -> Self {
        HeisenbergElement { v: vec![Q::zero(); 2 * n], t }
    }

    pub fn n(&self) -> usize {
        self.v.len() / 2
    }

    pub fn x(&self) -> &[Q] {
        &self.v[..self.n()]
    }

    pub fn y(&self) -> &[Q] {
        &self.v[self.n()..]
    }

    /// `(v, t)(v', t') = (v + v', t + t' + ⟨v, v'⟩/2)`.
    pub fn mul(&self, other: &Self) -> Self {
        let v = self.v.iter().zip(&other.v).map(|(a, b)| a + b).collect();
        let half = Q::new(1.into(), 2.into());
        HeisenbergElement { v, t: &self.t + &other.t + form(&self.v, &other.v) * half }
    }

    pub fn inverse(&self) -> Self {
        HeisenbergElement { v: self.v.iter().map(|a| -a).collect(), t: -&self.t }
    }

    /// `(v, t)·g = (v g, t)`.
    pub fn act(&self, g: &SymplecticElement) -> Self {
        HeisenbergElement { v: g.act(&self.v), t: self.t.clone() }
    }
}

/// Parses a product of generators such as `tau1*unip(1/3)*levi(2)`.
///
/// Factors: `id`, `iota`, `tau<i>` or `tau(i)`, `levi(a)`, `unip(b)`,
/// `g(s)`, `p(i,s)`. A scalar argument of `levi`/`unip` means a multiple of
/// the identity; a matrix is written `[[a,b],[c,d]]`.
pub fn parse_word(n: usize, word: &str) -> core::result::Result<SymplecticElement, String> {
    let mut g = SymplecticElement::identity(n);
    let mut pos = 0usize;
    for token in split_top_level(word, '*') {
        let raw = token;
        let token = token.trim();
        let at = pos;
        pos += raw.len() + 1;
        if token.is_empty() {
            return Err(alloc::format!("empty factor at position {at}"));
        }
        let factor = parse_factor(n, token).map_err(|e| alloc::format!("{e} (factor '{token}' at position {at})"))?;
        g = g.mul(&factor);
    }
    Ok(g)
}

fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + ch.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_factor(n: usize, token: &str) -> core::result::Result<SymplecticElement, String> {
    let (name, arg) = match token.find('(') {
        Some(open) => {
            if !token.ends_with(')') {
                return Err("missing ')'".to_string());
            }
            (&token[..open], Some(&token[open + 1..token.len() - 1]))
        }
        None => (token, None),
    };
    let scalar = |s: &str| parse_q(s).ok_or_else(|| alloc::format!("bad rational '{s}'"));
    match (name, arg) {
        ("id", None) => Ok(SymplecticElement::identity(n)),
        ("iota", None) => Ok(SymplecticElement::iota(n)),
        ("tau", Some(i)) => parse_tau(n, i),
        (t, None) if t.starts_with("tau") => parse_tau(n, &t[3..]),
        ("levi", Some(a)) => {
            let a = parse_matrix_arg(n, a)?;
            SymplecticElement::levi(&a).map_err(|e| e.to_string())
        }
        ("unip", Some(b)) => {
            let b = parse_matrix_arg(n, b)?;
            SymplecticElement::unip(&b).map_err(|e| e.to_string())
        }
        ("g", Some(s)) | ("g_s", Some(s)) => {
            SymplecticElement::g_s(n, &scalar(s)?).map_err(|e| e.to_string())
        }
        ("p", Some(args)) => {
            let (i, s) = args.split_once(',').ok_or("p(i,s) needs two arguments")?;
            let i: usize = i.trim().parse().map_err(|_| alloc::format!("bad index '{i}'"))?;
            if i > n {
                return Err(alloc::format!("index {i} exceeds n = {n}"));
            }
            SymplecticElement::p_is(n, i, &scalar(s)?).map_err(|e| e.to_string())
        }
        _ => Err(alloc::format!("unknown generator '{name}'")),
    }
}

fn parse_tau(n: usize, i: &str) -> core::result::Result<SymplecticElement, String> {
    let i: usize = i.trim().parse().map_err(|_| alloc::format!("bad tau index '{i}'"))?;
    if i > n {
        return Err(alloc::format!("tau index {i} exceeds n = {n}"));
    }
    Ok(SymplecticElement::tau(n, i))
}

fn parse_matrix_arg(n: usize, s: &str) -> core::result::Result<Mat, String> {
    let s = s.trim();
    if let Some(body) = s.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
        let mut rows = Vec::new();
        for row in split_top_level(body, ',') {
            let row = row.trim();
            let inner = row
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| alloc::format!("bad matrix row '{row}'"))?;
            let entries = inner
                .split(',')
                .map(|e| parse_q(e).ok_or_else(|| alloc::format!("bad rational '{e}'")))
                .collect::<core::result::Result<Vec<Q>, String>>()?;
            rows.push(entries);
        }
        let m = Mat::from_rows(rows).map_err(|e| e.to_string())?;
        if m.rows() != n || m.cols() != n {
            return Err(alloc::format!("matrix must be {n}×{n}"));
        }
        Ok(m)
    } else {
        let q = parse_q(s).ok_or_else(|| alloc::format!("bad rational '{s}'"))?;
        Ok(Mat::scalar(n, &q))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rational::{frac, q};
    use proptest::prelude::*;

    fn m(rows: &[&[i64]]) -> Mat {
        Mat::from_rows(rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect()).unwrap()
    }

    #[test]
    fn standard_elements() {
        assert_eq!(SymplecticElement::tau(1, 1).matrix(), &m(&[&[0, -1], &[1, 0]]));
        assert_eq!(SymplecticElement::tau(2, 0), SymplecticElement::identity(2));
        let g3 = SymplecticElement::g_s(1, &q(3)).unwrap();
        assert_eq!(g3.matrix(), &Mat::diagonal(&[frac(1, 3), q(3)]));
        assert_eq!(SymplecticElement::iota(1).matrix(), &m(&[&[-1, 0], &[0, -1]]));
        assert_eq!(SymplecticElement::unip(&m(&[&[1, 2], &[3, 1]])), Err(Error::NotSymmetric));
        assert_eq!(SymplecticElement::levi(&m(&[&[1, 2], &[2, 4]])), Err(Error::SingularMatrix));
        assert_eq!(SymplecticElement::from_matrix(m(&[&[1, 1], &[1, 1]])), Err(Error::NotSymplectic));
        // f_{s²} = s·I ∘ g_s as linear maps
        for s in [q(2), frac(1, 3), q(-5)] {
            let n = 2;
            let mut fs2 = Mat::identity(2 * n);
            for i in 0..n {
                fs2[(n + i, n + i)] = &s * &s;
            }
            let lhs = Mat::scalar(2 * n, &s);
            let rhs = SymplecticElement::g_s(n, &s).unwrap();
            assert_eq!(&lhs * rhs.matrix(), fs2);
        }
    }

    #[test]
    fn conjugation_by_similitude() {
        let t = SymplecticElement::tau(1, 1);
        assert_eq!(t.conj_fs(&q(3)).unwrap().matrix(), &Mat::from_rows(vec![vec![q(0), q(-3)], vec![frac(1, 3), q(0)]]).unwrap());
        let g = parse_word(2, "tau1*unip([[1,2],[2,0]])*levi([[1,1],[0,1]])").unwrap();
        assert_eq!(g.conj_fs(&q(5)).unwrap().conj_fs(&frac(1, 5)).unwrap(), g);
        let pe = SymplecticElement::unip(&m(&[&[1]])).unwrap();
        assert!(pe.conj_fs(&q(7)).unwrap().in_parabolic());
        assert_eq!(t.conj_fs(&q(0)), Err(Error::ZeroTwist));
        // τ_i^{f_s} = τ_i p_{i,s}, det(p_{i,s}|_Y) = s^i
        for (n, i) in [(1, 1), (2, 1), (2, 2), (3, 2)] {
            let s = frac(2, 3);
            let lhs = SymplecticElement::tau(n, i).conj_fs(&s).unwrap();
            let pis = SymplecticElement::p_is(n, i, &s).unwrap();
            assert_eq!(lhs, SymplecticElement::tau(n, i).mul(&pis));
            assert_eq!(pis.d().det(), num_traits::Pow::pow(&s, i as u32));
        }
    }

    #[test]
    fn decomposition_examples() {
        let pe = parse_word(1, "levi(2)*unip(1/3)").unwrap();
        let d = pe.bruhat_siegel(3);
        assert_eq!((d.rank, d.p2.is_identity()), (0, true));
        assert_eq!(d.p1, pe);
        for (n, i) in [(1, 1), (2, 1), (2, 2)] {
            let t = SymplecticElement::tau(n, i);
            let d = t.bruhat_siegel(3);
            assert_eq!(d.rank, i);
            assert!(d.p1.is_identity() && d.p2.is_identity());
        }
        let lower = SymplecticElement::from_matrix(Mat::from_rows(vec![vec![q(1), q(0)], vec![frac(2, 3), q(1)]]).unwrap()).unwrap();
        let d = lower.bruhat_siegel(3);
        assert_eq!(d.rank, 1);
        assert_eq!(d.product(), lower);
    }

    #[test]
    fn heisenberg_group() {
        let h = HeisenbergElement::new(vec![q(1), frac(1, 3)], vec![q(2), q(0)], frac(1, 5));
        assert_eq!(h.mul(&h.inverse()), HeisenbergElement::identity(2));
        let g = parse_word(2, "tau2*levi(2)").unwrap();
        let c = HeisenbergElement::central(2, q(7));
        assert_eq!(c.act(&g), c);
    }

    #[test]
    fn parse_errors_carry_positions() {
        assert!(parse_word(1, "tau1*bogus(2)").unwrap_err().contains("position 5"));
        assert!(parse_word(1, "tau3").is_err());
        assert!(parse_word(1, "unip(1/0)").is_err());
        assert_eq!(parse_word(1, "g(3)").unwrap(), SymplecticElement::g_s(1, &q(3)).unwrap());
    }

    /// Words in `{levi, unip, τ_i}` with small entries.
    pub(crate) fn arb_word(n: usize) -> impl Strategy<Value = SymplecticElement> {
        let gen = (0usize..3, -3i64..4, 1i64..4, 0usize..=n, 0usize..n, 0usize..n);
        proptest::collection::vec(gen, 1..6).prop_map(move |gens| {
            let mut g = SymplecticElement::identity(n);
            for (kind, a, b, i, r, c) in gens {
                let s = frac(a, b);
                let f = match kind {
                    0 => {
                        let mut mat = Mat::identity(n);
                        if r != c {
                            mat[(r, c)] = s.clone();
                        } else if !s.is_zero() {
                            mat[(r, r)] = s.clone();
                        }
                        SymplecticElement::levi(&mat).unwrap()
                    }
                    1 => {
                        let mut mat = Mat::zeros(n, n);
                        mat[(r, c)] = s.clone();
                        mat[(c, r)] = s.clone();
                        SymplecticElement::unip(&mat).unwrap()
                    }
                    _ => SymplecticElement::tau(n, i),
                };
                g = g.mul(&f);
            }
            g
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn decomposition_reconstructs(g in arb_word(2), p in prop::sample::select(vec![3u64, 5])) {
            let d = g.bruhat_siegel(p);
            prop_assert_eq!(d.product(), g.clone());
            prop_assert_eq!(d.rank, g.c().rank());
            prop_assert!(d.p1.in_parabolic() && d.p2.in_parabolic());
            prop_assert_eq!(g.mul(&g.inverse()), SymplecticElement::identity(2));
        }

        #[test]
        fn heisenberg_associative_and_equivariant(
            vals in proptest::collection::vec((-4i64..5, 1i64..4), 15),
            g in arb_word(2),
        ) {
            let qv: Vec<Q> = vals.iter().map(|&(a, b)| frac(a, b)).collect();
            let h = |o: usize| HeisenbergElement { v: qv[o..o + 4].to_vec(), t: qv[o + 4].clone() };
            let (a, b, c) = (h(0), h(5), h(10));
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(a.mul(&b).act(&g), a.act(&g).mul(&b.act(&g)));
        }
    }

    #[test]
    fn rank_sweeps() {
        let mut seen = [false; 3];
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        for _ in 0..200 {
            let g = proptest::strategy::ValueTree::current(&arb_word(2).new_tree(&mut runner).unwrap());
            seen[g.bruhat_siegel(3).rank] = true;
        }
        assert_eq!(seen, [true; 3]);
    }
}
