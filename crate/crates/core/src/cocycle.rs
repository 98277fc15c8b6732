//! The Galois 1-cocycle `δ(σ) = A(σ)D(σ)` on `𝔥 = Gal(E/Q(√p, √−p))`.
//!
//! Write `σ|_{Q(ζ_{p^N})} = σ_{ε^{2i} s²}` with `ε` the Teichmüller lift of a
//! primitive root, `1 <= i <= (p−1)/2` and `s ≡ 1 mod p`. Then
//! `D(σ) = W(g_{ε^i s})` is a unit dilation and `A(σ) = ρ_e + c_i ρ_o` with
//! `c_i = u·η(u)⋯η^{i−1}(u)`, where `η` acts as `ε²` and `u` solves the
//! relative norm equation `N(u) = −1`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::cyclo::{CyclotomicNumber, GaloisElement, Subfield, Tower};
use crate::localfield::AdditiveCharacter;
use crate::numtheory::{crt_mod4, inv_mod, pow_mod, teichmuller};
use crate::rational::{frac, q};
use crate::rep::{DilationSum, EvalOptions, OperatorExpr};
use crate::schwartz::SchwartzFunction;
use crate::sympl::SymplecticElement;
use crate::twists::TwistReport;
use crate::{Error, Result};

/// The Teichmüller lift `ε` modulo `p^depth` of the smallest primitive root.
pub fn teichmuller_eps(p: u64, depth: u32) -> u64 {
    teichmuller(p, depth)
}

/// `σ|_{Q(ζ_{p^N})} = σ_{ε^{2i} s²}` with `1 <= i <= (p−1)/2` and `s ≡ 1 mod p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SigmaDecomposition {
    pub i: u64,
    /// Residue modulo `p^N`.
    pub s: u64,
}

impl SigmaDecomposition {
    /// `ε^{2i} s² mod p^N`.
    pub fn recompose(&self, p: u64, depth: u32) -> u64 {
        let pn = p.pow(depth);
        let eps = teichmuller_eps(p, depth);
        pow_mod(eps, 2 * self.i, pn) * pow_mod(self.s, 2, pn) % pn
    }

    /// `ε^i s mod p^N`, the dilation factor of `D(σ)`.
    pub fn dilation_unit(&self, p: u64, depth: u32) -> u64 {
        let pn = p.pow(depth);
        pow_mod(teichmuller_eps(p, depth), self.i, pn) * self.s % pn
    }
}

fn require_h(sigma: &GaloisElement) -> Result<()> {
    if sigma.fixes(Subfield::Biquadratic) {
        Ok(())
    } else {
        Err(Error::NotInSubgroup { exponent: sigma.exponent(), group: "Gal(E/Q(sqrt p,sqrt -p))".into() })
    }
}

pub fn sigma_decompose(sigma: &GaloisElement) -> Result<SigmaDecomposition> {
    require_h(sigma)?;
    let tower = sigma.tower();
    let (p, depth) = (tower.p(), tower.depth());
    let pn = tower.pn();
    let r = sigma.restriction();
    let eps = teichmuller_eps(p, depth);
    let half = (p - 1) / 2;
    let i = (1..=half).find(|&i| pow_mod(eps, 2 * i, p) == r % p).ok_or(Error::NotInSubgroup {
        exponent: sigma.exponent(),
        group: "the squares".into(),
    })?;
    let principal = r * inv_mod(pow_mod(eps, 2 * i, pn), pn).expect("unit") % pn;
    // squaring is invertible on U_1, which has order p^{N−1}
    let s = pow_mod(principal, p.pow(depth - 1).div_ceil(2), pn);
    Ok(SigmaDecomposition { i, s })
}

/// `η ∈ 𝔥` acting as `ε²` on `p`-power roots of unity.
pub fn eta(tower: Tower) -> GaloisElement {
    let pn = tower.pn();
    let e2 = pow_mod(teichmuller_eps(tower.p(), tower.depth()), 2, pn);
    GaloisElement::new(tower, crt_mod4(e2, pn, 1) as i64).expect("unit")
}

/// `∏_{l=0}^{k−1} η^l(x)`.
pub fn eta_product(x: &CyclotomicNumber, eta: &GaloisElement, k: u64) -> CyclotomicNumber {
    let mut acc = x.tower().one();
    let mut conj = x.clone();
    for _ in 0..k {
        acc = &acc * &conj;
        conj = conj.apply(eta);
    }
    acc
}

/// Exponent bound of the search used when `p ≡ 1 mod 8`.
pub const NORM_SEARCH_BOUND: u32 = 2;

/// A `u ∈ Q(ζ_p, i)` whose norm to `Q(√p, √−p)` is `−1`, as an element of `E_depth`.
pub fn norm_solve(p: u64, depth: u32) -> Result<CyclotomicNumber> {
    let tower = Tower::new(p, depth)?;
    let half = (p - 1) / 2;
    let u = match p % 8 {
        3 | 7 => tower.from_int(-1),
        5 => tower.i(),
        _ => search_norm_solution(p, NORM_SEARCH_BOUND)?.lift(depth),
    };
    debug_assert!(eta_product(&u, &eta(tower), half) == tower.from_int(-1));
    Ok(u)
}

/// Bounded search over products of the cyclotomic units `1 − i^a ζ_p^c`
/// (`c` running over the two classes modulo squares) and `1 + i`.
fn search_norm_solution(p: u64, bound: u32) -> Result<CyclotomicNumber> {
    let tower = Tower::new(p, 1)?;
    let eta = eta(tower);
    let half = (p - 1) / 2;
    let g = teichmuller_eps(p, 1);
    let zeta_p = |c: u64| tower.zeta_pk(1, c as i64).expect("depth 1");
    let mut family = Vec::new();
    for c in [1, g] {
        for a in 0..4 {
            family.push(&tower.one() - &(&tower.zeta(a * tower.pn() as i64) * &zeta_p(c)));
        }
    }
    family.push(&tower.one() + &tower.i());
    let norms: Vec<CyclotomicNumber> = family.iter().map(|x| eta_product(x, &eta, half)).collect();
    let target = tower.from_int(-1);
    let b = bound as i64;
    let range: Vec<i64> = (-b..=b).collect();
    let powers: Vec<Vec<CyclotomicNumber>> = norms
        .iter()
        .map(|n| range.iter().map(|&e| n.pow(e)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut exps = vec![0i64; family.len()];
    if !search_exponents(&powers, &range, &target, family.len(), &tower.one(), &mut exps) {
        return Err(Error::NormSearchExhausted { bound, classes: family.len() });
    }
    let mut u = tower.one();
    for (x, &e) in family.iter().zip(&exps) {
        u = &u * &x.pow(e)?;
    }
    Ok(u)
}

/// Depth-first over exponent vectors, the last factor outermost.
fn search_exponents(
    powers: &[Vec<CyclotomicNumber>],
    range: &[i64],
    target: &CyclotomicNumber,
    remaining: usize,
    prod: &CyclotomicNumber,
    exps: &mut [i64],
) -> bool {
    if remaining == 0 {
        return prod == target;
    }
    let k = remaining - 1;
    for (idx, &e) in range.iter().enumerate() {
        exps[k] = e;
        let next = if e == 0 { prod.clone() } else { prod * &powers[k][idx] };
        if search_exponents(powers, range, target, k, &next, exps) {
            return true;
        }
    }
    false
}

/// Everything needed to evaluate `δ`, fixed once per `(λ, n, N)`.
#[derive(Debug, Clone)]
pub struct CocycleData {
    lambda: AdditiveCharacter,
    n: usize,
    tower: Tower,
    eta: GaloisElement,
    u: CyclotomicNumber,
    /// `products[k−1] = ∏_{l=0}^{k−1} η^l(u)` for `1 <= k <= (p−1)/2`.
    products: Vec<CyclotomicNumber>,
}

impl CocycleData {
    pub fn new(lambda: &AdditiveCharacter, n: usize, tower: Tower) -> Result<Self> {
        let p = tower.p();
        let u = norm_solve(p, tower.depth())?;
        let eta = eta(tower);
        let products = (1..=(p - 1) / 2).map(|k| eta_product(&u, &eta, k)).collect();
        Ok(CocycleData { lambda: lambda.clone(), n, tower, eta, u, products })
    }

    pub fn tower(&self) -> Tower {
        self.tower
    }

    pub fn character(&self) -> &AdditiveCharacter {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eta(&self) -> GaloisElement {
        self.eta
    }

    pub fn norm_solution(&self) -> &CyclotomicNumber {
        &self.u
    }

    /// `(p−1)/2`.
    pub fn half(&self) -> u64 {
        (self.tower.p() - 1) / 2
    }

    /// `c_k = ∏_{l=0}^{k−1} η^l(u)`.
    pub fn a_coefficient(&self, k: u64) -> &CyclotomicNumber {
        &self.products[k as usize - 1]
    }

    /// All of `𝔥_N`, ordered by `(i, s)`.
    pub fn transversal(&self) -> Vec<GaloisElement> {
        let mut out: Vec<(SigmaDecomposition, GaloisElement)> = Subfield::Biquadratic
            .fixing_group(self.tower)
            .into_iter()
            .map(|s| (sigma_decompose(&s).expect("in the group"), s))
            .collect();
        out.sort();
        out.into_iter().map(|(_, s)| s).collect()
    }

    /// `i + j` folded back into `[1, (p−1)/2]`, and whether it wrapped.
    pub fn product_index(&self, i: u64, j: u64) -> (u64, bool) {
        let half = self.half();
        if i + j <= half {
            (i + j, false)
        } else {
            (i + j - half, true)
        }
    }

    fn iota(&self) -> Result<OperatorExpr> {
        OperatorExpr::weil(&self.lambda, &SymplecticElement::iota(self.n), self.tower)
    }

    /// `ρ_e + c ρ_o`.
    fn parity_combination(&self, c: &CyclotomicNumber) -> Result<OperatorExpr> {
        let even = OperatorExpr::parity_projector(&self.lambda, self.n, self.tower, true)?;
        let odd = OperatorExpr::parity_projector(&self.lambda, self.n, self.tower, false)?;
        Ok(OperatorExpr::Sum(vec![even, OperatorExpr::Compose(vec![OperatorExpr::Scalar(c.clone()), odd])]))
    }

    /// `A(σ)` for a `σ` of index `k`.
    pub fn a_operator(&self, k: u64) -> Result<OperatorExpr> {
        self.parity_combination(self.a_coefficient(k))
    }

    /// `D(σ) = W(g_{ε^i s})`.
    pub fn d_operator(&self, sigma: &GaloisElement) -> Result<OperatorExpr> {
        let r = sigma_decompose(sigma)?.dilation_unit(self.tower.p(), self.tower.depth());
        OperatorExpr::weil(&self.lambda, &SymplecticElement::g_s(self.n, &q(r as i64))?, self.tower)
    }

    /// `δ(σ) = A(σ) D(σ)` built from Weil operators.
    pub fn delta(&self, sigma: &GaloisElement) -> Result<OperatorExpr> {
        let dec = sigma_decompose(sigma)?;
        Ok(OperatorExpr::Compose(vec![self.a_operator(dec.i)?, self.d_operator(sigma)?]))
    }

    /// `δ(σ)⁻¹ = D(σ)⁻¹ (ρ_e + c⁻¹ ρ_o)`.
    pub fn delta_inverse(&self, sigma: &GaloisElement) -> Result<OperatorExpr> {
        let dec = sigma_decompose(sigma)?;
        let r = dec.dilation_unit(self.tower.p(), self.tower.depth());
        let d_inv = OperatorExpr::weil(&self.lambda, &SymplecticElement::g_s(self.n, &frac(1, r as i64))?, self.tower)?;
        let a_inv = self.parity_combination(&self.a_coefficient(dec.i).inverse()?)?;
        Ok(OperatorExpr::Compose(vec![d_inv, a_inv]))
    }

    /// `δ(σ)` as an element of the group algebra of `(Z/p^N)^*`:
    /// `((1 + c)/2)[r] + ((1 − c)/2)[−r]`.
    pub fn delta_dilations(&self, sigma: &GaloisElement) -> Result<DilationSum> {
        let dec = sigma_decompose(sigma)?;
        let (p, depth) = (self.tower.p(), self.tower.depth());
        let pn = self.tower.pn();
        let r = dec.dilation_unit(p, depth);
        let c = self.a_coefficient(dec.i);
        let half = self.tower.from_rational(&frac(1, 2));
        let even = &(&self.tower.one() + c) * &half;
        let odd = &(&self.tower.one() - c) * &half;
        let mut out = DilationSum::dilation(p, depth, r, &even)?;
        out.add_term(pn - r, &odd);
        Ok(out)
    }

    /// The identities around the cocycle law for the pair `(σ, τ)`, plus
    /// `δ(σ)⁻¹ W(g) δ(σ) = ^σW(g)` for each supplied `g`.
    pub fn cocycle_check(
        &self,
        sigma: &GaloisElement,
        tau: &GaloisElement,
        elements: &[SymplecticElement],
        probes: &[SchwartzFunction],
        opts: &EvalOptions,
    ) -> Result<Vec<TwistReport>> {
        let (ds, dt) = (sigma_decompose(sigma)?, sigma_decompose(tau)?);
        let prod = sigma.compose(tau);
        let (k, wrapped) = self.product_index(ds.i, dt.i);
        debug_assert_eq!(sigma_decompose(&prod)?.i, k);
        let params = vec![
            ("sigma".to_string(), sigma.exponent().to_string()),
            ("tau".to_string(), tau.exponent().to_string()),
            ("branch".to_string(), String::from(if wrapped { "wrapped" } else { "direct" })),
        ];
        let iota = self.iota()?;
        let mut reports = Vec::new();

        let lhs = OperatorExpr::Compose(vec![self.d_operator(sigma)?, self.d_operator(tau)?.galois_twist(sigma)]);
        let d_prod = self.d_operator(&prod)?;
        let rhs = if wrapped { OperatorExpr::Compose(vec![iota.clone(), d_prod]) } else { d_prod };
        reports.push(compare_ops("dilation-defect", params.clone(), probes, &lhs, &rhs, opts)?);

        let lhs = OperatorExpr::Compose(vec![self.a_operator(ds.i)?, self.a_operator(dt.i)?.galois_twist(sigma)]);
        let a_prod = self.a_operator(k)?;
        let rhs = if wrapped { OperatorExpr::Compose(vec![a_prod, iota]) } else { a_prod };
        reports.push(compare_ops("parity-defect", params.clone(), probes, &lhs, &rhs, opts)?);

        let lhs = OperatorExpr::Compose(vec![self.delta(sigma)?, self.delta(tau)?.galois_twist(sigma)]);
        reports.push(compare_ops("cocycle-law", params.clone(), probes, &lhs, &self.delta(&prod)?, opts)?);

        for g in elements {
            reports.push(self.conjugation_check(sigma, g, probes, opts)?);
        }
        Ok(reports)
    }

    /// `δ(σ)⁻¹ W(g) δ(σ) = ^σW(g)` on probes.
    pub fn conjugation_check(
        &self,
        sigma: &GaloisElement,
        g: &SymplecticElement,
        probes: &[SchwartzFunction],
        opts: &EvalOptions,
    ) -> Result<TwistReport> {
        let w = OperatorExpr::weil(&self.lambda, g, self.tower)?;
        let lhs = OperatorExpr::Compose(vec![self.delta_inverse(sigma)?, w.clone(), self.delta(sigma)?]);
        let rhs = w.galois_twist(sigma);
        let rows: Vec<String> = g.entry_strings().iter().map(|r| format!("[{}]", r.join(","))).collect();
        let params = vec![
            ("sigma".to_string(), sigma.exponent().to_string()),
            ("g".to_string(), format!("[{}]", rows.join(","))),
        ];
        compare_ops("cocycle-conjugation", params, probes, &lhs, &rhs, opts)
    }
}

fn compare_ops(
    name: &str,
    params: Vec<(String, String)>,
    probes: &[SchwartzFunction],
    lhs: &OperatorExpr,
    rhs: &OperatorExpr,
    opts: &EvalOptions,
) -> Result<TwistReport> {
    TwistReport::compare(name, params, probes, |phi| Ok((lhs.apply(phi, opts)?, rhs.apply(phi, opts)?)))
}

/// `δ(σ)` from scratch.
pub fn build_delta(lambda: &AdditiveCharacter, n: usize, sigma: &GaloisElement) -> Result<OperatorExpr> {
    CocycleData::new(lambda, n, sigma.tower())?.delta(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tower(p: u64, n: u32) -> Tower {
        Tower::new(p, n).unwrap()
    }

    fn atoms(t: Tower, j: i64, k: i64) -> Vec<SchwartzFunction> {
        SchwartzFunction::atoms(t, 1, j, k, 1 << 16).unwrap()
    }

    fn data(p: u64, depth: u32) -> CocycleData {
        CocycleData::new(&AdditiveCharacter::standard(p), 1, tower(p, depth)).unwrap()
    }

    fn element(t: Tower, restriction: u64) -> GaloisElement {
        t.galois(crt_mod4(restriction, t.pn(), 1) as i64).unwrap()
    }

    #[test]
    fn teichmuller_examples() {
        assert_eq!(teichmuller_eps(3, 2), 8);
        assert_eq!(teichmuller_eps(5, 2), 7);
        assert_eq!(pow_mod(7, 2, 25), 24);
    }

    #[test]
    fn decompositions() {
        for p in [3u64, 5] {
            let t = tower(p, 1);
            let d = sigma_decompose(&GaloisElement::identity(t)).unwrap();
            assert_eq!(d, SigmaDecomposition { i: (p - 1) / 2, s: 1 });
        }
        let t = tower(5, 1);
        assert_eq!(sigma_decompose(&element(t, 4)).unwrap(), SigmaDecomposition { i: 1, s: 1 });
        let t = tower(5, 2);
        let d = sigma_decompose(&element(t, 16)).unwrap();
        assert_eq!(d.recompose(5, 2), 16);
        assert_eq!(d.s % 5, 1);
        for p in [3u64, 5, 7] {
            let t = tower(p, 2);
            for sigma in Subfield::Biquadratic.fixing_group(t) {
                let d = sigma_decompose(&sigma).unwrap();
                assert_eq!(d.recompose(p, 2), sigma.restriction());
                assert!((1..=(p - 1) / 2).contains(&d.i));
            }
        }
        let not_h = t.complex_generator();
        assert!(matches!(sigma_decompose(&not_h), Err(Error::NotInSubgroup { .. })));
    }

    #[test]
    fn eta_has_the_right_order() {
        for p in [3u64, 5, 7, 13] {
            let t = tower(p, 1);
            let e = eta(t);
            assert!(e.fixes(Subfield::Biquadratic));
            let order = (1..).find(|&k| e.pow(k).is_identity()).unwrap();
            assert_eq!(order, (p - 1) / 2);
        }
    }

    #[test]
    fn norm_equation() {
        for p in [3u64, 5, 7, 13] {
            let u = norm_solve(p, 2).unwrap();
            let t = u.tower();
            assert!(u.in_subfield(Subfield::PCyclotomicI));
            assert_eq!(eta_product(&u, &eta(t), (p - 1) / 2), t.from_int(-1));
        }
        assert_eq!(norm_solve(3, 1).unwrap(), tower(3, 1).from_int(-1));
        assert_eq!(norm_solve(5, 1).unwrap(), tower(5, 1).i());
    }

    #[test]
    fn norm_search_beyond_the_closed_forms() {
        // 17 ≡ 1 mod 8: no closed form, the bounded search succeeds
        let u = norm_solve(17, 1).unwrap();
        assert!(u.in_subfield(Subfield::PCyclotomicI));
        assert_eq!(eta_product(&u, &eta(u.tower()), 8), u.tower().from_int(-1));
    }

    #[test]
    fn dilation_form_agrees_with_operators() {
        for (p, depth) in [(3u64, 2u32), (5, 2)] {
            let d = data(p, depth);
            let opts = EvalOptions::default();
            for sigma in d.transversal() {
                let op = d.delta(&sigma).unwrap();
                let dil = d.delta_dilations(&sigma).unwrap();
                let inv = d.delta_inverse(&sigma).unwrap();
                for phi in atoms(d.tower(), -1, 1) {
                    let out = op.apply(&phi, &opts).unwrap();
                    assert_eq!(out, dil.apply(&phi).unwrap());
                    assert_eq!(out.cell(), phi.cell());
                    assert_eq!(inv.apply(&out, &opts).unwrap(), phi);
                }
            }
        }
    }

    #[test]
    fn identity_and_small_primes() {
        let d = data(3, 2);
        let t = d.tower();
        let id = GaloisElement::identity(t);
        let opts = EvalOptions::default();
        // A(id) = ρ_e − ρ_o = W(ι) and D(id) = W(ι), so δ(id) = 1
        for phi in atoms(t, 0, 1) {
            assert_eq!(d.delta(&id).unwrap().apply(&phi, &opts).unwrap(), phi);
            let reflected = d.d_operator(&id).unwrap().apply(&phi, &opts).unwrap();
            assert_eq!(reflected, d.iota().unwrap().apply(&phi, &opts).unwrap());
            let a = d.a_operator(1).unwrap().apply(&phi, &opts).unwrap();
            assert_eq!(a, reflected);
        }
        let even = OperatorExpr::parity_projector(&AdditiveCharacter::standard(3), 1, t, true).unwrap();
        let odd = OperatorExpr::parity_projector(&AdditiveCharacter::standard(3), 1, t, false).unwrap();
        for phi in atoms(t, -1, 1) {
            let e = even.apply(&phi, &opts).unwrap();
            assert_eq!(even.apply(&e, &opts).unwrap(), e);
            assert!(odd.apply(&e, &opts).unwrap().is_zero());
        }
    }

    #[test]
    fn cocycle_law_and_defects() {
        let gens = ["tau1", "levi(2)", "unip(1/3)", "g(3)"];
        for (p, depth, j, k) in [(3u64, 2u32, 0, 1), (5, 2, 0, 1)] {
            let d = data(p, depth);
            let probes = atoms(d.tower(), j, k);
            let gens: Vec<SymplecticElement> = gens
                .iter()
                .map(|w| crate::sympl::parse_word(1, &w.replace('3', &p.to_string())).unwrap())
                .collect();
            let all = d.transversal();
            let mut branches = (false, false);
            for (a, sigma) in all.iter().enumerate() {
                for tau in &all {
                    let extra = if tau == &all[0] { &gens[..] } else { &[] };
                    for r in d.cocycle_check(sigma, tau, extra, &probes, &EvalOptions::default()).unwrap() {
                        assert!(r.pass, "p = {p} σ#{a}: {r:?}");
                        if r.name == "dilation-defect" {
                            let wrapped = r.params.iter().any(|(k, v)| k == "branch" && v == "wrapped");
                            if wrapped { branches.1 = true } else { branches.0 = true }
                        }
                    }
                }
            }
            assert!(branches.1);
            assert_eq!(branches.0, p > 3);
        }
    }

    #[test]
    fn delta_fixes_atoms_for_deep_principal_units() {
        // i = (p−1)/2 gives δ(σ) = W(g_s); it fixes atoms of width w once s ≡ 1 mod p^w.
        let d = data(5, 3);
        let opts = EvalOptions::default();
        for sigma in d.transversal() {
            let dec = sigma_decompose(&sigma).unwrap();
            if dec.i != d.half() || dec.s % 25 != 1 {
                continue;
            }
            for phi in atoms(d.tower(), -1, 1) {
                assert_eq!(d.delta(&sigma).unwrap().apply(&phi, &opts).unwrap(), phi);
            }
        }
    }
}
