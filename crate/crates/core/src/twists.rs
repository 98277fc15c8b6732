//! Similitude twists and the Galois action on operators, with probe-based
//! verification of the identities relating them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::cyclo::{CyclotomicNumber, GaloisElement, Subfield, Tower};
use crate::localfield::{half_power, AdditiveCharacter, LocalScalar};
use crate::numtheory::sqrt_mod_prime_power;
use crate::rational::{fmt_q, q, valuation, Q};
use crate::rep::{EvalOptions, OperatorExpr, WeilOperator};
use crate::schwartz::SchwartzFunction;
use crate::sympl::SymplecticElement;
use crate::{Error, Result};

/// The first disagreement found by a check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    Functions { probe: SchwartzFunction, lhs: SchwartzFunction, rhs: SchwartzFunction },
    Scalars { lhs: CyclotomicNumber, rhs: CyclotomicNumber },
    /// A value expected in `field` that is not.
    OutsideField { value: CyclotomicNumber, field: Subfield },
}

/// Outcome of an identity check; `pass` iff there is no witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwistReport {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub probes: usize,
    pub pass: bool,
    pub witness: Option<Witness>,
}

impl TwistReport {
    pub fn passed(name: &str, params: Vec<(String, String)>, probes: usize) -> Self {
        TwistReport { name: name.into(), params, probes, pass: true, witness: None }
    }

    pub fn failed(name: &str, params: Vec<(String, String)>, probes: usize, witness: Witness) -> Self {
        TwistReport { name: name.into(), params, probes, pass: false, witness: Some(witness) }
    }

    /// Compares the two sides produced by `sides` on every probe, stopping at
    /// the first mismatch.
    pub fn compare<F>(name: &str, params: Vec<(String, String)>, probes: &[SchwartzFunction], mut sides: F) -> Result<Self>
    where
        F: FnMut(&SchwartzFunction) -> Result<(SchwartzFunction, SchwartzFunction)>,
    {
        for phi in probes {
            let (lhs, rhs) = sides(phi)?;
            if lhs != rhs {
                let witness = Witness::Functions { probe: phi.clone(), lhs, rhs };
                return Ok(Self::failed(name, params, probes.len(), witness));
            }
        }
        Ok(Self::passed(name, params, probes.len()))
    }

    fn scalars(name: &str, params: Vec<(String, String)>, lhs: CyclotomicNumber, rhs: CyclotomicNumber) -> Self {
        if lhs == rhs {
            Self::passed(name, params, 0)
        } else {
            Self::failed(name, params, 0, Witness::Scalars { lhs, rhs })
        }
    }
}

/// The `s` with `σ(λ(x)) = λ(s x)` for every `x` of depth at most `N`: the
/// exponent of `σ` reduced modulo `p^N`.
pub fn char_galois_partner(sigma: &GaloisElement, lambda: &AdditiveCharacter) -> LocalScalar {
    LocalScalar::new(lambda.p(), q(sigma.restriction() as i64))
}

/// `(^σT)(φ) = σ(T(σ⁻¹φ))`.
pub fn op_galois(
    sigma: &GaloisElement,
    op: &OperatorExpr,
    phi: &SchwartzFunction,
    opts: &EvalOptions,
) -> Result<SchwartzFunction> {
    op.clone().galois_twist(sigma).apply(phi, opts)
}

/// The `σ ∈ Gal(E_N/Q(√p))` whose action on `p`-power roots of unity is
/// `σ_{s²}` for a unit `s`.
pub fn square_twist_group(tower: Tower) -> Vec<GaloisElement> {
    Subfield::RealQuadratic
        .fixing_group(tower)
        .into_iter()
        .filter(|sigma| square_root_of_partner(sigma).is_some())
        .collect()
}

/// A unit `s` with `σ|_{Q(ζ_{p^N})} = σ_{s²}`.
pub fn square_root_of_partner(sigma: &GaloisElement) -> Option<u64> {
    let t = sigma.tower();
    sqrt_mod_prime_power(sigma.restriction(), t.p(), t.depth())
}

fn require_real_quadratic(sigma: &GaloisElement) -> Result<()> {
    if sigma.fixes(Subfield::RealQuadratic) {
        Ok(())
    } else {
        Err(Error::NotInSubgroup { exponent: sigma.exponent(), group: "Gal(E/Q(sqrt p))".into() })
    }
}

fn require_square(sigma: &GaloisElement) -> Result<Q> {
    require_real_quadratic(sigma)?;
    square_root_of_partner(sigma).map(|s| q(s as i64)).ok_or_else(|| Error::NotInSubgroup {
        exponent: sigma.exponent(),
        group: "the square-twist subgroup".into(),
    })
}

/// The identities relating twists of characters, similitudes and Galois
/// conjugation of Weil operators.
#[derive(Debug, Clone)]
pub enum TwistIdentity {
    /// `W_λ(g^{f_s}) = W_{λ[s]}(g)`.
    SimilitudeTwist { g: SymplecticElement, s: Q },
    /// `^σW_λ(g) = W_{λ[s]}(g)` for `σ` fixing `√p`.
    GaloisTwist { g: SymplecticElement, sigma: GaloisElement },
    /// `σ(W_λ(g)φ) = W_{λ[s]}(g)(σφ)` for `σ` fixing `√p`.
    GaloisEquivariance { g: SymplecticElement, sigma: GaloisElement },
    /// `^σW_λ(g) = W_λ(g_s)⁻¹ W_λ(g) W_λ(g_s)` when `σ` acts on the character
    /// as `s²`.
    GaloisConjugation { g: SymplecticElement, sigma: GaloisElement },
    /// `^σW_λ(g_t) = W_λ(g_t)` for the same `σ`.
    DilationFixed { t: Q, sigma: GaloisElement },
    /// `μ_{λ[s],g} = |s|^{i/2} μ_{λ,g}`.
    CharacterMeasure { g: SymplecticElement, s: Q },
    /// `μ_{λ,g^{f_s}} = |s|^{−i/2} μ_{λ,g}`.
    SimilitudeMeasure { g: SymplecticElement, s: Q },
    /// The measure scalars and lattice volumes lie in `Q(√p)`.
    MeasureRationality { g: SymplecticElement },
}

fn element_label(g: &SymplecticElement) -> String {
    let rows: Vec<String> = g.entry_strings().iter().map(|r| format!("[{}]", r.join(","))).collect();
    format!("[{}]", rows.join(","))
}

impl TwistIdentity {
    pub fn name(&self) -> &'static str {
        match self {
            TwistIdentity::SimilitudeTwist { .. } => "similitude-twist",
            TwistIdentity::GaloisTwist { .. } => "galois-twist",
            TwistIdentity::GaloisEquivariance { .. } => "galois-equivariance",
            TwistIdentity::GaloisConjugation { .. } => "galois-conjugation",
            TwistIdentity::DilationFixed { .. } => "dilation-fixed",
            TwistIdentity::CharacterMeasure { .. } => "character-measure",
            TwistIdentity::SimilitudeMeasure { .. } => "similitude-measure",
            TwistIdentity::MeasureRationality { .. } => "measure-rationality",
        }
    }

    pub fn params(&self) -> Vec<(String, String)> {
        let g = |g: &SymplecticElement| ("g".to_string(), element_label(g));
        let s = |s: &Q| ("s".to_string(), fmt_q(s));
        let sigma = |x: &GaloisElement| ("sigma".to_string(), x.exponent().to_string());
        match self {
            TwistIdentity::SimilitudeTwist { g: e, s: x }
            | TwistIdentity::CharacterMeasure { g: e, s: x }
            | TwistIdentity::SimilitudeMeasure { g: e, s: x } => alloc::vec![g(e), s(x)],
            TwistIdentity::GaloisTwist { g: e, sigma: x }
            | TwistIdentity::GaloisEquivariance { g: e, sigma: x }
            | TwistIdentity::GaloisConjugation { g: e, sigma: x } => alloc::vec![g(e), sigma(x)],
            TwistIdentity::DilationFixed { t, sigma: x } => alloc::vec![("t".to_string(), fmt_q(t)), sigma(x)],
            TwistIdentity::MeasureRationality { g: e } => alloc::vec![g(e)],
        }
    }

    /// Checks the identity exactly on every probe (or as scalars for the
    /// measure identities).
    pub fn check(
        &self,
        lambda: &AdditiveCharacter,
        probes: &[SchwartzFunction],
        tower: Tower,
        opts: &EvalOptions,
    ) -> Result<TwistReport> {
        // params name σ as given; the computation uses its lift to `tower`
        self.at_depth(tower.depth()).check_as(self.params(), lambda, probes, tower, opts)
    }

    fn at_depth(&self, depth: u32) -> Self {
        let mut out = self.clone();
        match &mut out {
            TwistIdentity::GaloisTwist { sigma, .. }
            | TwistIdentity::GaloisEquivariance { sigma, .. }
            | TwistIdentity::GaloisConjugation { sigma, .. }
            | TwistIdentity::DilationFixed { sigma, .. } => *sigma = galois_to(sigma, depth),
            _ => {}
        }
        out
    }

    fn check_as(
        &self,
        params: Vec<(String, String)>,
        lambda: &AdditiveCharacter,
        probes: &[SchwartzFunction],
        tower: Tower,
        opts: &EvalOptions,
    ) -> Result<TwistReport> {
        let name = self.name();
        let weil = |lam: &AdditiveCharacter, g: &SymplecticElement| WeilOperator::new(lam.clone(), g.clone(), tower);
        match self {
            TwistIdentity::SimilitudeTwist { g, s } => {
                let lhs = weil(lambda, &g.conj_fs(s)?)?;
                let rhs = weil(&lambda.twist(s)?, g)?;
                TwistReport::compare(name, params, probes, |phi| Ok((lhs.apply(phi, opts)?, rhs.apply(phi, opts)?)))
            }
            TwistIdentity::GaloisTwist { g, sigma } => {
                require_real_quadratic(sigma)?;
                let s = char_galois_partner(sigma, lambda);
                let lhs = OperatorExpr::weil(lambda, g, tower)?.galois_twist(sigma);
                let rhs = weil(&lambda.twist(s.value())?, g)?;
                TwistReport::compare(name, params, probes, |phi| Ok((lhs.apply(phi, opts)?, rhs.apply(phi, opts)?)))
            }
            TwistIdentity::GaloisEquivariance { g, sigma } => {
                require_real_quadratic(sigma)?;
                let s = char_galois_partner(sigma, lambda);
                let w = weil(lambda, g)?;
                let twisted = weil(&lambda.twist(s.value())?, g)?;
                TwistReport::compare(name, params, probes, |phi| {
                    let out = w.apply(phi, opts)?;
                    let sigma_out = galois_to(sigma, out.tower().depth());
                    let lhs = out.galois(&sigma_out);
                    let rhs = twisted.apply(&phi.galois(&galois_to(sigma, phi.tower().depth())), opts)?;
                    Ok((lhs, rhs))
                })
            }
            TwistIdentity::GaloisConjugation { g, sigma } => {
                let s = require_square(sigma)?;
                let lhs = OperatorExpr::weil(lambda, g, tower)?.galois_twist(sigma);
                // g_s lies in the parabolic, where W is an honest representation.
                let rhs = OperatorExpr::Compose(alloc::vec![
                    OperatorExpr::weil(lambda, &SymplecticElement::g_s(g.n(), &s.recip())?, tower)?,
                    OperatorExpr::weil(lambda, g, tower)?,
                    OperatorExpr::weil(lambda, &SymplecticElement::g_s(g.n(), &s)?, tower)?,
                ]);
                TwistReport::compare(name, params, probes, |phi| Ok((lhs.apply(phi, opts)?, rhs.apply(phi, opts)?)))
            }
            TwistIdentity::DilationFixed { t, sigma } => {
                require_square(sigma)?;
                let n = probes.first().map_or(1, SchwartzFunction::dim);
                let op = OperatorExpr::weil(lambda, &SymplecticElement::g_s(n, t)?, tower)?;
                let lhs = op.clone().galois_twist(sigma);
                TwistReport::compare(name, params, probes, |phi| Ok((lhs.apply(phi, opts)?, op.apply(phi, opts)?)))
            }
            TwistIdentity::CharacterMeasure { g, s } => {
                let plain = weil(lambda, g)?;
                let twisted = weil(&lambda.twist(s)?, g)?;
                let v = valuation(s, lambda.p()).ok_or(Error::ZeroTwist)?;
                let rank = plain.measure().rank as i64;
                let lhs = twisted.measure().coset_volume(0);
                let rhs = &half_power(tower, -rank * v) * &plain.measure().coset_volume(0);
                Ok(TwistReport::scalars(name, params, lhs, rhs))
            }
            TwistIdentity::SimilitudeMeasure { g, s } => {
                let (lhs, rhs) = similitude_measures(lambda, g, s, tower)?;
                Ok(TwistReport::scalars(name, params, lhs, rhs))
            }
            TwistIdentity::MeasureRationality { g } => {
                let m = weil(lambda, g)?.measure().clone();
                for value in [m.scalar.clone(), m.coset_volume(0), m.coset_volume(1)] {
                    if !value.in_subfield(Subfield::RealQuadratic) {
                        let witness = Witness::OutsideField { value, field: Subfield::RealQuadratic };
                        return Ok(TwistReport::failed(name, params, 0, witness));
                    }
                }
                Ok(TwistReport::passed(name, params, 0))
            }
        }
    }
}

/// Runs one identity by name: the entry point used by the harness.
pub fn identity_suite(
    identity: &TwistIdentity,
    lambda: &AdditiveCharacter,
    probes: &[SchwartzFunction],
    tower: Tower,
    opts: &EvalOptions,
) -> Result<TwistReport> {
    identity.check(lambda, probes, tower, opts)
}

fn galois_to(sigma: &GaloisElement, depth: u32) -> GaloisElement {
    if sigma.tower().depth() < depth {
        sigma.lift(depth)
    } else {
        *sigma
    }
}

/// Both measures on `Y_g = Y_{g^{f_s}}`, evaluated on the set whose image
/// under the identification for `g` is the unit cube: `(μ_{λ,g^{f_s}}(S),
/// |s|^{−i/2} μ_{λ,g}(S))`.
fn similitude_measures(
    lambda: &AdditiveCharacter,
    g: &SymplecticElement,
    s: &Q,
    tower: Tower,
) -> Result<(CyclotomicNumber, CyclotomicNumber)> {
    let p = lambda.p();
    let plain = WeilOperator::new(lambda.clone(), g.clone(), tower)?;
    let twisted = WeilOperator::new(lambda.clone(), g.conj_fs(s)?, tower)?;
    let (m, mt) = (plain.measure(), twisted.measure());
    let i = m.rank;
    let n = g.n();
    // Both identifications send ker c onto the span of the last n - i
    // coordinates, so their ratio is block upper triangular.
    let change = &m.identification.inverse()? * &mt.identification;
    if !change.block(i, n, 0, i).is_zero() {
        return Err(Error::DimensionMismatch("identifications disagree on ker c".into()));
    }
    let det = change.block(0, i, 0, i).det();
    let det_val = valuation(&det, p).ok_or(Error::SingularMatrix)?;
    let v = valuation(s, p).ok_or(Error::ZeroTwist)?;
    let lhs = &mt.coset_volume(0) * &half_power(tower, -2 * det_val);
    let rhs = &half_power(tower, i as i64 * v) * &m.coset_volume(0);
    Ok((lhs, rhs))
}
