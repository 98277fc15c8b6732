//! Parsers for the `compute` verb.
//!
//! Functions: a sum of terms `c₁*c₂*…*f` where each `cᵢ` is a rational, `zeta(e)`
//! (a power of `ζ_{4p^N}`), `sqrtp` or `i`, and `f` is `atom(x,k)` (the
//! indicator of `x + p^k O^n`, with `x` a rational or `[x1,…,xn]`) or
//! `lattice(j)` (the indicator of `p^j O^n`).
//!
//! Operators: a product `A*B*…` acting right to left, with factors `W(word)`,
//! `S(v,t)`, `delta(e)`, `alpha`, `alpha_inv`, `conj(word)` (`α W(g) α⁻¹`)
//! and `id`. Heisenberg vectors are `0` or sums of `x(a)`, `y(a)`, `x2(a)`, ….

use std::cell::OnceCell;
use std::fmt;

use weil_core::cocycle::CocycleData;
use weil_core::descent::{build_splitting, default_theta_candidates};
use weil_core::rational::{parse_q, q, Q};
use weil_core::sympl::parse_word;
use weil_core::{
    AdditiveCharacter, GaloisElement, HeisenbergElement, OperatorExpr, SchwartzFunction,
    SplittingData, Tower,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the input.
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at position {}: {}", self.pos, self.msg)
    }
}

impl std::error::Error for ParseError {}

type PResult<T> = Result<T, ParseError>;

fn err<T>(pos: usize, msg: impl Into<String>) -> PResult<T> {
    Err(ParseError { pos, msg: msg.into() })
}

/// Splits at top-level occurrences of any of `seps`, keeping the offset and
/// the separator that preceded each piece.
fn split_top(s: &str, seps: &[char]) -> Vec<(usize, Option<char>, String)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let mut lead = None;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            c if depth == 0 && seps.contains(&c) => {
                out.push((start, lead, s[start..i].to_string()));
                start = i + c.len_utf8();
                lead = Some(c);
            }
            _ => {}
        }
    }
    out.push((start, lead, s[start..].to_string()));
    out
}

/// `name(args)` or a bare `name`, with the offset of `args`.
fn call(token: &str, base: usize) -> PResult<(String, Option<(usize, String)>)> {
    let trimmed = token.trim_start();
    let lead = token.len() - trimmed.len();
    let t = trimmed.trim_end();
    match t.find('(') {
        None => Ok((t.to_string(), None)),
        Some(open) => {
            if !t.ends_with(')') {
                return err(base + lead + t.len(), format!("missing ')' in '{t}'"));
            }
            let inner = &t[open + 1..t.len() - 1];
            Ok((t[..open].trim().to_string(), Some((base + lead + open + 1, inner.to_string()))))
        }
    }
}

fn rational(s: &str, pos: usize) -> PResult<Q> {
    parse_q(s).map_or_else(|| err(pos, format!("bad rational '{}'", s.trim())), Ok)
}

fn integer(s: &str, pos: usize) -> PResult<i64> {
    s.trim().parse().map_or_else(|_| err(pos, format!("bad integer '{}'", s.trim())), Ok)
}

fn point(s: &str, pos: usize, n: usize) -> PResult<Vec<Q>> {
    let s = s.trim();
    let coords = match s.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
        Some(body) => body.split(',').map(|c| rational(c, pos)).collect::<PResult<Vec<_>>>()?,
        None => vec![rational(s, pos)?],
    };
    if coords.len() != n {
        return err(pos, format!("point has {} coordinates, expected {n}", coords.len()));
    }
    Ok(coords)
}

/// Parses a function spec on `Q_p^n`.
pub fn parse_function(spec: &str, tower: Tower, n: usize) -> PResult<SchwartzFunction> {
    if spec.trim().is_empty() {
        return err(0, "empty function spec");
    }
    let mut acc = SchwartzFunction::zero(tower, n);
    let pieces = split_top(spec, &['+', '-']);
    let last = pieces.len() - 1;
    let mut negative = false;
    for (idx, (at, sign, term)) in pieces.into_iter().enumerate() {
        negative ^= sign == Some('-');
        if term.trim().is_empty() {
            // signs may stack, as in `a + -b`
            if idx == last {
                return err(at, "empty term");
            }
            continue;
        }
        let mut coef = if negative { tower.from_int(-1) } else { tower.one() };
        negative = false;
        let mut func: Option<SchwartzFunction> = None;
        for (off, _, factor) in split_top(&term, &['*']) {
            let pos = at + off;
            let (name, args) = call(&factor, pos)?;
            let value = match (name.as_str(), args) {
                ("atom", Some((apos, a))) => {
                    let parts = split_top(&a, &[',']);
                    let [(_, _, x), (koff, _, k)] = parts.as_slice() else {
                        return err(apos, "atom(x,k) takes two arguments");
                    };
                    let k = integer(k, apos + koff)?;
                    let x = point(x, apos, n)?;
                    Some(SchwartzFunction::atom(tower, &x, k).map_err(|e| ParseError { pos, msg: e.to_string() })?)
                }
                ("lattice", Some((apos, j))) => Some(SchwartzFunction::lattice_indicator(tower, n, integer(&j, apos)?)),
                ("zeta", Some((apos, e))) => {
                    coef = &coef * &tower.zeta(integer(&e, apos)?);
                    None
                }
                ("sqrtp", None) => {
                    coef = &coef * &tower.sqrt_table().sqrt_p;
                    None
                }
                ("i", None) => {
                    coef = &coef * &tower.i();
                    None
                }
                (other, None) => {
                    coef = coef.scale(&rational(other, pos)?);
                    None
                }
                (other, Some(_)) => return err(pos, format!("unknown function '{other}'")),
            };
            if let Some(f) = value {
                if func.is_some() {
                    return err(pos, "a term has at most one function factor");
                }
                func = Some(f);
            }
        }
        match func {
            Some(f) => acc = acc.add(&f.scale(&coef)),
            None if coef.is_zero() => {}
            None => return err(at, "term has no function factor"),
        }
    }
    Ok(acc)
}

/// Lazily built objects the operator grammar can refer to.
pub struct OpContext {
    pub lambda: AdditiveCharacter,
    pub n: usize,
    pub tower: Tower,
    cocycle: OnceCell<Result<CocycleData, String>>,
    splitting: OnceCell<Result<SplittingData, String>>,
}

impl OpContext {
    pub fn new(lambda: AdditiveCharacter, n: usize, tower: Tower) -> Self {
        OpContext { lambda, n, tower, cocycle: OnceCell::new(), splitting: OnceCell::new() }
    }

    pub fn cocycle(&self) -> Result<&CocycleData, String> {
        self.cocycle
            .get_or_init(|| CocycleData::new(&self.lambda, self.n, self.tower).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn splitting(&self) -> Result<&SplittingData, String> {
        self.splitting
            .get_or_init(|| {
                let c = self.cocycle()?;
                build_splitting(c, &default_theta_candidates(self.tower)).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

fn heisenberg(s: &str, pos: usize, n: usize) -> PResult<HeisenbergElement> {
    let parts = split_top(s, &[',']);
    if parts.len() > 2 {
        return err(pos, "S(v) or S(v,t)");
    }
    let t = match parts.get(1) {
        Some((off, _, t)) => rational(t, pos + off)?,
        None => q(0),
    };
    let (mut x, mut y) = (vec![q(0); n], vec![q(0); n]);
    let v = &parts[0].2;
    if v.trim() != "0" {
        for (off, _, comp) in split_top(v, &['+']) {
            let cpos = pos + off;
            let (name, arg) = call(&comp, cpos)?;
            let Some((apos, a)) = arg else {
                return err(cpos, format!("expected x(a) or y(a), found '{}'", comp.trim()));
            };
            let (target, idx) = match name.split_at(1.min(name.len())) {
                ("x", rest) => (&mut x, rest),
                ("y", rest) => (&mut y, rest),
                _ => return err(cpos, format!("unknown coordinate '{name}'")),
            };
            let i = if idx.is_empty() { 1 } else { integer(idx, cpos)? as usize };
            if i == 0 || i > n {
                return err(cpos, format!("coordinate index {i} outside 1..={n}"));
            }
            target[i - 1] = &target[i - 1] + rational(&a, apos)?;
        }
    }
    Ok(HeisenbergElement::new(x, y, t))
}

/// Parses an operator expression.
pub fn parse_operator(expr: &str, ctx: &OpContext) -> PResult<OperatorExpr> {
    let mut factors = Vec::new();
    for (off, _, factor) in split_top(expr, &['*']) {
        if factor.trim().is_empty() {
            return err(off, "empty factor");
        }
        let (name, args) = call(&factor, off)?;
        let fail = |e: String| ParseError { pos: off, msg: e };
        let op = match (name.as_str(), args) {
            ("id", None) => OperatorExpr::Identity,
            ("W", Some((apos, w))) => {
                let g = parse_word(ctx.n, &w).map_err(|e| ParseError { pos: apos, msg: e })?;
                OperatorExpr::weil(&ctx.lambda, &g, ctx.tower).map_err(|e| fail(e.to_string()))?
            }
            ("S", Some((apos, h))) => OperatorExpr::schrodinger(&ctx.lambda, &heisenberg(&h, apos, ctx.n)?),
            ("delta", Some((apos, e))) => {
                let sigma = GaloisElement::new(ctx.tower, integer(&e, apos)?).map_err(|e| fail(e.to_string()))?;
                ctx.cocycle().map_err(fail)?.delta(&sigma).map_err(|e| fail(e.to_string()))?
            }
            ("alpha", None) => ctx.splitting().map_err(fail)?.alpha(),
            ("alpha_inv", None) => ctx.splitting().map_err(fail)?.alpha_inverse(),
            ("conj", Some((apos, w))) => {
                let g = parse_word(ctx.n, &w).map_err(|e| ParseError { pos: apos, msg: e })?;
                ctx.splitting().map_err(fail)?.conjugated(&g).map_err(|e| fail(e.to_string()))?
            }
            (other, _) => return err(off, format!("unknown operator '{other}'")),
        };
        factors.push(op);
    }
    Ok(if factors.len() == 1 { factors.pop().expect("one factor") } else { OperatorExpr::Compose(factors) })
}
