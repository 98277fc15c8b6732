//! Exact text forms: rationals as `"a/b"`, cyclotomic numbers as coefficient
//! lists in the power basis of `ζ_m`, functions as their non-zero entries.

use serde_json::{json, Value};
use weil_core::rational::fmt_q;
use weil_core::{CyclotomicNumber, SchwartzFunction, SymplecticElement, Witness};

/// Coefficients of `1, ζ_m, ζ_m², …` with trailing zeros dropped.
pub fn cyclotomic_json(x: &CyclotomicNumber) -> Value {
    let mut coeffs = x.coeff_strings();
    while coeffs.last().is_some_and(|c| c == "0") {
        coeffs.pop();
    }
    json!({ "conductor": x.tower().conductor(), "coeffs": coeffs })
}

/// `Σ c_e ζ^e` written out, for text reports.
pub fn cyclotomic_text(x: &CyclotomicNumber) -> String {
    let terms: Vec<String> = x
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| !num_is_zero(c))
        .map(|(e, c)| match e {
            0 => fmt_q(c),
            _ => format!("{}*z^{e}", fmt_q(c)),
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

fn num_is_zero(c: &weil_core::rational::Q) -> bool {
    *c == weil_core::rational::q(0)
}

fn point_text(x: &[weil_core::rational::Q]) -> String {
    match x {
        [one] => fmt_q(one),
        _ => format!("[{}]", x.iter().map(fmt_q).collect::<Vec<_>>().join(",")),
    }
}

/// A function spec that parses back to `f`: a sum of
/// `c*zeta(e)*atom(x,k)` terms over its support.
pub fn function_spec(f: &SchwartzFunction) -> String {
    let (_, k) = f.cell();
    let mut terms = Vec::new();
    for (x, v) in f.support() {
        for (e, c) in v.coeffs().iter().enumerate() {
            if num_is_zero(c) {
                continue;
            }
            let coef = if e == 0 { fmt_q(c) } else { format!("{}*zeta({e})", fmt_q(c)) };
            terms.push(format!("{coef}*atom({},{k})", point_text(&x)));
        }
    }
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

pub fn function_json(f: &SchwartzFunction) -> Value {
    let (j, k) = f.cell();
    let support: Vec<Value> = f
        .support()
        .into_iter()
        .map(|(x, v)| json!({ "x": x.iter().map(fmt_q).collect::<Vec<_>>(), "value": cyclotomic_json(v) }))
        .collect();
    json!({
        "p": f.p(),
        "n": f.dim(),
        "conductor": f.tower().conductor(),
        "cell": [j, k],
        "support": support,
        "spec": function_spec(f),
    })
}

pub fn function_text(f: &SchwartzFunction) -> String {
    let (j, k) = f.cell();
    let mut out = format!("cell ({j},{k}) over Q(zeta_{})\n", f.tower().conductor());
    for (x, v) in f.support() {
        out.push_str(&format!("  {} -> {}\n", point_text(&x), cyclotomic_text(v)));
    }
    if f.is_zero() {
        out.push_str("  (zero)\n");
    }
    out
}

pub fn element_json(g: &SymplecticElement) -> Value {
    json!(g.entry_strings())
}

pub fn witness_json(w: &Witness) -> Value {
    match w {
        Witness::Functions { probe, lhs, rhs } => json!({
            "kind": "functions",
            "probe": function_json(probe),
            "lhs": function_json(lhs),
            "rhs": function_json(rhs),
        }),
        Witness::Scalars { lhs, rhs } => json!({
            "kind": "scalars",
            "lhs": cyclotomic_json(lhs),
            "rhs": cyclotomic_json(rhs),
        }),
        Witness::OutsideField { value, field } => json!({
            "kind": "outside-field",
            "value": cyclotomic_json(value),
            "field": field.tag(),
        }),
    }
}

pub fn error_witness(message: &str) -> Value {
    json!({ "kind": "error", "message": message })
}
